//! Piecewise-linear paths on a uniform grid of `[0, 1]`.
//!
//! A path with `L` grid steps stores `L + 1` rows of `d` channels in row-major
//! order. Row `k` is the value at `t_k = k / L`; row 0 is the origin.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_finite, check_len, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    grid_steps: usize,
    channels: usize,
    values: Vec<f64>,
}

impl Path {
    /// Builds a path from row-major values. The first row must be zero.
    pub fn new(grid_steps: usize, channels: usize, values: Vec<f64>) -> Result<Self> {
        if grid_steps == 0 {
            return Err(Error::Invalid("a path needs at least one grid step".into()));
        }
        check_len("path values", (grid_steps + 1) * channels, values.len())?;
        check_finite("path values", &values)?;
        if values[..channels].iter().any(|&v| v != 0.0) {
            return Err(Error::Invalid("path must start at the origin".into()));
        }
        Ok(Self {
            grid_steps,
            channels,
            values,
        })
    }

    /// Builds a path from samples, subtracting the first sample from every row.
    pub fn from_samples(grid_steps: usize, channels: usize, samples: &[f64]) -> Result<Self> {
        check_len("path samples", (grid_steps + 1) * channels, samples.len())?;
        let mut values = samples.to_vec();
        for k in (0..=grid_steps).rev() {
            for c in 0..channels {
                values[k * channels + c] -= samples[c];
            }
        }
        Self::new(grid_steps, channels, values)
    }

    pub fn zeros(grid_steps: usize, channels: usize) -> Result<Self> {
        Self::new(grid_steps, channels, vec![0.0; (grid_steps + 1) * channels])
    }

    /// The identity path `t -> t` (one channel).
    pub fn time(grid_steps: usize) -> Result<Self> {
        let values = (0..=grid_steps).map(|k| k as f64 / grid_steps as f64).collect();
        Self::new(grid_steps, 1, values)
    }

    pub fn grid_steps(&self) -> usize {
        self.grid_steps
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn time_at(&self, k: usize) -> f64 {
        k as f64 / self.grid_steps as f64
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.values[k * self.channels..(k + 1) * self.channels]
    }

    /// Increment over segment `k`, i.e. `p(t_{k+1}) - p(t_k)`.
    pub fn increment(&self, k: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.channels];
        self.increment_into(k, &mut out);
        out
    }

    pub fn increment_into(&self, k: usize, out: &mut [f64]) {
        let d = self.channels;
        for c in 0..d {
            out[c] = self.values[(k + 1) * d + c] - self.values[k * d + c];
        }
    }

    pub fn endpoint(&self) -> &[f64] {
        self.row(self.grid_steps)
    }

    /// Index of the grid point nearest to `t`.
    pub fn snap(&self, t: f64) -> Result<usize> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Invalid(alloc::format!("time {t} outside [0, 1]")));
        }
        Ok(libm::round(t * self.grid_steps as f64) as usize)
    }

    pub fn eval_at(&self, t: f64) -> Result<Vec<f64>> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Invalid(alloc::format!("time {t} outside [0, 1]")));
        }
        let x = t * self.grid_steps as f64;
        let k = (libm::floor(x) as usize).min(self.grid_steps - 1);
        let theta = x - k as f64;
        let (a, b) = (self.row(k), self.row(k + 1));
        Ok(a.iter().zip(b).map(|(a, b)| a + theta * (b - a)).collect())
    }

    /// The path frozen outside `[s, t]`: zero before `s`, `p_u - p_s` inside,
    /// and `p_t - p_s` after. Both times snap to the nearest grid point.
    pub fn restrict(&self, s: f64, t: f64) -> Result<Path> {
        if s > t {
            return Err(Error::Invalid(alloc::format!("interval [{s}, {t}] is reversed")));
        }
        let (i, j) = (self.snap(s)?, self.snap(t)?);
        let d = self.channels;
        let mut values = vec![0.0; self.values.len()];
        for k in 0..=self.grid_steps {
            let u = k.clamp(i, j);
            for c in 0..d {
                values[k * d + c] = self.values[u * d + c] - self.values[i * d + c];
            }
        }
        Path::new(self.grid_steps, d, values)
    }

    /// Prepends a time channel `t` (and `t^2` when `with_t2`).
    pub fn time_augment(&self, with_t2: bool) -> Path {
        let extra = if with_t2 { 2 } else { 1 };
        let d = self.channels + extra;
        let mut values = Vec::with_capacity((self.grid_steps + 1) * d);
        for k in 0..=self.grid_steps {
            let t = self.time_at(k);
            values.push(t);
            if with_t2 {
                values.push(t * t);
            }
            values.extend_from_slice(self.row(k));
        }
        Path {
            grid_steps: self.grid_steps,
            channels: d,
            values,
        }
    }

    /// Sum over segments of the L1 norm of the increments.
    pub fn one_variation(&self) -> f64 {
        self.one_variation_between(0, self.grid_steps)
    }

    pub fn one_variation_between(&self, i: usize, j: usize) -> f64 {
        let d = self.channels;
        (i..j)
            .map(|k| {
                (0..d)
                    .map(|c| (self.values[(k + 1) * d + c] - self.values[k * d + c]).abs())
                    .sum::<f64>()
            })
            .sum()
    }

    /// Runs `self` on `[0, 1/2]` and `other` on `[1/2, 1]`.
    pub fn concat(&self, other: &Path) -> Result<Path> {
        check_len("concatenated path channels", self.channels, other.channels)?;
        check_len("concatenated path grid", self.grid_steps, other.grid_steps)?;
        let d = self.channels;
        let mut values = self.values.clone();
        let end = self.endpoint().to_vec();
        for k in 1..=other.grid_steps {
            for c in 0..d {
                values.push(end[c] + other.values[k * d + c]);
            }
        }
        Path::new(self.grid_steps * 2, d, values)
    }

    /// `t -> p(1 - t) - p(1)`.
    pub fn reverse(&self) -> Path {
        let d = self.channels;
        let end = self.endpoint();
        let mut values = Vec::with_capacity(self.values.len());
        for k in (0..=self.grid_steps).rev() {
            for c in 0..d {
                values.push(self.values[k * d + c] - end[c]);
            }
        }
        Path {
            grid_steps: self.grid_steps,
            channels: d,
            values,
        }
    }

    /// Path with each segment split into `factor` equal pieces.
    pub fn refine(&self, factor: usize) -> Path {
        let d = self.channels;
        let factor = factor.max(1);
        let mut values = Vec::with_capacity((self.grid_steps * factor + 1) * d);
        values.extend_from_slice(self.row(0));
        for k in 0..self.grid_steps {
            let (a, b) = (self.row(k), self.row(k + 1));
            for r in 1..=factor {
                let theta = r as f64 / factor as f64;
                values.extend(a.iter().zip(b).map(|(a, b)| a + theta * (b - a)));
            }
        }
        Path {
            grid_steps: self.grid_steps * factor,
            channels: d,
            values,
        }
    }

    /// Keeps the channels listed in `idx`, in that order.
    pub fn select_channels(&self, idx: &[usize]) -> Result<Path> {
        if let Some(&bad) = idx.iter().find(|&&c| c >= self.channels) {
            return Err(Error::Invalid(alloc::format!("channel {bad} out of range")));
        }
        let mut values = Vec::with_capacity((self.grid_steps + 1) * idx.len());
        for k in 0..=self.grid_steps {
            let row = self.row(k);
            values.extend(idx.iter().map(|&c| row[c]));
        }
        Path::new(self.grid_steps, idx.len(), values)
    }

    /// Stacks the channels of two paths on the same grid.
    pub fn stack(&self, other: &Path) -> Result<Path> {
        check_len("stacked path grid", self.grid_steps, other.grid_steps)?;
        let d = self.channels + other.channels;
        let mut values = Vec::with_capacity((self.grid_steps + 1) * d);
        for k in 0..=self.grid_steps {
            values.extend_from_slice(self.row(k));
            values.extend_from_slice(other.row(k));
        }
        Path::new(self.grid_steps, d, values)
    }
}
