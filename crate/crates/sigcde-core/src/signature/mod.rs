//! Truncated path signatures.

mod tensor;

pub use tensor::{level_offset, tensor_len, word_at, word_index, TruncatedTensor, Word};

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::path::Path;

/// Signature of the whole path up to `depth`.
pub fn signature(path: &Path, depth: usize) -> TruncatedTensor {
    signature_between(path, depth, 0, path.grid_steps())
}

/// Signature over `[s, t]`, both snapped to the nearest grid point.
pub fn signature_interval(path: &Path, depth: usize, s: f64, t: f64) -> Result<TruncatedTensor> {
    if s > t {
        return Err(Error::Invalid(alloc::format!("interval [{s}, {t}] is reversed")));
    }
    Ok(signature_between(path, depth, path.snap(s)?, path.snap(t)?))
}

/// Signature over grid indices `i..=j`.
pub fn signature_between(path: &Path, depth: usize, i: usize, j: usize) -> TruncatedTensor {
    let mut sig = TruncatedTensor::one(path.channels(), depth);
    let mut dx = vec![0.0; path.channels()];
    for k in i..j {
        path.increment_into(k, &mut dx);
        sig.mul_exp(&dx);
    }
    sig
}

/// `Sig_{0, t_k}` for every grid index `k`.
pub fn signature_trajectory(path: &Path, depth: usize) -> Vec<TruncatedTensor> {
    let mut sig = TruncatedTensor::one(path.channels(), depth);
    let mut out = Vec::with_capacity(path.grid_steps() + 1);
    out.push(sig.clone());
    let mut dx = vec![0.0; path.channels()];
    for k in 0..path.grid_steps() {
        path.increment_into(k, &mut dx);
        sig.mul_exp(&dx);
        out.push(sig.clone());
    }
    out
}

/// Quadrature rule for [`brute_force_signature`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quadrature {
    Trapezoid,
    LeftPoint,
    /// Trapezoid at `refinement` and `2 * refinement` combined as
    /// `(4 T_2r - T_r) / 3`. The nested trapezoid update is symmetric, so its
    /// error expands in even powers of the step and this is fourth order.
    RichardsonTrapezoid,
}

/// Iterated integrals by nested quadrature on a grid refined `refinement`
/// times per segment. Independent of the Chen-product route.
pub fn brute_force_signature(
    path: &Path,
    depth: usize,
    refinement: usize,
    rule: Quadrature,
) -> TruncatedTensor {
    if rule == Quadrature::RichardsonTrapezoid {
        let coarse = brute_force_signature(path, depth, refinement.max(1), Quadrature::Trapezoid);
        let mut fine = brute_force_signature(path, depth, 2 * refinement.max(1), Quadrature::Trapezoid);
        for (f, c) in fine.coeffs_mut().iter_mut().zip(coarse.coeffs()) {
            *f = (4.0 * *f - c) / 3.0;
        }
        return fine;
    }
    let fine = path.refine(refinement.max(1));
    let d = fine.channels();
    let mut cur = TruncatedTensor::one(d, depth);
    let mut dx = vec![0.0; d];
    for k in 0..fine.grid_steps() {
        fine.increment_into(k, &mut dx);
        let old = cur.clone();
        for n in 1..=depth {
            let lo = level_offset(d, n - 1);
            let hi = level_offset(d, n);
            let width = hi - lo;
            for w in 0..width {
                let before = old.coeffs()[lo + w];
                let weight = match rule {
                    Quadrature::Trapezoid => 0.5 * (before + cur.coeffs()[lo + w]),
                    Quadrature::LeftPoint => before,
                    Quadrature::RichardsonTrapezoid => unreachable!("handled above"),
                };
                for (i, &dxi) in dx.iter().enumerate() {
                    cur.coeffs_mut()[hi + w * d + i] += weight * dxi;
                }
            }
        }
    }
    cur
}

/// Symmetrised signature: the coefficient of `I` is the average of
/// `Sig^{sigma(I)}` over all permutations, which equals the tensor
/// exponential of the increment over `[s, t]`.
pub fn sym_signature(path: &Path, depth: usize, s: f64, t: f64) -> Result<TruncatedTensor> {
    if s > t {
        return Err(Error::Invalid(alloc::format!("interval [{s}, {t}] is reversed")));
    }
    let (i, j) = (path.snap(s)?, path.snap(t)?);
    let inc: Vec<f64> = path
        .row(j)
        .iter()
        .zip(path.row(i))
        .map(|(b, a)| b - a)
        .collect();
    Ok(TruncatedTensor::exp(&inc, depth))
}

/// Level norm against the factorial-decay bound `|p|_1^k / k!`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelBound {
    pub level: usize,
    pub norm: f64,
    pub bound: f64,
}

impl LevelBound {
    pub fn holds(&self) -> bool {
        self.norm <= self.bound * (1.0 + 1e-12) + 1e-300
    }
}

pub fn factorial_decay_check(path: &Path, depth: usize) -> Vec<LevelBound> {
    let sig = signature(path, depth);
    let var = path.one_variation();
    let mut bound = 1.0;
    (0..=depth)
        .map(|k| {
            if k > 0 {
                bound *= var / k as f64;
            }
            LevelBound {
                level: k,
                norm: sig.level_norm(k),
                bound,
            }
        })
        .collect()
}

/// Running values of `int_0^t Sig(omega)^I_{s,t} dxi^j_s` for every ξ-channel
/// `j` and word `I` with `|I| <= depth`, stepped exactly along segments.
#[derive(Debug, Clone)]
pub struct XiIntegrals {
    per_channel: Vec<TruncatedTensor>,
}

impl XiIntegrals {
    pub fn new(d_omega: usize, d_xi: usize, depth: usize) -> Self {
        Self {
            per_channel: vec![TruncatedTensor::zero(d_omega, depth); d_xi],
        }
    }

    /// Advances over one segment with increments `d_omega`, `d_xi`.
    pub fn step(&mut self, d_omega: &[f64], d_xi: &[f64]) {
        if self.per_channel.is_empty() {
            return;
        }
        let depth = self.per_channel[0].depth();
        let phi = TruncatedTensor::phi1(d_omega, depth);
        for (g, &dx) in self.per_channel.iter_mut().zip(d_xi) {
            g.mul_exp(d_omega);
            if dx != 0.0 {
                for (a, b) in g.coeffs_mut().iter_mut().zip(phi.coeffs()) {
                    *a += dx * b;
                }
            }
        }
    }

    pub fn channel(&self, j: usize) -> &TruncatedTensor {
        &self.per_channel[j]
    }

    pub fn channels(&self) -> &[TruncatedTensor] {
        &self.per_channel
    }
}
