//! Random linear-CDE features, their signature-feature limit, the
//! Goursat-PDE kernel and ridge readouts.

mod gaussian;

pub use gaussian::GaussianField;

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::cde::DenseCdeParams;
use crate::error::{check_len, Error, Result};
use crate::linalg::lstsq_svd;
use crate::path::Path;
use crate::signature::{TruncatedTensor, XiIntegrals};

const TAG_B: u64 = 1 << 32;
const TAG_C: u64 = (1 << 32) + 1;

/// Everything needed to regenerate a random feature map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeededInit {
    pub seed: u64,
    pub n: usize,
    pub d0: usize,
    pub d_omega: usize,
    pub d_xi: usize,
}

/// `A_j ~ N(0, 1/N)`, `B, C ~ N(0, 1)` entrywise, readout zero. Entry
/// `(r, c)` of each matrix is the field value at index `r * cols + c`.
pub fn sample_lecun(init: &SeededInit) -> Result<DenseCdeParams> {
    if init.n == 0 {
        return Err(Error::Invalid("feature dimension must be positive".into()));
    }
    let n = init.n;
    let row_major = |tag: u64, rows: usize, cols: usize, scale: f64| {
        let mut buf = vec![0.0; rows * cols];
        GaussianField::new(init.seed, tag).fill(&mut buf, scale);
        DMatrix::from_row_slice(rows, cols, &buf)
    };
    let inv_sqrt = 1.0 / libm::sqrt(n as f64);
    let a = (0..init.d_omega)
        .map(|j| row_major(j as u64, n, n, inv_sqrt))
        .collect();
    DenseCdeParams::new(
        a,
        row_major(TAG_B, n, init.d_xi, 1.0),
        row_major(TAG_C, n, init.d0, 1.0),
        DVector::zeros(n),
    )
}

/// Coordinates `x0^i Sig^I_{0,t}` and `∫ Sig^I_{s,t} dξ^j_s` for `|I| <= depth`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    pub x0: Vec<f64>,
    pub sig: TruncatedTensor,
    pub xi_terms: Vec<TruncatedTensor>,
}

impl FeatureTensor {
    pub fn inner(&self, other: &FeatureTensor) -> Result<f64> {
        check_len("feature x0 length", self.x0.len(), other.x0.len())?;
        check_len("feature ξ channels", self.xi_terms.len(), other.xi_terms.len())?;
        let x0_dot: f64 = self.x0.iter().zip(&other.x0).map(|(a, b)| a * b).sum();
        let mut total = x0_dot * self.sig.dot(&other.sig)?;
        for (a, b) in self.xi_terms.iter().zip(&other.xi_terms) {
            total += a.dot(b)?;
        }
        Ok(total)
    }

    /// Flattened coordinates: `(i, I)` blocks followed by `(j, I)` blocks.
    pub fn coordinates(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for &x in &self.x0 {
            out.extend(self.sig.coeffs().iter().map(|s| x * s));
        }
        for g in &self.xi_terms {
            out.extend_from_slice(g.coeffs());
        }
        out
    }
}

pub fn feature_tensor(omega: &Path, xi: &Path, x0: &[f64], depth: usize) -> Result<FeatureTensor> {
    Ok(feature_tensor_trajectory(omega, xi, x0, depth)?.pop().unwrap())
}

/// [`feature_tensor`] at every grid point.
pub fn feature_tensor_trajectory(omega: &Path, xi: &Path, x0: &[f64], depth: usize) -> Result<Vec<FeatureTensor>> {
    check_len("ξ grid steps", omega.grid_steps(), xi.grid_steps())?;
    if omega.channels() == 0 {
        return Err(Error::Invalid("ω needs at least one channel".into()));
    }
    let mut sig = TruncatedTensor::one(omega.channels(), depth);
    let mut g = XiIntegrals::new(omega.channels(), xi.channels(), depth);
    let mut out = Vec::with_capacity(omega.grid_steps() + 1);
    let snapshot = |sig: &TruncatedTensor, g: &XiIntegrals| FeatureTensor {
        x0: x0.to_vec(),
        sig: sig.clone(),
        xi_terms: g.channels().to_vec(),
    };
    out.push(snapshot(&sig, &g));
    for k in 0..omega.grid_steps() {
        let dw = omega.increment(k);
        sig.mul_exp(&dw);
        g.step(&dw, &xi.increment(k));
        out.push(snapshot(&sig, &g));
    }
    Ok(out)
}

/// Kernel values `K(s_i, t_j)` on the two original grids.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSurface {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl KernelSurface {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn terminal(&self) -> f64 {
        *self.values.last().unwrap()
    }
}

/// One side of a kernel evaluation.
#[derive(Debug, Clone, Copy)]
pub struct KernelInput<'a> {
    pub omega: &'a Path,
    pub xi: &'a Path,
    pub x0: &'a [f64],
}

/// Solves `K(s,t) = <x0, y0> + <ξ^X_s, ξ^Y_t> + ∬ K <dω^X, dω^Y>` with an
/// implicit trapezoid rule on the product grid, each segment split into
/// `refinement` pieces.
pub fn kernel_goursat(x: KernelInput<'_>, y: KernelInput<'_>, refinement: usize) -> Result<KernelSurface> {
    check_len("kernel ω channels", x.omega.channels(), y.omega.channels())?;
    check_len("kernel ξ channels", x.xi.channels(), y.xi.channels())?;
    check_len("kernel x0 length", x.x0.len(), y.x0.len())?;
    check_len("kernel X grid", x.omega.grid_steps(), x.xi.grid_steps())?;
    check_len("kernel Y grid", y.omega.grid_steps(), y.xi.grid_steps())?;
    let r = refinement.max(1);
    let (ox, sx) = (x.omega.refine(r), x.xi.refine(r));
    let (oy, sy) = (y.omega.refine(r), y.xi.refine(r));
    let (nx, ny) = (ox.grid_steps(), oy.grid_steps());
    let base: f64 = x.x0.iter().zip(y.x0).map(|(a, b)| a * b).sum();

    let incs = |p: &Path| (0..p.grid_steps()).map(|k| p.increment(k)).collect::<Vec<_>>();
    let (dox, doy, dsx, dsy) = (incs(&ox), incs(&oy), incs(&sx), incs(&sy));
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();

    let cols = y.omega.grid_steps() + 1;
    let mut surface = KernelSurface {
        rows: x.omega.grid_steps() + 1,
        cols,
        values: Vec::with_capacity((x.omega.grid_steps() + 1) * cols),
    };
    let mut prev = vec![base; ny + 1];
    let mut cur = vec![0.0; ny + 1];
    let keep = |row: &[f64], out: &mut Vec<f64>| out.extend((0..cols).map(|j| row[j * r]));
    keep(&prev, &mut surface.values);
    for a in 0..nx {
        cur[0] = base;
        for b in 0..ny {
            let c = dot(&dox[a], &doy[b]);
            let f = dot(&dsx[a], &dsy[b]);
            let (k00, k10, k01) = (prev[b], cur[b], prev[b + 1]);
            cur[b + 1] = (k10 + k01 - k00 + f + 0.25 * c * (k00 + k10 + k01)) / (1.0 - 0.25 * c);
        }
        if (a + 1) % r == 0 {
            keep(&cur, &mut surface.values);
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    if surface.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "kernel surface",
            index: surface.values.iter().position(|v| !v.is_finite()).unwrap(),
        });
    }
    Ok(surface)
}

/// Ridge-regression readout.
#[derive(Debug, Clone, PartialEq)]
pub struct Readout {
    pub weights: DVector<f64>,
    pub lambda: f64,
    pub condition: f64,
    /// Set when the pseudo-inverse path met a condition number above `1e12`.
    pub ill_conditioned: bool,
}

impl Readout {
    pub fn predict(&self, features: &DMatrix<f64>) -> DVector<f64> {
        features * &self.weights
    }
}

/// Default ridge strength `1e-6 * trace(SᵀS) / N`.
pub fn default_ridge(features: &DMatrix<f64>) -> f64 {
    let n = features.ncols().max(1);
    1e-6 * features.iter().map(|x| x * x).sum::<f64>() / n as f64
}

/// Fits `w` minimising `|S w - y|^2 + λ |w|^2`. `lambda = None` uses
/// [`default_ridge`]; `Some(0.0)` returns the minimum-norm least-squares
/// solution.
pub fn fit_readout(features: &DMatrix<f64>, targets: &DVector<f64>, lambda: Option<f64>) -> Result<Readout> {
    check_len("readout targets", features.nrows(), targets.len())?;
    crate::error::check_finite("features", features.as_slice())?;
    crate::error::check_finite("targets", targets.as_slice())?;
    let lambda = lambda.unwrap_or_else(|| default_ridge(features));
    if lambda < 0.0 {
        return Err(Error::Invalid("ridge strength must be non-negative".into()));
    }
    if lambda == 0.0 {
        let (weights, condition) = lstsq_svd(features, targets, 1e-14)?;
        return Ok(Readout {
            weights,
            lambda,
            condition,
            ill_conditioned: condition > 1e12,
        });
    }
    let n = features.ncols();
    let mut gram = features.tr_mul(features);
    for i in 0..n {
        gram[(i, i)] += lambda;
    }
    let rhs = features.tr_mul(targets);
    let weights = match gram.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => lstsq_svd(&gram, &rhs, 1e-15)?.0,
    };
    Ok(Readout {
        weights,
        lambda,
        condition: f64::NAN,
        ill_conditioned: false,
    })
}
