use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use super::gates::Gate;
use super::scan::{parallel_scan, ScanElement, ScanSchedule};
use crate::cde::DiagonalCdeParams;
use crate::error::{check_finite, check_len, Error, Result};
use crate::linalg::phi1_scalar;

/// Per-channel diagonal LTI system; channel `h` has `N` states.
#[derive(Debug, Clone, PartialEq)]
pub struct S4Params {
    /// `d x N` diagonal entries of `A`.
    pub a: DMatrix<f64>,
    /// `d x N`.
    pub b: DMatrix<f64>,
    /// Step size per channel.
    pub delta: Vec<f64>,
}

impl S4Params {
    fn validate(&self) -> Result<()> {
        check_len("S4 b rows", self.a.nrows(), self.b.nrows())?;
        check_len("S4 b columns", self.a.ncols(), self.b.ncols())?;
        check_len("S4 Δ length", self.a.nrows(), self.delta.len())?;
        if self.delta.iter().any(|&x| !(x > 0.0)) {
            return Err(Error::Invalid("S4 step sizes must be positive".into()));
        }
        Ok(())
    }

    /// Equivalent diagonal CDE driven by `ω = t`, `ξ = ∫ X dt` on a grid
    /// with step `grid_step`; state index `h * N + n`.
    pub fn as_diagonal_cde(&self, grid_step: f64) -> Result<DiagonalCdeParams> {
        self.validate()?;
        let (d, n) = self.a.shape();
        let mut v = DMatrix::zeros(d * n, 1);
        let mut b = DMatrix::zeros(d * n, d);
        for h in 0..d {
            let scale = self.delta[h] / grid_step;
            for k in 0..n {
                v[(h * n + k, 0)] = self.a[(h, k)] * scale;
                b[(h * n + k, h)] = self.b[(h, k)] * scale;
            }
        }
        DiagonalCdeParams::new(v, b, DMatrix::zeros(d * n, 0), DVector::zeros(d * n))
    }
}

/// `z_l = exp(Δ a) z_{l-1} + phi_1(Δ a) Δ b x_l`, `z_0 = 0`.
/// Returns `L x (d N)` states, channel-major.
pub fn s4_forward(params: &S4Params, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    params.validate()?;
    let (d, n) = params.a.shape();
    check_len("S4 token width", d, x.ncols())?;
    check_finite("tokens", x.as_slice())?;
    let mut z = alloc::vec![0.0; d * n];
    let mut out = DMatrix::zeros(x.nrows(), d * n);
    let mut decay = alloc::vec![0.0; d * n];
    let mut gain = alloc::vec![0.0; d * n];
    for h in 0..d {
        for k in 0..n {
            let m = params.delta[h] * params.a[(h, k)];
            decay[h * n + k] = libm::exp(m);
            gain[h * n + k] = phi1_scalar(m) * params.delta[h] * params.b[(h, k)];
        }
    }
    for l in 0..x.nrows() {
        for h in 0..d {
            let u = x[(l, h)];
            for k in 0..n {
                let i = h * n + k;
                z[i] = decay[i] * z[i] + gain[i] * u;
                out[(l, i)] = z[i];
            }
        }
    }
    Ok(out)
}

/// How the input term is discretized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputRule {
    /// `phi_1(Δ a) Δ b`: exact zero-order hold.
    ZeroOrderHold,
    /// `Δ b`: the simplified rule used by Mamba implementations.
    Euler,
}

/// Input-dependent step `Δ_l = σ(α x_l + β) δ` per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct S6Params {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub delta: f64,
    pub gate: Gate,
    pub input_rule: InputRule,
}

impl S6Params {
    fn validate(&self) -> Result<()> {
        let d = self.a.nrows();
        check_len("S6 b rows", d, self.b.nrows())?;
        check_len("S6 b columns", self.a.ncols(), self.b.ncols())?;
        check_len("S6 α length", d, self.alpha.len())?;
        check_len("S6 β length", d, self.beta.len())?;
        if !(self.delta > 0.0) {
            return Err(Error::Invalid("S6 δ must be positive".into()));
        }
        Ok(())
    }

    /// Diagonal CDE on the selective gates: `ω^h`, `ξ^h` drive the states of
    /// channel `h`.
    pub fn as_diagonal_cde(&self) -> Result<DiagonalCdeParams> {
        self.validate()?;
        let (d, n) = self.a.shape();
        let mut v = DMatrix::zeros(d * n, d);
        let mut b = DMatrix::zeros(d * n, d);
        for h in 0..d {
            for k in 0..n {
                v[(h * n + k, h)] = self.a[(h, k)];
                b[(h * n + k, h)] = self.b[(h, k)];
            }
        }
        DiagonalCdeParams::new(v, b, DMatrix::zeros(d * n, 0), DVector::zeros(d * n))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct S6Output {
    /// `L x (d N)` states, channel-major.
    pub states: DMatrix<f64>,
    /// `L x d` step sizes.
    pub steps: DMatrix<f64>,
}

pub fn s6_forward(params: &S6Params, x: &DMatrix<f64>) -> Result<S6Output> {
    params.validate()?;
    let (d, n) = params.a.shape();
    check_len("S6 token width", d, x.ncols())?;
    check_finite("tokens", x.as_slice())?;
    let mut z = alloc::vec![0.0; d * n];
    let mut states = DMatrix::zeros(x.nrows(), d * n);
    let mut steps = DMatrix::zeros(x.nrows(), d);
    for l in 0..x.nrows() {
        for h in 0..d {
            let u = x[(l, h)];
            let dt = params.gate.apply(params.alpha[h] * u + params.beta[h]) * params.delta;
            steps[(l, h)] = dt;
            for k in 0..n {
                let i = h * n + k;
                let m = dt * params.a[(h, k)];
                let gain = match params.input_rule {
                    InputRule::ZeroOrderHold => phi1_scalar(m) * dt,
                    InputRule::Euler => dt,
                };
                z[i] = libm::exp(m) * z[i] + gain * params.b[(h, k)] * u;
                states[(l, i)] = z[i];
            }
        }
    }
    Ok(S6Output { states, steps })
}

/// Single diagonal LTI system over all channels jointly.
#[derive(Debug, Clone, PartialEq)]
pub struct S5Params {
    /// `P` diagonal entries.
    pub a: Vec<f64>,
    /// `P x d`.
    pub b: DMatrix<f64>,
    /// `P` step sizes.
    pub delta: Vec<f64>,
}

impl S5Params {
    fn validate(&self) -> Result<()> {
        check_len("S5 b rows", self.a.len(), self.b.nrows())?;
        check_len("S5 Δ length", self.a.len(), self.delta.len())?;
        if self.delta.iter().any(|&x| !(x > 0.0)) {
            return Err(Error::Invalid("S5 step sizes must be positive".into()));
        }
        Ok(())
    }

    /// `(exp(Δ a), phi_1(Δ a) Δ B)`.
    pub fn discretize(&self) -> (Vec<f64>, DMatrix<f64>) {
        let mut b_bar = self.b.clone();
        let decay = self
            .a
            .iter()
            .zip(&self.delta)
            .enumerate()
            .map(|(p, (&a, &dt))| {
                let m = a * dt;
                let g = phi1_scalar(m) * dt;
                for c in 0..b_bar.ncols() {
                    b_bar[(p, c)] *= g;
                }
                libm::exp(m)
            })
            .collect();
        (decay, b_bar)
    }
}

/// `z_l = Ā z_{l-1} + B̄ x_l` evaluated through the associative scan.
/// Returns `L x P` states.
pub fn s5_forward(params: &S5Params, x: &DMatrix<f64>, schedule: ScanSchedule) -> Result<DMatrix<f64>> {
    params.validate()?;
    check_len("S5 token width", params.b.ncols(), x.ncols())?;
    check_finite("tokens", x.as_slice())?;
    let (decay, b_bar) = params.discretize();
    let elements: Vec<ScanElement> = (0..x.nrows())
        .map(|l| ScanElement {
            multiplier: decay.clone(),
            offset: (&b_bar * x.row(l).transpose()).as_slice().to_vec(),
        })
        .collect();
    let prefix = parallel_scan(&elements, schedule)?;
    let p = params.a.len();
    Ok(DMatrix::from_fn(x.nrows(), p, |l, i| prefix[l].offset[i]))
}

/// Gated linear attention with an outer-product gate.
#[derive(Debug, Clone, PartialEq)]
pub struct GlaParams {
    /// `d x d_k`.
    pub w_key: DMatrix<f64>,
    /// `d x d_v`.
    pub w_val: DMatrix<f64>,
    /// `d x d_k`.
    pub w_alpha: DMatrix<f64>,
    pub b_alpha: DVector<f64>,
    /// `d x d_v`.
    pub w_beta: DMatrix<f64>,
    pub b_beta: DVector<f64>,
    pub tau: f64,
}

/// `Z_l = Ā(x_l) ⊙ Z_{l-1} + W_keyᵀ x xᵀ W_val`, with
/// `Ā = τ⁻² σ(xᵀ W_α + b_α)ᵀ σ(xᵀ W_β + b_β)`. States are flattened row-major.
pub fn gla_forward(params: &GlaParams, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !(params.tau > 0.0) {
        return Err(Error::Invalid("GLA temperature must be positive".into()));
    }
    let d = x.ncols();
    let (dk, dv) = (params.w_key.ncols(), params.w_val.ncols());
    check_len("GLA key rows", d, params.w_key.nrows())?;
    check_len("GLA value rows", d, params.w_val.nrows())?;
    check_len("GLA α rows", d, params.w_alpha.nrows())?;
    check_len("GLA α width", dk, params.w_alpha.ncols())?;
    check_len("GLA β rows", d, params.w_beta.nrows())?;
    check_len("GLA β width", dv, params.w_beta.ncols())?;
    check_len("GLA α bias", dk, params.b_alpha.len())?;
    check_len("GLA β bias", dv, params.b_beta.len())?;
    check_finite("tokens", x.as_slice())?;
    let inv_t2 = 1.0 / (params.tau * params.tau);
    let mut z = DMatrix::<f64>::zeros(dk, dv);
    let mut out = DMatrix::zeros(x.nrows(), dk * dv);
    for l in 0..x.nrows() {
        let xr = x.row(l);
        let key = xr * &params.w_key;
        let val = xr * &params.w_val;
        let ga = (xr * &params.w_alpha + params.b_alpha.transpose()).map(super::gates::sigmoid);
        let gb = (xr * &params.w_beta + params.b_beta.transpose()).map(super::gates::sigmoid);
        for p in 0..dk {
            for q in 0..dv {
                z[(p, q)] = inv_t2 * ga[p] * gb[q] * z[(p, q)] + key[p] * val[q];
                out[(l, p * dv + q)] = z[(p, q)];
            }
        }
    }
    Ok(out)
}
