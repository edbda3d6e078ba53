use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use super::params::{DenseCdeParams, Trajectory};
use crate::error::Result;
use crate::linalg::spectral_norm;
use crate::path::Path;
use crate::signature::{level_offset, tensor_len, TruncatedTensor, XiIntegrals};

/// Truncated signature expansion of a solution with a rigorous tail bound.
#[derive(Debug, Clone)]
pub struct SignatureExpansion {
    pub trajectory: Trajectory,
    /// Euclidean-norm bound on the truncation error at each grid point.
    pub tail_bound: Vec<f64>,
}

/// `sum_{m > depth} x^m / m!`, summed directly to avoid cancellation.
pub fn exp_tail(x: f64, depth: usize) -> f64 {
    let mut term = 1.0;
    for m in 1..=depth + 1 {
        term *= x / m as f64;
    }
    let mut sum = 0.0;
    let mut m = depth + 1;
    while term > 0.0 && term > 1e-18 * sum {
        sum += term;
        m += 1;
        term *= x / m as f64;
        if m > depth + 400 {
            break;
        }
    }
    sum
}

/// Columns `A_I v` for every word `|I| <= depth` in flat word order, where
/// `A_I = A_{i_n} ... A_{i_1}`.
fn word_images(params: &DenseCdeParams, v: &DVector<f64>, depth: usize) -> DMatrix<f64> {
    let d = params.d_omega();
    let n = params.state_dim();
    let total = tensor_len(d, depth);
    let mut out = DMatrix::zeros(n, total);
    out.set_column(0, v);
    for level in 1..=depth {
        let prev = level_offset(d, level - 1);
        let cur = level_offset(d, level);
        for w in 0..cur - prev {
            let src = out.column(prev + w).into_owned();
            for (k, ak) in params.a.iter().enumerate() {
                let img = ak * &src;
                out.set_column(cur + w * d + k, &img);
            }
        }
    }
    out
}

/// `Z_t ≈ sum_I A_I C x0 Sig^I_{0,t} + sum_j sum_I A_I B_j int Sig^I_{s,t} dξ^j_s`
/// over words of length at most `depth`.
pub fn solve_via_signature(
    params: &DenseCdeParams,
    omega: &Path,
    xi: &Path,
    x0: &[f64],
    depth: usize,
) -> Result<SignatureExpansion> {
    params.check_inputs(omega, xi, x0)?;
    let n = params.state_dim();
    let z0 = &params.c * DVector::from_column_slice(x0);
    let p_init = word_images(params, &z0, depth);
    let p_xi: Vec<DMatrix<f64>> = (0..params.d_xi())
        .map(|j| word_images(params, &params.b.column(j).into_owned(), depth))
        .collect();

    let lambda = params.a.iter().map(spectral_norm).fold(0.0, f64::max);
    let b_norms: Vec<f64> = (0..params.d_xi()).map(|j| params.b.column(j).norm()).collect();
    let z0_norm = z0.norm();

    let d_omega = params.d_omega();
    let mut sig = TruncatedTensor::one(d_omega, depth);
    let mut g = XiIntegrals::new(d_omega, params.d_xi(), depth);
    let mut dw = vec![0.0; d_omega];
    let mut dxi = vec![0.0; params.d_xi()];
    let mut var_omega = 0.0;
    let mut var_xi = vec![0.0; params.d_xi()];

    let mut traj = Trajectory::with_capacity(n, omega.grid_steps() + 1);
    let mut tail_bound = Vec::with_capacity(omega.grid_steps() + 1);
    let mut z = DVector::zeros(n);
    for k in 0..=omega.grid_steps() {
        if k > 0 {
            omega.increment_into(k - 1, &mut dw);
            xi.increment_into(k - 1, &mut dxi);
            sig.mul_exp(&dw);
            g.step(&dw, &dxi);
            var_omega += dw.iter().map(|x| x.abs()).sum::<f64>();
            for (v, x) in var_xi.iter_mut().zip(&dxi) {
                *v += x.abs();
            }
        }
        z.gemv(1.0, &p_init, &DVector::from_column_slice(sig.coeffs()), 0.0);
        for (j, pj) in p_xi.iter().enumerate() {
            z.gemv(1.0, pj, &DVector::from_column_slice(g.channel(j).coeffs()), 1.0);
        }
        traj.push(z.as_slice());
        let k_const = z0_norm + b_norms.iter().zip(&var_xi).map(|(b, v)| b * v).sum::<f64>();
        tail_bound.push(k_const * exp_tail(lambda * var_omega, depth));
    }
    Ok(SignatureExpansion {
        trajectory: traj,
        tail_bound,
    })
}
