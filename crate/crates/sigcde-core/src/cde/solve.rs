use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use super::params::{DenseCdeParams, DiagonalCdeParams, Trajectory};
use crate::error::{Error, Result};
use crate::linalg::{affine_exp_action, expm_phi1, norm1, phi1_scalar};
use crate::path::Path;

/// Transition multipliers with 1-norm above this trigger a warning.
pub const MULTIPLIER_WARN: f64 = 1e3;

/// How each zero-order-hold segment is advanced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stepper {
    /// Exponential for small states, Taylor action for large ones.
    Auto,
    /// Form `exp(M)` and `phi_1(M)` with the Padé exponential.
    Exponential,
    /// Apply the exponential to the state with matrix-vector products only.
    Action,
}

/// Largest state dimension for which [`Stepper::Auto`] forms matrices.
pub const AUTO_EXPONENTIAL_MAX_DIM: usize = 96;

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub stepper: Stepper,
    /// Reuse segment transitions whose ω-increments repeat bit for bit.
    pub cache_transitions: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            stepper: Stepper::Auto,
            cache_transitions: true,
        }
    }
}

/// Dense solver holding a transition cache that survives across paths.
pub struct DenseSolver<'a> {
    params: &'a DenseCdeParams,
    use_matrices: bool,
    cache: Option<BTreeMap<Vec<u64>, (DMatrix<f64>, DMatrix<f64>)>>,
}

impl<'a> DenseSolver<'a> {
    pub fn new(params: &'a DenseCdeParams, options: SolveOptions) -> Self {
        let use_matrices = match options.stepper {
            Stepper::Exponential => true,
            Stepper::Action => false,
            Stepper::Auto => params.state_dim() <= AUTO_EXPONENTIAL_MAX_DIM,
        };
        let cache = (use_matrices && options.cache_transitions).then(BTreeMap::new);
        Self {
            params,
            use_matrices,
            cache,
        }
    }

    fn transition(&mut self, d_omega: &[f64], segment: usize) -> (DMatrix<f64>, DMatrix<f64>) {
        let key: Option<Vec<u64>> = self
            .cache
            .as_ref()
            .map(|_| d_omega.iter().map(|x| x.to_bits()).collect());
        if let (Some(cache), Some(key)) = (self.cache.as_ref(), key.as_ref()) {
            if let Some(hit) = cache.get(key) {
                return hit.clone();
            }
        }
        let m = self.params.combine(d_omega);
        let (e, phi) = expm_phi1(&m);
        let size = norm1(&e);
        if size > MULTIPLIER_WARN {
            log::warn!("segment {segment}: transition multiplier has 1-norm {size:.3e}");
        }
        if let (Some(cache), Some(key)) = (self.cache.as_mut(), key) {
            cache.insert(key, (e.clone(), phi.clone()));
        }
        (e, phi)
    }

    pub fn solve(&mut self, omega: &Path, xi: &Path, x0: &[f64]) -> Result<Trajectory> {
        let p = self.params;
        p.check_inputs(omega, xi, x0)?;
        let n = p.state_dim();
        let steps = omega.grid_steps();
        let mut z = &p.c * DVector::from_column_slice(x0);
        let mut traj = Trajectory::with_capacity(n, steps + 1);
        traj.push(z.as_slice());
        let mut dw = vec![0.0; p.d_omega()];
        let mut dxi = DVector::zeros(p.d_xi());
        let mut forcing = DVector::zeros(n);
        let mut next = DVector::zeros(n);
        for k in 0..steps {
            omega.increment_into(k, &mut dw);
            xi.increment_into(k, dxi.as_mut_slice());
            forcing.gemv(1.0, &p.b, &dxi, 0.0);
            if self.use_matrices {
                let (e, phi) = self.transition(&dw, k);
                next.gemv(1.0, &e, &z, 0.0);
                next.gemv(1.0, &phi, &forcing, 1.0);
                core::mem::swap(&mut z, &mut next);
            } else {
                let m = p.combine(&dw);
                let growth = norm1(&m);
                if growth > libm::log(MULTIPLIER_WARN) {
                    log::warn!("segment {k}: generator 1-norm {growth:.3e} allows growth beyond {MULTIPLIER_WARN:e}");
                }
                affine_exp_action(&m, &forcing, &mut z);
            }
            if z.iter().any(|x| !x.is_finite()) {
                return Err(Error::Overflow { segment: k });
            }
            traj.push(z.as_slice());
        }
        Ok(traj)
    }
}

/// Exact zero-order-hold solve of a dense linear CDE on the drivers' grid.
pub fn solve_dense(params: &DenseCdeParams, omega: &Path, xi: &Path, x0: &[f64]) -> Result<Trajectory> {
    solve_dense_with(params, omega, xi, x0, SolveOptions::default())
}

pub fn solve_dense_with(
    params: &DenseCdeParams,
    omega: &Path,
    xi: &Path,
    x0: &[f64],
    options: SolveOptions,
) -> Result<Trajectory> {
    DenseSolver::new(params, options).solve(omega, xi, x0)
}

/// Explicit Euler with `substeps` equal substeps per segment (first order).
/// Returns states at the original grid points.
pub fn solve_dense_euler(
    params: &DenseCdeParams,
    omega: &Path,
    xi: &Path,
    x0: &[f64],
    substeps: usize,
) -> Result<Trajectory> {
    params.check_inputs(omega, xi, x0)?;
    let substeps = substeps.max(1);
    let n = params.state_dim();
    let mut z = &params.c * DVector::from_column_slice(x0);
    let mut traj = Trajectory::with_capacity(n, omega.grid_steps() + 1);
    traj.push(z.as_slice());
    let mut dw = vec![0.0; params.d_omega()];
    let mut dxi = DVector::zeros(params.d_xi());
    let h = 1.0 / substeps as f64;
    for k in 0..omega.grid_steps() {
        omega.increment_into(k, &mut dw);
        xi.increment_into(k, dxi.as_mut_slice());
        let m = params.combine(&dw) * h;
        let forcing = &params.b * &dxi * h;
        for _ in 0..substeps {
            let dz = &m * &z + &forcing;
            z += dz;
        }
        if z.iter().any(|x| !x.is_finite()) {
            return Err(Error::Overflow { segment: k });
        }
        traj.push(z.as_slice());
    }
    Ok(traj)
}

/// Zero-order-hold solve with diagonal vector fields (scalar exponentials).
pub fn solve_diagonal(params: &DiagonalCdeParams, omega: &Path, xi: &Path, x0: &[f64]) -> Result<Trajectory> {
    params.check_inputs(omega, xi, x0)?;
    let n = params.state_dim();
    let mut z = &params.c * DVector::from_column_slice(x0);
    let mut traj = Trajectory::with_capacity(n, omega.grid_steps() + 1);
    traj.push(z.as_slice());
    let mut dw = DVector::zeros(params.d_omega());
    let mut dxi = DVector::zeros(params.d_xi());
    let mut rate = DVector::zeros(n);
    let mut forcing = DVector::zeros(n);
    for k in 0..omega.grid_steps() {
        omega.increment_into(k, dw.as_mut_slice());
        xi.increment_into(k, dxi.as_mut_slice());
        rate.gemv(1.0, &params.v_mat, &dw, 0.0);
        forcing.gemv(1.0, &params.b, &dxi, 0.0);
        for i in 0..n {
            let m = rate[i];
            z[i] = libm::exp(m) * z[i] + phi1_scalar(m) * forcing[i];
        }
        if z.iter().any(|x| !x.is_finite()) {
            return Err(Error::Overflow { segment: k });
        }
        traj.push(z.as_slice());
    }
    Ok(traj)
}
