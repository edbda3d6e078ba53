use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_finite, check_len, Error, Result};
use crate::path::Path;

/// `dZ = sum_i A_i Z dω^i + B dξ`, `Z_0 = C x0`, read out through `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseCdeParams {
    pub a: Vec<DMatrix<f64>>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub v: DVector<f64>,
}

impl DenseCdeParams {
    pub fn new(
        a: Vec<DMatrix<f64>>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        v: DVector<f64>,
    ) -> Result<Self> {
        let n = b.nrows();
        for ai in &a {
            check_len("A_i rows", n, ai.nrows())?;
            check_len("A_i columns", n, ai.ncols())?;
            check_finite("A_i", ai.as_slice())?;
        }
        check_len("C rows", n, c.nrows())?;
        check_len("readout length", n, v.len())?;
        check_finite("B", b.as_slice())?;
        check_finite("C", c.as_slice())?;
        check_finite("readout", v.as_slice())?;
        Ok(Self { a, b, c, v })
    }

    pub fn state_dim(&self) -> usize {
        self.b.nrows()
    }

    pub fn d_omega(&self) -> usize {
        self.a.len()
    }

    pub fn d_xi(&self) -> usize {
        self.b.ncols()
    }

    pub fn d0(&self) -> usize {
        self.c.ncols()
    }

    /// `sum_i A_i w_i`.
    pub fn combine(&self, w: &[f64]) -> DMatrix<f64> {
        let n = self.state_dim();
        let mut m = DMatrix::zeros(n, n);
        for (ai, &wi) in self.a.iter().zip(w) {
            if wi != 0.0 {
                for (x, y) in m.as_mut_slice().iter_mut().zip(ai.as_slice()) {
                    *x += wi * y;
                }
            }
        }
        m
    }

    pub(crate) fn check_inputs(&self, omega: &Path, xi: &Path, x0: &[f64]) -> Result<()> {
        check_inputs(self.d_omega(), self.d_xi(), self.d0(), omega, xi, x0)
    }
}

/// Diagonal vector fields: `A_i = diag(V[:, i])`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalCdeParams {
    /// `N x d_ω`.
    pub v_mat: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub v: DVector<f64>,
}

impl DiagonalCdeParams {
    pub fn new(
        v_mat: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        v: DVector<f64>,
    ) -> Result<Self> {
        let n = v_mat.nrows();
        check_len("B rows", n, b.nrows())?;
        check_len("C rows", n, c.nrows())?;
        check_len("readout length", n, v.len())?;
        check_finite("V", v_mat.as_slice())?;
        check_finite("B", b.as_slice())?;
        check_finite("C", c.as_slice())?;
        Ok(Self { v_mat, b, c, v })
    }

    /// Rates `V = -r 1^T`, the shared-decay form of selective layers.
    pub fn shared_decay(rates: &[f64], d_omega: usize, b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        if rates.iter().any(|&r| r < 0.0) {
            return Err(Error::Invalid("decay rates must be non-negative".into()));
        }
        let n = rates.len();
        let v_mat = DMatrix::from_fn(n, d_omega, |i, _| -rates[i]);
        Self::new(v_mat, b, c, DVector::zeros(n))
    }

    pub fn state_dim(&self) -> usize {
        self.v_mat.nrows()
    }

    pub fn d_omega(&self) -> usize {
        self.v_mat.ncols()
    }

    pub fn d_xi(&self) -> usize {
        self.b.ncols()
    }

    pub fn d0(&self) -> usize {
        self.c.ncols()
    }

    pub fn to_dense(&self) -> DenseCdeParams {
        let a = (0..self.d_omega())
            .map(|i| DMatrix::from_diagonal(&self.v_mat.column(i).into_owned()))
            .collect();
        DenseCdeParams {
            a,
            b: self.b.clone(),
            c: self.c.clone(),
            v: self.v.clone(),
        }
    }

    pub(crate) fn check_inputs(&self, omega: &Path, xi: &Path, x0: &[f64]) -> Result<()> {
        check_inputs(self.d_omega(), self.d_xi(), self.d0(), omega, xi, x0)
    }
}

fn check_inputs(d_omega: usize, d_xi: usize, d0: usize, omega: &Path, xi: &Path, x0: &[f64]) -> Result<()> {
    check_len("ω channels", d_omega, omega.channels())?;
    check_len("ξ channels", d_xi, xi.channels())?;
    check_len("ξ grid steps", omega.grid_steps(), xi.grid_steps())?;
    check_len("x0 length", d0, x0.len())?;
    check_finite("x0", x0)
}

/// States at every grid point, row-major `(L+1) x N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    dim: usize,
    values: Vec<f64>,
}

impl Trajectory {
    pub(crate) fn with_capacity(dim: usize, points: usize) -> Self {
        Self {
            dim,
            values: Vec::with_capacity(dim * points),
        }
    }

    pub fn from_values(dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || values.len() % dim != 0 {
            return Err(Error::Invalid("trajectory length is not a multiple of the state dimension".into()));
        }
        Ok(Self { dim, values })
    }

    pub(crate) fn push(&mut self, state: &[f64]) {
        self.values.extend_from_slice(state);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.values.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn final_state(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn readout(&self, v: &DVector<f64>) -> Vec<f64> {
        (0..self.len())
            .map(|k| self.state(k).iter().zip(v.iter()).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn max_abs_diff(&self, other: &Trajectory) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs()))
    }
}
