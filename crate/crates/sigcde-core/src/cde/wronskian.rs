use nalgebra::DMatrix;

use super::params::DenseCdeParams;
use crate::error::{check_len, Result};
use crate::linalg::expm;
use crate::path::Path;

/// Fundamental matrix `W_{s,t}` of the homogeneous system, with `s` and `t`
/// snapped to the grid. For `s > t` this is the inverse flow `W_{t,s}^{-1}`.
pub fn wronskian(params: &DenseCdeParams, omega: &Path, s: f64, t: f64) -> Result<DMatrix<f64>> {
    check_len("ω channels", params.d_omega(), omega.channels())?;
    let (i, j) = (omega.snap(s)?, omega.snap(t)?);
    let n = params.state_dim();
    let mut w = DMatrix::identity(n, n);
    if i <= j {
        for k in i..j {
            let e = expm(&params.combine(&omega.increment(k)));
            w = e * w;
        }
    } else {
        for k in j..i {
            let e = expm(&(-params.combine(&omega.increment(k))));
            w *= e;
        }
    }
    Ok(w)
}

/// `det W_{s,t} = exp(sum_i tr(A_i) (ω^i_t - ω^i_s))`.
pub fn liouville_determinant(params: &DenseCdeParams, omega: &Path, s: f64, t: f64) -> Result<f64> {
    check_len("ω channels", params.d_omega(), omega.channels())?;
    let (i, j) = (omega.snap(s)?, omega.snap(t)?);
    let exponent: f64 = params
        .a
        .iter()
        .enumerate()
        .map(|(c, a)| a.trace() * (omega.row(j)[c] - omega.row(i)[c]))
        .sum();
    Ok(libm::exp(exponent))
}
