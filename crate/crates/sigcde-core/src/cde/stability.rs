use alloc::vec::Vec;

use nalgebra::DVector;

use super::params::DiagonalCdeParams;
use crate::error::{check_len, Result};
use crate::path::Path;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityViolation {
    pub segment: usize,
    pub state: usize,
    pub multiplier: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub min_multiplier: f64,
    pub max_multiplier: f64,
    pub violations: Vec<StabilityViolation>,
}

impl StabilityReport {
    pub fn is_stable(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks that every segment multiplier `exp(V Δω)` lies in `(0, 1]`,
/// i.e. `V ω̇ <= 0` on every segment.
pub fn stability_check(params: &DiagonalCdeParams, omega: &Path) -> Result<StabilityReport> {
    check_len("ω channels", params.d_omega(), omega.channels())?;
    let mut report = StabilityReport {
        min_multiplier: f64::INFINITY,
        max_multiplier: f64::NEG_INFINITY,
        violations: Vec::new(),
    };
    let mut dw = DVector::zeros(params.d_omega());
    for k in 0..omega.grid_steps() {
        omega.increment_into(k, dw.as_mut_slice());
        let rate = &params.v_mat * &dw;
        for (state, &r) in rate.iter().enumerate() {
            let multiplier = libm::exp(r);
            report.min_multiplier = report.min_multiplier.min(multiplier);
            report.max_multiplier = report.max_multiplier.max(multiplier);
            if r > 0.0 || multiplier <= 0.0 {
                report.violations.push(StabilityViolation {
                    segment: k,
                    state,
                    multiplier,
                });
            }
        }
    }
    Ok(report)
}
