//! Linear controlled differential equations driven by piecewise-linear
//! paths: zero-order-hold solvers, Wronskians, truncated signature
//! expansions and the tensor-algebra realization.

mod expansion;
mod params;
mod realization;
mod solve;
mod stability;
mod wronskian;

pub use expansion::{exp_tail, solve_via_signature, SignatureExpansion};
pub use params::{DenseCdeParams, DiagonalCdeParams, Trajectory};
pub use realization::{
    tensor_algebra_realization, RealizationAlphabet, RealizationReadout, REALIZATION_MAX_STATES,
};
pub use solve::{
    solve_dense, solve_dense_euler, solve_dense_with, solve_diagonal, DenseSolver, SolveOptions,
    Stepper, AUTO_EXPONENTIAL_MAX_DIM, MULTIPLIER_WARN,
};
pub use stability::{stability_check, StabilityReport, StabilityViolation};
pub use wronskian::{liouville_determinant, wronskian};
