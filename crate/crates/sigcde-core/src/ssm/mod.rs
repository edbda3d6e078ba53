//! Structured and selective state-space recurrences (S4, S6, S5, gated
//! linear attention) together with the driving paths that identify each of
//! them with a linear CDE.

mod gates;
mod layers;
mod scan;

pub use gates::{make_gates, relu_split, sigmoid, softplus, Gate, GateKind, GateParams, Gates};
pub use layers::{
    gla_forward, s4_forward, s5_forward, s6_forward, GlaParams, InputRule, S4Params, S5Params,
    S6Output, S6Params,
};
pub use scan::{compose, parallel_scan, ScanElement, ScanSchedule};
