//! Batch evaluation across independent paths, sequential or with rayon.
//! Each item is computed by the same sequential code, so both schedules
//! produce identical values.

use rayon::prelude::*;

use sigcde_core::cde::{DenseCdeParams, DenseSolver, SolveOptions, Trajectory};
use sigcde_core::experiments::{Dataset, SequenceModel, Workspace};
use sigcde_core::signature::{signature, TruncatedTensor};
use sigcde_core::{Path, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Schedule {
    Sequential,
    #[default]
    Parallel,
}

pub fn signatures(paths: &[Path], depth: usize, schedule: Schedule) -> Vec<TruncatedTensor> {
    match schedule {
        Schedule::Sequential => paths.iter().map(|p| signature(p, depth)).collect(),
        Schedule::Parallel => paths.par_iter().map(|p| signature(p, depth)).collect(),
    }
}

/// Solves with `ω = ξ = path` and a shared `x0`. Each worker keeps its own
/// transition cache.
pub fn solve_paths(
    params: &DenseCdeParams,
    paths: &[Path],
    x0: &[f64],
    options: SolveOptions,
    schedule: Schedule,
) -> Result<Vec<Trajectory>> {
    match schedule {
        Schedule::Sequential => {
            let mut solver = DenseSolver::new(params, options);
            paths.iter().map(|p| solver.solve(p, p, x0)).collect()
        }
        Schedule::Parallel => paths
            .par_iter()
            .map_init(|| DenseSolver::new(params, options), |solver, p| solver.solve(p, p, x0))
            .collect(),
    }
}

/// Model predictions for samples `idx` of `data`.
pub fn predict(
    model: &SequenceModel,
    data: &Dataset,
    idx: std::ops::Range<usize>,
    schedule: Schedule,
) -> Result<Vec<f64>> {
    match schedule {
        Schedule::Sequential => {
            let mut ws = Workspace::default();
            idx.map(|i| model.predict(data.sample(i), &mut ws)).collect()
        }
        Schedule::Parallel => idx
            .into_par_iter()
            .map_init(Workspace::default, |ws, i| model.predict(data.sample(i), ws))
            .collect(),
    }
}
