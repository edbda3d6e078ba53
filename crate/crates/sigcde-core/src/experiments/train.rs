use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::adam::Adam;
use super::dataset::Dataset;
use super::model::{ModelKind, ModelShape, SequenceModel, Workspace};
use crate::cde::{DenseSolver, SolveOptions};
use crate::error::{Error, Result};
use crate::features::{fit_readout, sample_lecun, SeededInit};
use crate::path::Path;

/// Losses above this abort a run as diverged.
pub const DIVERGENCE_LOSS: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub model: ModelKind,
    pub hidden: usize,
    pub state: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub steps: usize,
    pub seed: u64,
    pub log_every: usize,
    /// Test samples used for the periodic evaluation; the final evaluation
    /// uses the whole test split.
    pub eval_samples: usize,
    /// Ridge strength for the linear NCDE readout; `None` picks the default.
    pub ridge: Option<f64>,
}

impl TrainConfig {
    /// Hidden 256, state 256, batch 32, learning rate 3e-5.
    pub fn reference(model: ModelKind, steps: usize) -> Self {
        Self {
            model,
            hidden: 256,
            state: 256,
            batch_size: 32,
            learning_rate: 3e-5,
            steps,
            seed: 0,
            log_every: 100,
            eval_samples: 256,
            ridge: None,
        }
    }

    /// Reduced configuration sized for a single CPU core.
    pub fn desk(model: ModelKind) -> Self {
        let (state, steps, lr) = match model {
            ModelKind::S5 | ModelKind::S5Stacked => (64, 2000, 3e-3),
            ModelKind::Mamba | ModelKind::MambaStacked => (16, 2000, 3e-3),
            ModelKind::LinearNcde => (64, 0, 0.0),
        };
        Self {
            model,
            hidden: 64,
            state,
            batch_size: 32,
            learning_rate: lr,
            steps,
            seed: 0,
            log_every: 100,
            eval_samples: 256,
            ridge: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRow {
    pub step: usize,
    /// Mean minibatch loss since the previous row (full train MSE for the
    /// closed-form baseline).
    pub train_mse: f64,
    pub test_mse: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RunStatus {
    Completed,
    Diverged { step: usize, loss: f64 },
    NonFiniteGradient { step: usize },
}

impl RunStatus {
    pub fn name(&self) -> &'static str {
        match self {
            RunStatus::Completed => "completed",
            RunStatus::Diverged { .. } => "diverged",
            RunStatus::NonFiniteGradient { .. } => "non-finite-gradient",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub config: TrainConfig,
    pub log: Vec<LossRow>,
    pub train_mse: f64,
    pub test_mse: f64,
    pub test_target_variance: f64,
    pub status: RunStatus,
}

impl TrainOutcome {
    /// Test MSE divided by the variance of the test targets.
    pub fn relative_test_mse(&self) -> f64 {
        if self.test_target_variance > 0.0 {
            self.test_mse / self.test_target_variance
        } else {
            self.test_mse
        }
    }
}

fn mean_sq(preds: &[f64], targets: &[f64]) -> f64 {
    let n = preds.len().max(1) as f64;
    preds.iter().zip(targets).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / n
}

fn evaluate(model: &SequenceModel, data: &Dataset, idx: core::ops::Range<usize>, ws: &mut Workspace) -> Result<f64> {
    let mut preds = Vec::with_capacity(idx.len());
    for i in idx.clone() {
        preds.push(model.predict(data.sample(i), ws)?);
    }
    Ok(mean_sq(&preds, &data.targets[idx]))
}

/// Trains `config.model` on `data`. The linear NCDE baseline is solved in
/// closed form instead.
pub fn train_model(data: &Dataset, config: &TrainConfig) -> Result<TrainOutcome> {
    if config.model == ModelKind::LinearNcde {
        return linear_ncde_baseline(data, config);
    }
    if data.num_train == 0 || data.num_test() == 0 {
        return Err(Error::Invalid("both splits must be non-empty".into()));
    }
    if config.batch_size == 0 || config.log_every == 0 {
        return Err(Error::Invalid("batch size and logging interval must be positive".into()));
    }
    let shape = ModelShape {
        kind: config.model,
        input_dim: data.spec.dim,
        hidden: config.hidden,
        state: config.state,
    };
    let mut model = SequenceModel::new(shape, config.seed)?;
    let train = data.train_indices();
    let n = train.len() as f64;
    model.target_mean = data.targets[train.clone()].iter().sum::<f64>() / n;
    model.target_scale = libm::sqrt(data.target_variance(train.clone())).max(f64::MIN_POSITIVE);
    let mut adam = Adam::new(config.learning_rate, model.num_params());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut ws = Workspace::default();
    let mut grads = vec![0.0; model.num_params()];
    let mut sample_grad = vec![0.0; model.num_params()];
    let eval_end = data.num_train + config.eval_samples.min(data.num_test());
    let mut log = Vec::new();
    let mut window = 0.0;
    let mut window_len = 0usize;
    let mut status = RunStatus::Completed;
    for step in 0..config.steps {
        grads.iter_mut().for_each(|g| *g = 0.0);
        let mut loss = 0.0;
        let b = config.batch_size as f64;
        for _ in 0..config.batch_size {
            let i = rng.random_range(train.clone());
            let target = data.targets[i];
            sample_grad.iter_mut().for_each(|g| *g = 0.0);
            let pred = model.accumulate_gradient(data.sample(i), 1.0, &mut sample_grad, &mut ws)?;
            let scale = 2.0 * (pred - target) / b;
            for (g, s) in grads.iter_mut().zip(&sample_grad) {
                *g += scale * s;
            }
            loss += (pred - target) * (pred - target) / b;
        }
        if !loss.is_finite() || loss > DIVERGENCE_LOSS {
            log::warn!("run diverged at step {step} with loss {loss}");
            status = RunStatus::Diverged { step, loss };
            break;
        }
        if let Err(Error::NonFiniteGradient { step }) = adam.step(&mut model.params, &grads, step) {
            log::warn!("non-finite gradient at step {step}");
            status = RunStatus::NonFiniteGradient { step };
            break;
        }
        window += loss;
        window_len += 1;
        if (step + 1) % config.log_every == 0 || step + 1 == config.steps {
            let test_mse = evaluate(&model, data, data.num_train..eval_end, &mut ws)?;
            log::info!("{} step {} train {:.3e} test {:.3e}", config.model.name(), step + 1, window / window_len as f64, test_mse);
            log.push(LossRow {
                step: step + 1,
                train_mse: window / window_len as f64,
                test_mse,
            });
            window = 0.0;
            window_len = 0;
        }
    }
    let (train_mse, test_mse) = if status == RunStatus::Completed {
        let train_end = config.eval_samples.max(1).min(data.num_train);
        (
            evaluate(&model, data, 0..train_end, &mut ws)?,
            evaluate(&model, data, data.test_indices(), &mut ws)?,
        )
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(TrainOutcome {
        config: config.clone(),
        log,
        train_mse,
        test_mse,
        test_target_variance: data.target_variance(data.test_indices()),
        status,
    })
}

/// `ω = ξ = (t, X - X_0)` with increments snapped back onto the integer
/// lattice the dataset was generated on, so that repeated increments share
/// cached transitions bit for bit.
fn lattice_path(data: &Dataset, i: usize) -> Result<Path> {
    let d = data.spec.dim;
    let steps = data.spec.num_steps;
    let s = data.normalization.scale();
    let x = data.sample(i);
    let mut values = vec![0.0; (steps + 1) * d];
    for k in 0..steps {
        for c in 0..d {
            let inc = x[(k + 1) * d + c] - x[k * d + c];
            let snapped = if s > 0.0 {
                let q = libm::round(inc / s);
                if (inc / s - q).abs() < 1e-6 {
                    q * s
                } else {
                    inc
                }
            } else {
                inc
            };
            values[(k + 1) * d + c] = values[k * d + c] + snapped;
        }
    }
    Ok(Path::new(steps, d, values)?.time_augment(false))
}

/// Random linear NCDE features (`A_i ~ N(0, 1/N)`) with a ridge readout.
pub fn linear_ncde_baseline(data: &Dataset, config: &TrainConfig) -> Result<TrainOutcome> {
    let d = data.spec.dim;
    let init = SeededInit {
        seed: config.seed,
        n: config.hidden,
        d0: d + 1,
        d_omega: d + 1,
        d_xi: d + 1,
    };
    let params = sample_lecun(&init)?;
    let mut solver = DenseSolver::new(&params, SolveOptions::default());
    let n = config.hidden;
    let mut features = DMatrix::zeros(data.len(), n + 1);
    for i in 0..data.len() {
        let path = lattice_path(data, i)?;
        let mut x0 = vec![1.0];
        x0.extend_from_slice(&data.sample(i)[..d]);
        let traj = solver.solve(&path, &path, &x0)?;
        for (j, v) in traj.final_state().iter().enumerate() {
            features[(i, j)] = *v;
        }
        features[(i, n)] = 1.0;
    }
    let train = data.train_indices();
    let tr = features.rows(0, train.len()).into_owned();
    let y = DVector::from_column_slice(&data.targets[train.clone()]);
    let readout = fit_readout(&tr, &y, config.ridge)?;
    let preds = readout.predict(&features);
    let train_mse = mean_sq(&preds.as_slice()[train.clone()], &data.targets[train]);
    let test = data.test_indices();
    let test_mse = mean_sq(&preds.as_slice()[test.clone()], &data.targets[test]);
    Ok(TrainOutcome {
        config: config.clone(),
        log: vec![LossRow { step: 0, train_mse, test_mse }],
        train_mse,
        test_mse,
        test_target_variance: data.target_variance(data.test_indices()),
        status: RunStatus::Completed,
    })
}
