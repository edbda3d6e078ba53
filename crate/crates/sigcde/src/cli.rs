use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use sigcde_core::cde::{solve_dense_with, solve_diagonal, SolveOptions, Stepper};
use sigcde_core::experiments::{gen_dataset, train_model, DatasetSpec};
use sigcde_core::features::{kernel_goursat, KernelInput};
use sigcde_core::signature::{signature, signature_interval};
use sigcde_core::Path;

use crate::io::{read_json, read_path, trajectory_to_binary, write_dataset, CdeParams, CdeParamsJson, PathJson, TensorJson};
use crate::suite::{load_dataset, run_manifest, write_report, DatasetSource, Manifest, RunRecord, RunSpec};

#[derive(Debug, Parser)]
#[command(name = "sigcde", version, about = "Signatures, linear CDEs and selective state-space experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModelArg {
    Dense,
    Diagonal,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StepperArg {
    Auto,
    Exponential,
    Action,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a random-walk dataset with iterated-integral targets.
    GenData {
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        samples: usize,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Truncated signature of a path file (JSON or binary).
    Sig {
        #[arg(long)]
        path: PathBuf,
        #[arg(long)]
        depth: usize,
        /// Restrict to `[s, t]`, snapped to the grid.
        #[arg(long, num_args = 2, value_names = ["S", "T"])]
        interval: Option<Vec<f64>>,
    },
    /// Solve a linear CDE from a parameter file.
    Solve {
        #[arg(long, value_enum)]
        model: ModelArg,
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        omega: PathBuf,
        /// Defaults to the ω path.
        #[arg(long)]
        xi: Option<PathBuf>,
        /// Comma-separated initial condition coefficients.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Vec<f64>,
        #[arg(long, value_enum, default_value_t = StepperArg::Auto)]
        stepper: StepperArg,
        /// Trajectory output; binary grid format when the extension is `bin`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train one configuration and print its record.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Also write the loss curve as CSV.
        #[arg(long)]
        curves: Option<PathBuf>,
    },
    /// Run a manifest; exits with status 1 when a threshold fails.
    Suite {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value = "suite-out")]
        out: PathBuf,
    },
    /// Signature-kernel value of a pair of paths.
    Kernel {
        #[arg(long)]
        pair: PathBuf,
    },
}

/// `train --config` file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainFile {
    pub dataset: DatasetSource,
    pub run: RunSpec,
}

/// `kernel --pair` file. ω = ξ = the path, with a shared initial vector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairFile {
    pub x: PathJson,
    pub y: PathJson,
    #[serde(default = "default_refinement")]
    pub refinement: usize,
    #[serde(default = "default_x0")]
    pub x0: Vec<f64>,
}

fn default_refinement() -> usize {
    4
}

fn default_x0() -> Vec<f64> {
    vec![1.0]
}

#[derive(Debug, Serialize)]
struct TrajectoryJson<'a> {
    dim: usize,
    len: usize,
    values: &'a [f64],
    readout: Vec<f64>,
}

fn base_dir(file: &std::path::Path) -> PathBuf {
    file.parent().map(PathBuf::from).unwrap_or_default()
}

pub fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::GenData { dim, samples, steps, seed, out } => {
            let data = gen_dataset(&DatasetSpec {
                num_samples: samples,
                dim,
                num_steps: steps,
                seed,
            })?;
            write_dataset(&out, &data)?;
            eprintln!("wrote {} samples ({} train) to {}", data.len(), data.num_train, out.display());
        }
        Command::Sig { path, depth, interval } => {
            let p = read_path(&path)?;
            let sig = match interval.as_deref() {
                Some([s, t]) => signature_interval(&p, depth, *s, *t)?,
                Some(_) => bail!("--interval takes two values"),
                None => signature(&p, depth),
            };
            println!("{}", serde_json::to_string(&TensorJson::from(&sig))?);
        }
        Command::Solve { model, params, omega, xi, x0, stepper, out } => {
            let json: CdeParamsJson = read_json(&params)?;
            let omega_path = read_path(&omega)?;
            let xi_path: Path = match xi {
                Some(f) => read_path(&f)?,
                None => omega_path.clone(),
            };
            let opts = SolveOptions {
                stepper: match stepper {
                    StepperArg::Auto => Stepper::Auto,
                    StepperArg::Exponential => Stepper::Exponential,
                    StepperArg::Action => Stepper::Action,
                },
                ..SolveOptions::default()
            };
            let (traj, v) = match (model, json.to_params()?) {
                (ModelArg::Dense, CdeParams::Dense(p)) => (solve_dense_with(&p, &omega_path, &xi_path, &x0, opts)?, p.v),
                (ModelArg::Diagonal, CdeParams::Diagonal(p)) => (solve_diagonal(&p, &omega_path, &xi_path, &x0)?, p.v),
                (m, _) => bail!("parameter file does not hold {m:?} parameters"),
            };
            match out {
                Some(f) if f.extension().is_some_and(|e| e == "bin") => {
                    std::fs::write(&f, trajectory_to_binary(&traj)?).with_context(|| format!("writing {}", f.display()))?
                }
                other => {
                    let body = serde_json::to_string(&TrajectoryJson {
                        dim: traj.dim(),
                        len: traj.len(),
                        values: traj.values(),
                        readout: traj.readout(&v),
                    })?;
                    match other {
                        Some(f) => std::fs::write(&f, body).with_context(|| format!("writing {}", f.display()))?,
                        None => println!("{body}"),
                    }
                }
            }
        }
        Command::Train { config, curves } => {
            let file: TrainFile = read_json(&config)?;
            let data = load_dataset(&file.dataset, &base_dir(&config))?;
            let (name, cfg) = file.run.resolve()?;
            let out = train_model(&data, &cfg)?;
            let record = RunRecord::from_outcome(name, &out, &data);
            if let Some(f) = curves {
                let report = crate::suite::Report {
                    records: vec![record.clone()],
                    thresholds: Vec::new(),
                    wall_seconds: Vec::new(),
                };
                std::fs::write(&f, report.curves_csv())?;
            }
            println!("{}", serde_json::to_string(&record)?);
        }
        Command::Suite { manifest, out } => {
            let m: Manifest = read_json(&manifest)?;
            let report = run_manifest(&m, &base_dir(&manifest))?;
            write_report(&report, &out)?;
            for t in &report.thresholds {
                println!("{} {}", if t.passed { "PASS" } else { "FAIL" }, t.detail);
            }
            if !report.passed() {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Kernel { pair } => {
            let file: PairFile = read_json(&pair)?;
            let x = Path::try_from(file.x)?;
            let y = Path::try_from(file.y)?;
            let surface = kernel_goursat(
                KernelInput { omega: &x, xi: &x, x0: &file.x0 },
                KernelInput { omega: &y, xi: &y, x0: &file.x0 },
                file.refinement,
            )?;
            println!("{}", serde_json::json!({ "kernel": surface.terminal(), "rows": surface.rows, "cols": surface.cols }));
        }
    }
    Ok(ExitCode::SUCCESS)
}
