//! Manifest-driven experiment runs with JSON-lines results, CSV loss curves
//! and threshold checks.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path as FsPath, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use sigcde_core::experiments::{gen_dataset, train_model, Dataset, ModelKind, RunStatus, TrainConfig, TrainOutcome};

use crate::io::{read_dataset, DatasetSpecJson};

pub const CSV_HEADER: &str = "model,step,train_mse,test_mse";

/// Where the suite gets its data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSource {
    Generate(DatasetSpecJson),
    /// Dataset file written by `gen-data`; relative to the manifest.
    File(PathBuf),
}

/// Training configuration as written in manifests. Missing fields take the
/// desk-scale defaults for the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_every: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ridge: Option<f64>,
}

impl RunSpec {
    pub fn new(model: ModelKind) -> Self {
        Self {
            model: model.name().into(),
            name: None,
            hidden: None,
            state: None,
            batch_size: None,
            learning_rate: None,
            steps: None,
            seed: None,
            log_every: None,
            eval_samples: None,
            ridge: None,
        }
    }

    pub fn resolve(&self) -> Result<(String, TrainConfig)> {
        let Some(kind) = ModelKind::parse(&self.model) else {
            bail!("unknown model kind {:?}", self.model);
        };
        let mut c = TrainConfig::desk(kind);
        c.hidden = self.hidden.unwrap_or(c.hidden);
        c.state = self.state.unwrap_or(c.state);
        c.batch_size = self.batch_size.unwrap_or(c.batch_size);
        c.learning_rate = self.learning_rate.unwrap_or(c.learning_rate);
        c.steps = self.steps.unwrap_or(c.steps);
        c.seed = self.seed.unwrap_or(c.seed);
        c.log_every = self.log_every.unwrap_or(c.log_every);
        c.eval_samples = self.eval_samples.unwrap_or(c.eval_samples);
        c.ridge = self.ridge.or(c.ridge);
        if c.hidden == 0 || c.state == 0 || c.batch_size == 0 || c.log_every == 0 {
            bail!("run {:?}: sizes must be positive", self.model);
        }
        let name = self.name.clone().unwrap_or_else(|| kind.name().to_string());
        Ok((name, c))
    }
}

/// Acceptance thresholds on relative test MSE (test MSE over test-target variance).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Threshold {
    MaxRelativeMse { run: String, value: f64 },
    MinRelativeMse { run: String, value: f64 },
    /// Final test MSE strictly increasing along `runs`.
    Ordering { runs: Vec<String> },
    /// `worse` has at least `factor` times the final test MSE of `better`.
    Improvement { better: String, worse: String, factor: f64 },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(default)]
    pub dataset: Option<DatasetSource>,
    #[serde(default)]
    pub runs: Vec<RunSpec>,
    #[serde(default)]
    pub thresholds: Vec<Threshold>,
}

impl Manifest {
    /// The five architectures at desk scale on one dataset, with the
    /// ordering thresholds.
    pub fn desk(dim: usize, num_samples: usize, seed: u64) -> Self {
        let runs = ModelKind::ALL.iter().map(|k| RunSpec::new(*k)).collect();
        Self {
            dataset: Some(DatasetSource::Generate(DatasetSpecJson {
                num_samples,
                dim,
                num_steps: 100,
                seed,
            })),
            runs,
            thresholds: vec![
                Threshold::Ordering {
                    runs: vec!["linear-ncde".into(), "mamba-stacked".into(), "mamba".into()],
                },
                Threshold::MinRelativeMse { run: "s5".into(), value: 0.5 },
                Threshold::MinRelativeMse { run: "s5-stacked".into(), value: 0.5 },
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoggedLoss {
    pub step: usize,
    pub train_mse: f64,
    pub test_mse: f64,
}

/// Canonical description of a run, hashed to key its results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub model: String,
    pub hidden: usize,
    pub state: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub steps: usize,
    pub seed: u64,
    pub log_every: usize,
    pub eval_samples: usize,
    pub ridge: Option<f64>,
    pub dataset: DatasetSpecJson,
    pub normalization: String,
    pub train_fraction: f64,
}

impl ResolvedConfig {
    fn new(c: &TrainConfig, data: &Dataset) -> Self {
        Self {
            model: c.model.name().into(),
            hidden: c.hidden,
            state: c.state,
            batch_size: c.batch_size,
            learning_rate: c.learning_rate,
            steps: c.steps,
            seed: c.seed,
            log_every: c.log_every,
            eval_samples: c.eval_samples,
            ridge: c.ridge,
            dataset: data.spec.into(),
            normalization: "global".into(),
            train_fraction: data.num_train as f64 / data.len() as f64,
        }
    }

    /// First 16 hex digits of SHA-256 over the JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serialises");
        hex::encode(&Sha256::digest(&json)[..8])
    }
}

/// One line of `results.jsonl`. Wall time is kept out so reruns are byte-identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub name: String,
    pub config_hash: String,
    pub config: ResolvedConfig,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub status_step: Option<usize>,
    pub losses: Vec<LoggedLoss>,
    pub final_train_mse: Option<f64>,
    pub final_test_mse: Option<f64>,
    pub test_target_variance: f64,
    pub relative_test_mse: Option<f64>,
}

impl RunRecord {
    pub fn from_outcome(name: String, out: &TrainOutcome, data: &Dataset) -> Self {
        let config = ResolvedConfig::new(&out.config, data);
        let finite = |x: f64| x.is_finite().then_some(x);
        let status_step = match out.status {
            RunStatus::Completed => None,
            RunStatus::Diverged { step, .. } | RunStatus::NonFiniteGradient { step } => Some(step),
        };
        Self {
            name,
            config_hash: config.hash(),
            config,
            status: out.status.name().into(),
            status_step,
            losses: out
                .log
                .iter()
                .map(|r| LoggedLoss {
                    step: r.step,
                    train_mse: r.train_mse,
                    test_mse: r.test_mse,
                })
                .collect(),
            final_train_mse: finite(out.train_mse),
            final_test_mse: finite(out.test_mse),
            test_target_variance: out.test_target_variance,
            relative_test_mse: finite(out.relative_test_mse()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub threshold: Threshold,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub records: Vec<RunRecord>,
    pub thresholds: Vec<ThresholdResult>,
    pub wall_seconds: Vec<(String, f64)>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.thresholds.iter().all(|t| t.passed)
    }

    pub fn results_jsonl(&self) -> String {
        let mut s = String::new();
        for r in &self.records {
            s.push_str(&serde_json::to_string(r).expect("record serialises"));
            s.push('\n');
        }
        s
    }

    pub fn curves_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for r in &self.records {
            for l in &r.losses {
                writeln!(s, "{},{},{:e},{:e}", r.name, l.step, l.train_mse, l.test_mse).expect("write to string");
            }
        }
        s
    }
}

fn find<'a>(records: &'a [RunRecord], name: &str) -> Option<&'a RunRecord> {
    records.iter().find(|r| r.name == name)
}

pub fn check_thresholds(records: &[RunRecord], thresholds: &[Threshold]) -> Vec<ThresholdResult> {
    thresholds
        .iter()
        .map(|t| {
            let rel = |name: &str| find(records, name).and_then(|r| r.relative_test_mse);
            let mse = |name: &str| find(records, name).and_then(|r| r.final_test_mse);
            let (passed, detail) = match t {
                Threshold::MaxRelativeMse { run, value } => match rel(run) {
                    Some(v) => (v <= *value, format!("{run}: relative test MSE {v:.4e} (max {value})")),
                    None => (false, format!("{run}: no completed result")),
                },
                Threshold::MinRelativeMse { run, value } => match rel(run) {
                    Some(v) => (v >= *value, format!("{run}: relative test MSE {v:.4e} (min {value})")),
                    None => (false, format!("{run}: no completed result")),
                },
                Threshold::Ordering { runs } => {
                    let vals: Option<Vec<f64>> = runs.iter().map(|r| mse(r)).collect();
                    match vals {
                        Some(v) => (
                            v.windows(2).all(|w| w[0] < w[1]),
                            runs.iter().zip(&v).map(|(r, x)| format!("{r}={x:.4e}")).collect::<Vec<_>>().join(" < "),
                        ),
                        None => (false, "missing completed result".into()),
                    }
                }
                Threshold::Improvement { better, worse, factor } => match (mse(better), mse(worse)) {
                    (Some(b), Some(w)) => (w >= factor * b, format!("{worse}/{better} = {:.3} (min {factor})", w / b)),
                    _ => (false, "missing completed result".into()),
                },
            };
            ThresholdResult {
                threshold: t.clone(),
                passed,
                detail,
            }
        })
        .collect()
}

pub fn load_dataset(source: &DatasetSource, base: &FsPath) -> Result<Dataset> {
    match source {
        DatasetSource::Generate(spec) => Ok(gen_dataset(&(*spec).into())?),
        DatasetSource::File(p) => {
            let full = if p.is_absolute() { p.clone() } else { base.join(p) };
            read_dataset(&full).with_context(|| format!("dataset resource {} unavailable", full.display()))
        }
    }
}

/// Runs every configuration of the manifest. Runs are independent and may
/// execute concurrently; records keep manifest order.
pub fn run_manifest(manifest: &Manifest, base: &FsPath) -> Result<Report> {
    if manifest.runs.is_empty() {
        return Ok(Report {
            records: Vec::new(),
            thresholds: check_thresholds(&[], &manifest.thresholds),
            wall_seconds: Vec::new(),
        });
    }
    let Some(source) = &manifest.dataset else {
        bail!("manifest has runs but no dataset");
    };
    let data = load_dataset(source, base)?;
    let resolved: Vec<(String, TrainConfig)> = manifest.runs.iter().map(|r| r.resolve()).collect::<Result<_>>()?;
    let outcomes: Vec<(RunRecord, f64)> = resolved
        .par_iter()
        .map(|(name, cfg)| {
            let start = Instant::now();
            let out = train_model(&data, cfg)?;
            let secs = start.elapsed().as_secs_f64();
            log::info!("{name}: {} relative test MSE {:.4e} in {secs:.1}s", out.status.name(), out.relative_test_mse());
            Ok((RunRecord::from_outcome(name.clone(), &out, &data), secs))
        })
        .collect::<Result<_>>()?;
    let wall_seconds = outcomes.iter().map(|(r, s)| (r.name.clone(), *s)).collect();
    let records: Vec<RunRecord> = outcomes.into_iter().map(|(r, _)| r).collect();
    let thresholds = check_thresholds(&records, &manifest.thresholds);
    Ok(Report {
        records,
        thresholds,
        wall_seconds,
    })
}

/// Writes `results.jsonl`, `curves.csv`, `thresholds.json` and `timings.json` into `dir`.
pub fn write_report(report: &Report, dir: &FsPath) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    fs::write(dir.join("results.jsonl"), report.results_jsonl())?;
    fs::write(dir.join("curves.csv"), report.curves_csv())?;
    fs::write(dir.join("thresholds.json"), serde_json::to_string_pretty(&report.thresholds)?)?;
    fs::write(dir.join("timings.json"), serde_json::to_string_pretty(&report.wall_seconds)?)?;
    Ok(())
}
