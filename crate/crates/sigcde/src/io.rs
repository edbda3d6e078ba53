//! File formats: paths (JSON and binary), truncated tensors, CDE parameter
//! sets, chains and datasets.

use std::fs;
use std::io::{Read, Write};
use std::path::Path as FsPath;

use anyhow::{bail, ensure, Context, Result};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use sigcde_core::cde::{DenseCdeParams, DiagonalCdeParams, Trajectory};
use sigcde_core::chain::{ChainLayer, ChainSpec};
use sigcde_core::experiments::{Dataset, DatasetSpec};
use sigcde_core::signature::TruncatedTensor;
use sigcde_core::Path;

pub const PATH_MAGIC: &[u8; 8] = b"SSMPATH1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathJson {
    pub grid_steps: usize,
    pub channels: usize,
    pub values: Vec<f64>,
}

impl From<&Path> for PathJson {
    fn from(p: &Path) -> Self {
        Self {
            grid_steps: p.grid_steps(),
            channels: p.channels(),
            values: p.values().to_vec(),
        }
    }
}

impl TryFrom<PathJson> for Path {
    type Error = sigcde_core::Error;

    fn try_from(p: PathJson) -> Result<Self, Self::Error> {
        Path::new(p.grid_steps, p.channels, p.values)
    }
}

/// Header plus row-major little-endian values; shared by paths and trajectories.
pub fn encode_grid(grid_steps: usize, channels: usize, values: &[f64]) -> Result<Vec<u8>> {
    ensure!(values.len() == (grid_steps + 1) * channels, "grid has {} values, expected {}", values.len(), (grid_steps + 1) * channels);
    let mut out = Vec::with_capacity(16 + 8 * values.len());
    out.extend_from_slice(PATH_MAGIC);
    out.extend_from_slice(&u32::try_from(grid_steps)?.to_le_bytes());
    out.extend_from_slice(&u32::try_from(channels)?.to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

/// Inverse of [`encode_grid`]: `(grid_steps, channels, values)`.
pub fn decode_grid(bytes: &[u8]) -> Result<(usize, usize, Vec<f64>)> {
    ensure!(bytes.len() >= 16, "binary grid shorter than its header");
    ensure!(&bytes[..8] == PATH_MAGIC, "bad magic in binary grid");
    let steps = u32::from_le_bytes(bytes[8..12].try_into()?) as usize;
    let channels = u32::from_le_bytes(bytes[12..16].try_into()?) as usize;
    let n = (steps + 1)
        .checked_mul(channels)
        .context("binary grid dimensions overflow")?;
    ensure!(bytes.len() == 16 + 8 * n, "binary grid has {} payload bytes, expected {}", bytes.len() - 16, 8 * n);
    let values = bytes[16..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok((steps, channels, values))
}

pub fn path_to_binary(p: &Path) -> Vec<u8> {
    encode_grid(p.grid_steps(), p.channels(), p.values()).expect("path dimensions fit the header")
}

pub fn path_from_binary(bytes: &[u8]) -> Result<Path> {
    let (steps, channels, values) = decode_grid(bytes)?;
    Ok(Path::new(steps, channels, values)?)
}

/// A trajectory of `len` states, written with `grid_steps = len - 1`.
pub fn trajectory_to_binary(t: &Trajectory) -> Result<Vec<u8>> {
    ensure!(!t.is_empty(), "empty trajectory");
    encode_grid(t.len() - 1, t.dim(), t.values())
}

pub fn trajectory_from_binary(bytes: &[u8]) -> Result<Trajectory> {
    let (_, channels, values) = decode_grid(bytes)?;
    Ok(Trajectory::from_values(channels, values)?)
}

/// Reads a path from JSON or, when the file starts with the magic, binary.
pub fn read_path(file: &FsPath) -> Result<Path> {
    let mut bytes = Vec::new();
    fs::File::open(file)
        .with_context(|| format!("opening {}", file.display()))?
        .read_to_end(&mut bytes)?;
    if bytes.starts_with(PATH_MAGIC) {
        return path_from_binary(&bytes);
    }
    let json: PathJson = serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", file.display()))?;
    Ok(Path::try_from(json)?)
}

/// Writes binary when the extension is `bin`, JSON otherwise.
pub fn write_path(file: &FsPath, p: &Path) -> Result<()> {
    let bytes = if file.extension().is_some_and(|e| e == "bin") {
        path_to_binary(p)
    } else {
        serde_json::to_vec(&PathJson::from(p))?
    };
    fs::write(file, bytes).with_context(|| format!("writing {}", file.display()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorJson {
    pub d: usize,
    pub depth: usize,
    pub coeffs: Vec<f64>,
}

impl From<&TruncatedTensor> for TensorJson {
    fn from(t: &TruncatedTensor) -> Self {
        Self {
            d: t.dim(),
            depth: t.depth(),
            coeffs: t.coeffs().to_vec(),
        }
    }
}

impl TryFrom<TensorJson> for TruncatedTensor {
    type Error = sigcde_core::Error;

    fn try_from(t: TensorJson) -> Result<Self, Self::Error> {
        TruncatedTensor::new(t.d, t.depth, t.coeffs)
    }
}

/// Dense matrix with explicit shape, row-major data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl From<&DMatrix<f64>> for MatrixJson {
    fn from(m: &DMatrix<f64>) -> Self {
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data: m.transpose().as_slice().to_vec(),
        }
    }
}

impl MatrixJson {
    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        ensure!(
            self.data.len() == self.rows * self.cols,
            "matrix has {} entries, shape says {}x{}",
            self.data.len(),
            self.rows,
            self.cols
        );
        Ok(DMatrix::from_row_slice(self.rows, self.cols, &self.data))
    }
}

/// Either parameter family, tagged by `kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CdeParamsJson {
    Dense {
        a: Vec<MatrixJson>,
        b: MatrixJson,
        c: MatrixJson,
        v: Vec<f64>,
    },
    Diagonal {
        v_mat: MatrixJson,
        b: MatrixJson,
        c: MatrixJson,
        v: Vec<f64>,
    },
}

impl From<&DenseCdeParams> for CdeParamsJson {
    fn from(p: &DenseCdeParams) -> Self {
        CdeParamsJson::Dense {
            a: p.a.iter().map(MatrixJson::from).collect(),
            b: (&p.b).into(),
            c: (&p.c).into(),
            v: p.v.as_slice().to_vec(),
        }
    }
}

impl From<&DiagonalCdeParams> for CdeParamsJson {
    fn from(p: &DiagonalCdeParams) -> Self {
        CdeParamsJson::Diagonal {
            v_mat: (&p.v_mat).into(),
            b: (&p.b).into(),
            c: (&p.c).into(),
            v: p.v.as_slice().to_vec(),
        }
    }
}

/// Parsed parameter set.
#[derive(Debug, Clone, PartialEq)]
pub enum CdeParams {
    Dense(DenseCdeParams),
    Diagonal(DiagonalCdeParams),
}

impl CdeParamsJson {
    pub fn to_params(&self) -> Result<CdeParams> {
        Ok(match self {
            CdeParamsJson::Dense { a, b, c, v } => CdeParams::Dense(DenseCdeParams::new(
                a.iter().map(|m| m.to_matrix()).collect::<Result<_>>()?,
                b.to_matrix()?,
                c.to_matrix()?,
                DVector::from_column_slice(v),
            )?),
            CdeParamsJson::Diagonal { v_mat, b, c, v } => CdeParams::Diagonal(DiagonalCdeParams::new(
                v_mat.to_matrix()?,
                b.to_matrix()?,
                c.to_matrix()?,
                DVector::from_column_slice(v),
            )?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainLayerJson {
    pub cde: CdeParamsJson,
    pub readout: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSpecJson {
    pub input_channels: usize,
    pub layers: Vec<ChainLayerJson>,
}

impl From<&ChainSpec> for ChainSpecJson {
    fn from(c: &ChainSpec) -> Self {
        Self {
            input_channels: c.input_channels,
            layers: c
                .layers
                .iter()
                .map(|l| ChainLayerJson {
                    cde: (&l.cde).into(),
                    readout: l.readout.as_slice().to_vec(),
                })
                .collect(),
        }
    }
}

impl ChainSpecJson {
    pub fn to_spec(&self) -> Result<ChainSpec> {
        let mut layers = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            let CdeParams::Diagonal(cde) = l.cde.to_params()? else {
                bail!("chain layers must be diagonal");
            };
            layers.push(ChainLayer {
                cde,
                readout: DVector::from_column_slice(&l.readout),
            });
        }
        Ok(ChainSpec {
            input_channels: self.input_channels,
            layers,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSpecJson {
    pub num_samples: usize,
    pub dim: usize,
    #[serde(default = "default_steps")]
    pub num_steps: usize,
    pub seed: u64,
}

fn default_steps() -> usize {
    100
}

impl From<DatasetSpecJson> for DatasetSpec {
    fn from(s: DatasetSpecJson) -> Self {
        DatasetSpec {
            num_samples: s.num_samples,
            dim: s.dim,
            num_steps: s.num_steps,
            seed: s.seed,
        }
    }
}

impl From<DatasetSpec> for DatasetSpecJson {
    fn from(s: DatasetSpec) -> Self {
        Self {
            num_samples: s.num_samples,
            dim: s.dim,
            num_steps: s.num_steps,
            seed: s.seed,
        }
    }
}

/// Dataset file: spec, normalisation bounds, split, normalised values and targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetJson {
    pub spec: DatasetSpecJson,
    pub normalization: String,
    pub min: f64,
    pub max: f64,
    pub num_train: usize,
    pub values: Vec<f64>,
    pub targets: Vec<f64>,
}

impl From<&Dataset> for DatasetJson {
    fn from(d: &Dataset) -> Self {
        Self {
            spec: d.spec.into(),
            normalization: "global".into(),
            min: d.normalization.min,
            max: d.normalization.max,
            num_train: d.num_train,
            values: d.values.clone(),
            targets: d.targets.clone(),
        }
    }
}

impl DatasetJson {
    pub fn to_dataset(self) -> Result<Dataset> {
        let spec: DatasetSpec = self.spec.into();
        let per = (spec.num_steps + 1) * spec.dim;
        ensure!(self.values.len() == spec.num_samples * per, "dataset values do not match the spec");
        ensure!(self.targets.len() == spec.num_samples, "dataset targets do not match the spec");
        ensure!(self.num_train <= spec.num_samples, "train split larger than the dataset");
        Ok(Dataset {
            spec,
            normalization: sigcde_core::experiments::Normalization {
                min: self.min,
                max: self.max,
            },
            values: self.values,
            targets: self.targets,
            num_train: self.num_train,
        })
    }
}

pub fn write_dataset(file: &FsPath, d: &Dataset) -> Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(file).with_context(|| format!("creating {}", file.display()))?);
    serde_json::to_writer(&mut f, &DatasetJson::from(d))?;
    f.flush()?;
    Ok(())
}

pub fn read_dataset(file: &FsPath) -> Result<Dataset> {
    let bytes = fs::read(file).with_context(|| format!("reading dataset {}", file.display()))?;
    let json: DatasetJson = serde_json::from_slice(&bytes).with_context(|| format!("parsing dataset {}", file.display()))?;
    json.to_dataset()
}

pub fn read_json<T: serde::de::DeserializeOwned>(file: &FsPath) -> Result<T> {
    let bytes = fs::read(file).with_context(|| format!("reading {}", file.display()))?;
    serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", file.display()))
}
