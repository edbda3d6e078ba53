use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_len, Error, Result};
use crate::path::Path;
use crate::signature::{signature, word_index, Word};

/// Fraction of samples used for training; the rest is the test split.
pub const TRAIN_FRACTION: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DatasetSpec {
    pub num_samples: usize,
    pub dim: usize,
    pub num_steps: usize,
    pub seed: u64,
}

impl DatasetSpec {
    pub fn new(num_samples: usize, dim: usize, seed: u64) -> Self {
        Self {
            num_samples,
            dim,
            num_steps: 100,
            seed,
        }
    }
}

/// Affine map sending the global `[min, max]` of the raw values to `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    pub min: f64,
    pub max: f64,
}

impl Normalization {
    pub fn scale(&self) -> f64 {
        if self.max > self.min {
            2.0 / (self.max - self.min)
        } else {
            0.0
        }
    }

    pub fn apply(&self, x: f64) -> f64 {
        if self.max > self.min {
            (x - self.min) * self.scale() - 1.0
        } else {
            0.0
        }
    }
}

/// Normalised sample paths with their iterated-integral targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub spec: DatasetSpec,
    pub normalization: Normalization,
    /// Sample-major, then `(num_steps + 1) x dim` row-major.
    pub values: Vec<f64>,
    pub targets: Vec<f64>,
    pub num_train: usize,
}

/// The word whose signature coefficient is the target: `(1,2)` in two
/// dimensions (area), `(1,2,3)` in three (volume).
pub fn target_word(dim: usize) -> Result<Word> {
    match dim {
        2 => Ok(Word::new(&[1, 2])),
        3 => Ok(Word::new(&[1, 2, 3])),
        _ => Err(Error::Invalid(alloc::format!("targets are defined for dimension 2 or 3, not {dim}"))),
    }
}

/// Random walks with increments `round(N(0, 1))`, globally normalised to
/// `[-1, 1]`; targets are computed on the normalised paths.
pub fn gen_dataset(spec: &DatasetSpec) -> Result<Dataset> {
    if spec.num_samples == 0 || spec.num_steps == 0 {
        return Err(Error::Invalid("dataset needs at least one sample and one step".into()));
    }
    target_word(spec.dim)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let row = spec.dim;
    let per = (spec.num_steps + 1) * row;
    let mut raw = Vec::with_capacity(spec.num_samples * per);
    for _ in 0..spec.num_samples {
        let start = raw.len();
        raw.extend(core::iter::repeat(0.0).take(row));
        for k in 0..spec.num_steps {
            for c in 0..row {
                let z: f64 = StandardNormal.sample(&mut rng);
                let prev = raw[start + k * row + c];
                raw.push(prev + libm::round(z));
            }
        }
    }
    Dataset::from_raw(*spec, raw)
}

impl Dataset {
    /// Normalises raw sample values and computes targets.
    pub fn from_raw(spec: DatasetSpec, raw: Vec<f64>) -> Result<Self> {
        let per = (spec.num_steps + 1) * spec.dim;
        check_len("raw dataset values", spec.num_samples * per, raw.len())?;
        crate::error::check_finite("raw dataset values", &raw)?;
        let word = target_word(spec.dim)?;
        let (min, max) = raw.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
        let normalization = Normalization { min, max };
        let values: Vec<f64> = raw.iter().map(|&x| normalization.apply(x)).collect();
        let idx = word_index(&word, spec.dim)?;
        let mut targets = Vec::with_capacity(spec.num_samples);
        for s in 0..spec.num_samples {
            let path = Path::from_samples(spec.num_steps, spec.dim, &values[s * per..(s + 1) * per])?;
            targets.push(signature(&path, word.len()).coeffs()[idx]);
        }
        let num_train = libm::round(spec.num_samples as f64 * TRAIN_FRACTION) as usize;
        Ok(Self {
            spec,
            normalization,
            values,
            targets,
            num_train,
        })
    }

    pub fn len(&self) -> usize {
        self.spec.num_samples
    }

    pub fn is_empty(&self) -> bool {
        self.spec.num_samples == 0
    }

    pub fn num_test(&self) -> usize {
        self.len() - self.num_train
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        let per = (self.spec.num_steps + 1) * self.spec.dim;
        &self.values[i * per..(i + 1) * per]
    }

    /// Token matrix: one row per grid point.
    pub fn tokens(&self, i: usize) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.spec.num_steps + 1, self.spec.dim, self.sample(i))
    }

    /// Sample path translated to start at the origin.
    pub fn path(&self, i: usize) -> Path {
        Path::from_samples(self.spec.num_steps, self.spec.dim, self.sample(i)).expect("validated at construction")
    }

    pub fn train_indices(&self) -> core::ops::Range<usize> {
        0..self.num_train
    }

    pub fn test_indices(&self) -> core::ops::Range<usize> {
        self.num_train..self.len()
    }

    /// Population variance of the targets over `idx`.
    pub fn target_variance(&self, idx: core::ops::Range<usize>) -> f64 {
        let n = idx.len().max(1) as f64;
        let mean = self.targets[idx.clone()].iter().sum::<f64>() / n;
        self.targets[idx].iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / n
    }
}
