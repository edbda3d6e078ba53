use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::path::Path;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn matrix(rng: &mut ChaCha8Rng, r: usize, c: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| scale * rng.random_range(-1.0..1.0))
}

pub fn vector(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| scale * rng.random_range(-1.0..1.0))
}

pub fn path(rng: &mut ChaCha8Rng, steps: usize, channels: usize, scale: f64) -> Path {
    let mut values = Vec::with_capacity((steps + 1) * channels);
    values.extend(core::iter::repeat(0.0).take(channels));
    for k in 0..steps {
        for c in 0..channels {
            let prev = values[k * channels + c];
            values.push(prev + scale * rng.random_range(-1.0..1.0));
        }
    }
    Path::new(steps, channels, values).unwrap()
}
