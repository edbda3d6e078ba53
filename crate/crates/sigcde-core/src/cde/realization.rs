use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use super::params::DenseCdeParams;
use crate::error::{Error, Result};
use crate::signature::{tensor_len, word_index, Word};

/// Largest tensor-algebra state this crate will build.
pub const REALIZATION_MAX_STATES: usize = 2048;

/// Readout coefficients on `e_i ⊗ ε^ω_I` (`alpha`) and `ε^ξ_j ⊗ ε^ω_I` (`beta`).
/// Channel indices are 0-based; word letters are ω-channels, 1-based.
#[derive(Debug, Clone, Default)]
pub struct RealizationReadout {
    pub alpha: Vec<(usize, Word, f64)>,
    pub beta: Vec<(usize, Word, f64)>,
}

/// Letter layout of the realization alphabet: `e_1..e_{d0}`, then
/// `ε^ξ_1..ε^ξ_{dξ}`, then `ε^ω_1..ε^ω_{dω}`.
#[derive(Debug, Clone, Copy)]
pub struct RealizationAlphabet {
    pub d0: usize,
    pub d_xi: usize,
    pub d_omega: usize,
}

impl RealizationAlphabet {
    pub fn size(&self) -> usize {
        self.d0 + self.d_xi + self.d_omega
    }

    fn lift(&self, head: usize, word: &Word) -> Result<Word> {
        word.validate(self.d_omega)?;
        let mut letters = Vec::with_capacity(word.len() + 1);
        letters.push(head);
        letters.extend(word.letters().iter().map(|&k| self.d0 + self.d_xi + k));
        Ok(Word(letters))
    }

    /// State index of `e_i ⊗ ε^ω_I`.
    pub fn initial_index(&self, i: usize, word: &Word) -> Result<usize> {
        word_index(&self.lift(i + 1, word)?, self.size())
    }

    /// State index of `ε^ξ_j ⊗ ε^ω_I`.
    pub fn forcing_index(&self, j: usize, word: &Word) -> Result<usize> {
        word_index(&self.lift(self.d0 + j + 1, word)?, self.size())
    }
}

/// Dense CDE whose state is the truncated tensor-algebra lift of
/// `(x0, ξ, ω)`: `A_k` right-concatenates `ε^ω_k`, `B` injects `ε^ξ_j`,
/// `C` injects `e_i`. Words are truncated at total length `depth`.
pub fn tensor_algebra_realization(
    depth: usize,
    alphabet: RealizationAlphabet,
    readout: &RealizationReadout,
) -> Result<DenseCdeParams> {
    let size = alphabet.size();
    if size == 0 {
        return Err(Error::Invalid("empty alphabet".into()));
    }
    let n = tensor_len(size, depth);
    if n > REALIZATION_MAX_STATES {
        return Err(Error::MemoryBudget {
            required: n,
            limit: REALIZATION_MAX_STATES,
        });
    }
    let first_of_depth = n - size.pow(depth as u32);
    let omega_base = alphabet.d0 + alphabet.d_xi;
    let a = (0..alphabet.d_omega)
        .map(|k| {
            let mut m = DMatrix::zeros(n, n);
            for w in 0..first_of_depth {
                // appending letter (omega_base + k + 1) to word w
                let level_start = level_of(size, w);
                let rank = w - level_start.0;
                let target = level_start.1 + rank * size + omega_base + k;
                m[(target, w)] = 1.0;
            }
            m
        })
        .collect();
    let mut b = DMatrix::zeros(n, alphabet.d_xi);
    if depth >= 1 {
        for j in 0..alphabet.d_xi {
            b[(1 + alphabet.d0 + j, j)] = 1.0;
        }
    }
    let mut c = DMatrix::zeros(n, alphabet.d0);
    if depth >= 1 {
        for i in 0..alphabet.d0 {
            c[(1 + i, i)] = 1.0;
        }
    }
    let mut v = DVector::zeros(n);
    for (i, word, coef) in &readout.alpha {
        if *i >= alphabet.d0 || word.len() + 1 > depth {
            return Err(Error::Invalid("readout term outside the realization".into()));
        }
        v[alphabet.initial_index(*i, word)?] += coef;
    }
    for (j, word, coef) in &readout.beta {
        if *j >= alphabet.d_xi || word.len() + 1 > depth {
            return Err(Error::Invalid("readout term outside the realization".into()));
        }
        v[alphabet.forcing_index(*j, word)?] += coef;
    }
    DenseCdeParams::new(a, b, c, v)
}

/// `(offset of w's level, offset of the next level)`.
fn level_of(size: usize, w: usize) -> (usize, usize) {
    let mut start = 0;
    let mut width = 1;
    while start + width <= w {
        start += width;
        width *= size;
    }
    (start, start + width)
}
