use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, Error, Result};

/// A word over the alphabet `{1, ..., d}`. Letters are 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word(pub Vec<usize>);

impl Word {
    pub fn new(letters: &[usize]) -> Self {
        Word(letters.to_vec())
    }

    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn letters(&self) -> &[usize] {
        &self.0
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        match self.0.iter().find(|&&l| l == 0 || l > d) {
            Some(l) => Err(Error::Invalid(alloc::format!(
                "letter {l} outside alphabet 1..={d}"
            ))),
            None => Ok(()),
        }
    }

    /// Rank of the word among words of the same length (base-`d` digits).
    pub fn rank(&self, d: usize) -> usize {
        self.0.iter().fold(0, |acc, &l| acc * d + (l - 1))
    }
}

/// Number of words of length at most `depth` over `d` letters.
pub fn tensor_len(d: usize, depth: usize) -> usize {
    level_offset(d, depth + 1)
}

/// Flat index of the first word of length `k`.
pub fn level_offset(d: usize, k: usize) -> usize {
    let mut total = 0;
    let mut p = 1;
    for _ in 0..k {
        total += p;
        p *= d;
    }
    total
}

/// Flat index of `word`: length-major, then lexicographic.
pub fn word_index(word: &Word, d: usize) -> Result<usize> {
    word.validate(d)?;
    Ok(level_offset(d, word.len()) + word.rank(d))
}

/// Inverse of [`word_index`].
pub fn word_at(index: usize, d: usize) -> Word {
    let mut k = 0;
    while level_offset(d, k + 1) <= index {
        k += 1;
    }
    let mut rank = index - level_offset(d, k);
    let mut letters = vec![0; k];
    for slot in letters.iter_mut().rev() {
        *slot = rank % d + 1;
        rank /= d;
    }
    Word(letters)
}

/// Element of the tensor algebra truncated above `depth`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedTensor {
    dim: usize,
    depth: usize,
    coeffs: Vec<f64>,
}

impl TruncatedTensor {
    pub fn new(dim: usize, depth: usize, coeffs: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Invalid("tensor dimension must be positive".into()));
        }
        check_len("tensor coefficients", tensor_len(dim, depth), coeffs.len())?;
        Ok(Self { dim, depth, coeffs })
    }

    pub fn zero(dim: usize, depth: usize) -> Self {
        Self {
            dim,
            depth,
            coeffs: vec![0.0; tensor_len(dim, depth)],
        }
    }

    pub fn one(dim: usize, depth: usize) -> Self {
        let mut t = Self::zero(dim, depth);
        t.coeffs[0] = 1.0;
        t
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn level(&self, k: usize) -> &[f64] {
        let a = level_offset(self.dim, k);
        &self.coeffs[a..a + self.dim.pow(k as u32)]
    }

    pub fn get(&self, word: &Word) -> Result<f64> {
        if word.len() > self.depth {
            return Err(Error::Invalid(alloc::format!(
                "word of length {} beyond depth {}",
                word.len(),
                self.depth
            )));
        }
        Ok(self.coeffs[word_index(word, self.dim)?])
    }

    /// `x^{(k)} / c_k` summed over levels, where `c_k` is `k!` for the
    /// exponential and `(k+1)!` for `phi_1`.
    fn power_series(x: &[f64], depth: usize, shift: usize) -> Self {
        let d = x.len();
        let mut t = Self::zero(d, depth);
        let mut first = 1.0;
        for j in 2..=shift {
            first /= j as f64;
        }
        t.coeffs[0] = first;
        for k in 1..=depth {
            let (lo, hi) = t.coeffs.split_at_mut(level_offset(d, k));
            let prev = &lo[level_offset(d, k - 1)..];
            let div = (k + shift) as f64;
            for (w, &p) in prev.iter().enumerate() {
                for (i, &xi) in x.iter().enumerate() {
                    hi[w * d + i] = p * xi / div;
                }
            }
        }
        t
    }

    /// Truncated tensor exponential of a vector.
    pub fn exp(x: &[f64], depth: usize) -> Self {
        Self::power_series(x, depth, 0)
    }

    /// `sum_k x^{(k)} / (k+1)!`.
    pub fn phi1(x: &[f64], depth: usize) -> Self {
        Self::power_series(x, depth, 1)
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        check_len("tensor dimension", self.dim, other.dim)?;
        check_len("tensor depth", self.depth, other.depth)
    }

    /// Truncated tensor product.
    pub fn chen(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let d = self.dim;
        let mut out = Self::zero(d, self.depth);
        for n in 0..=self.depth {
            let on = level_offset(d, n);
            for k in 0..=n {
                let a = self.level(k);
                let b = other.level(n - k);
                let bl = b.len();
                for (u, &au) in a.iter().enumerate() {
                    if au == 0.0 {
                        continue;
                    }
                    let dst = &mut out.coeffs[on + u * bl..on + (u + 1) * bl];
                    for (o, &bv) in dst.iter_mut().zip(b) {
                        *o += au * bv;
                    }
                }
            }
        }
        Ok(out)
    }

    /// In-place right multiplication by `exp(x)` (Horner form).
    pub fn mul_exp(&mut self, x: &[f64]) {
        let d = self.dim;
        debug_assert_eq!(x.len(), d);
        let mut acc = Vec::new();
        let mut next = Vec::new();
        for n in (1..=self.depth).rev() {
            acc.clear();
            acc.extend_from_slice(self.level(0));
            for k in 1..=n {
                let div = (n - k + 1) as f64;
                next.clear();
                next.resize(acc.len() * d, 0.0);
                for (w, &a) in acc.iter().enumerate() {
                    let s = a / div;
                    for (i, &xi) in x.iter().enumerate() {
                        next[w * d + i] = s * xi;
                    }
                }
                let lk = self.level(k);
                for (v, &l) in next.iter_mut().zip(lk) {
                    *v += l;
                }
                core::mem::swap(&mut acc, &mut next);
            }
            let on = level_offset(d, n);
            self.coeffs[on..on + acc.len()].copy_from_slice(&acc);
        }
    }

    pub fn add_scaled(&mut self, other: &Self, scale: f64) -> Result<()> {
        self.check_compatible(other)?;
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += scale * b;
        }
        Ok(())
    }

    pub fn dot(&self, other: &Self) -> Result<f64> {
        self.check_compatible(other)?;
        Ok(self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a * b).sum())
    }

    pub fn level_norm(&self, k: usize) -> f64 {
        libm::sqrt(self.level(k).iter().map(|x| x * x).sum())
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs()))
    }
}
