//! Chains of diagonal linear CDEs that rebuild higher signature terms one
//! level per layer.
//!
//! Layer 1 is driven by `ω = X`, `ξ = X`. Layer `k + 1` is driven by
//! `ω = [y_k; X]` and `ξ = X`, where `y_k = W_k Z^k` is the previous layer's
//! readout. Each layer realises `∫ y dX^j = y_t X^j_t - ∫ (y_t - y_s) dX^j_s`
//! with exponential features: finite-difference stencils of `exp(ε <v, ω>)`
//! approximate the product `y_t X^j_t` and the difference `y_t - y_s`.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cde::{solve_diagonal, DiagonalCdeParams, Trajectory};
use crate::error::{check_len, Error, Result};
use crate::linalg::lstsq_svd;
use crate::path::Path;
use crate::signature::{signature_trajectory, word_index, Word};

/// `∫_0^t ω^i dξ^j` written as `ω^i_t ξ^j_t - ∫_0^t (ω^i_t - ω^i_s) dξ^j_s`,
/// the split a single diagonal layer can realise. Requires `x0[0] = 1` and
/// every ξ-channel to be a fixed linear combination of ω-channels.
pub fn recover_level2(omega: &Path, xi: &Path, x0: &[f64], i: usize, j: usize) -> Result<Vec<f64>> {
    check_len("ξ grid steps", omega.grid_steps(), xi.grid_steps())?;
    if i >= omega.channels() || j >= xi.channels() {
        return Err(Error::Invalid("channel index out of range".into()));
    }
    if x0.first() != Some(&1.0) {
        return Err(Error::Precondition("the first initial-condition entry must be 1".into()));
    }
    check_xi_in_span(omega, xi)?;
    let steps = omega.grid_steps();
    let mut out = Vec::with_capacity(steps + 1);
    // ∫_0^{t_k} ω^i_s dξ^j_s, exact for piecewise-linear paths
    let mut running = 0.0;
    out.push(0.0);
    for k in 0..steps {
        let (w0, w1) = (omega.row(k)[i], omega.row(k + 1)[i]);
        let dx = xi.row(k + 1)[j] - xi.row(k)[j];
        running += 0.5 * (w0 + w1) * dx;
        let wt = w1;
        let product = wt * xi.row(k + 1)[j];
        let difference = wt * xi.row(k + 1)[j] - running;
        out.push(product - difference);
    }
    Ok(out)
}

fn check_xi_in_span(omega: &Path, xi: &Path) -> Result<()> {
    let steps = omega.grid_steps();
    let w = DMatrix::from_fn(steps, omega.channels(), |k, c| omega.row(k + 1)[c] - omega.row(k)[c]);
    for j in 0..xi.channels() {
        let target = DVector::from_fn(steps, |k, _| xi.row(k + 1)[j] - xi.row(k)[j]);
        let (coef, _) = lstsq_svd(&w, &target, 1e-12)?;
        let resid = (&w * coef - &target).amax();
        if resid > 1e-9 * (1.0 + target.amax()) {
            return Err(Error::Precondition(alloc::format!(
                "ξ channel {j} is not a fixed linear combination of ω channels"
            )));
        }
    }
    Ok(())
}

/// One diagonal layer and its scalar readout.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainLayer {
    pub cde: DiagonalCdeParams,
    pub readout: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainSpec {
    pub input_channels: usize,
    pub layers: Vec<ChainLayer>,
}

/// Drivers of layer `k` (0-based) given the previous readout trajectory.
fn layer_drivers(x: &Path, prev: Option<&[f64]>) -> Result<Path> {
    match prev {
        None => Ok(x.clone()),
        Some(y) => {
            let y = Path::from_samples(x.grid_steps(), 1, y)?;
            y.stack(x)
        }
    }
}

/// Readout trajectory of every layer for input path `x`.
pub fn chain_forward_all(spec: &ChainSpec, x: &Path) -> Result<Vec<Vec<f64>>> {
    check_len("chain input channels", spec.input_channels, x.channels())?;
    let mut outs: Vec<Vec<f64>> = Vec::with_capacity(spec.layers.len());
    for layer in &spec.layers {
        let omega = layer_drivers(x, outs.last().map(|v| v.as_slice()))?;
        let z = solve_diagonal(&layer.cde, &omega, x, &[1.0])?;
        outs.push(z.readout(&layer.readout));
    }
    Ok(outs)
}

/// Readout trajectory of the last layer.
pub fn chain_forward(spec: &ChainSpec, x: &Path) -> Result<Vec<f64>> {
    Ok(chain_forward_all(spec, x)?.pop().unwrap_or_default())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainOptions {
    /// State dimension of every layer.
    pub width: usize,
    /// Base stencil step; stencils use `ε, 2ε, ..., stencil_scales ε`.
    pub epsilon: f64,
    pub stencil_scales: usize,
    /// Scale of the random rows filling each layer up to `width`.
    pub random_scale: f64,
    pub seed: u64,
    /// Cap on the number of (path, time) rows used in each least-squares fit.
    pub max_fit_rows: usize,
}

impl Default for ChainOptions {
    fn default() -> Self {
        Self {
            width: 256,
            epsilon: 0.05,
            stencil_scales: 4,
            random_scale: 0.5,
            seed: 0,
            max_fit_rows: 16_000,
        }
    }
}

/// Diagonal layer whose stencil rows realise `ω^a_t ω^b_t` and `∫(ω^a_t - ω^a_s) dξ^j`,
/// padded with random rows up to `width`.
pub fn stencil_layer(
    d_omega: usize,
    d_xi: usize,
    a: usize,
    b: usize,
    j: usize,
    options: &ChainOptions,
    rng: &mut ChaCha8Rng,
) -> Result<DiagonalCdeParams> {
    let mut v_rows: Vec<Vec<f64>> = Vec::new();
    let mut b_rows: Vec<Vec<f64>> = Vec::new();
    let mut c_rows: Vec<f64> = Vec::new();
    let mut push = |v: Vec<f64>, bj: Option<usize>, c: f64| {
        let mut brow = vec![0.0; d_xi];
        if let Some(bj) = bj {
            brow[bj] = 1.0;
        }
        v_rows.push(v);
        b_rows.push(brow);
        c_rows.push(c);
    };
    push(vec![0.0; d_omega], None, 1.0);
    push(vec![0.0; d_omega], Some(j), 0.0);
    for s in 1..=options.stencil_scales {
        let eps = options.epsilon * s as f64;
        for (sa, sb) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
            let mut v = vec![0.0; d_omega];
            v[a] += sa * eps;
            v[b] += sb * eps;
            push(v, None, 1.0);
        }
        for sa in [1.0, -1.0] {
            let mut v = vec![0.0; d_omega];
            v[a] = sa * eps;
            push(v, Some(j), 0.0);
        }
    }
    if v_rows.len() > options.width {
        return Err(Error::Invalid(alloc::format!(
            "width {} is below the {} stencil rows",
            options.width,
            v_rows.len()
        )));
    }
    while v_rows.len() < options.width {
        let v = (0..d_omega).map(|_| options.random_scale * rng.random_range(-1.0..1.0)).collect();
        let brow = (0..d_xi).map(|_| rng.random_range(-1.0..1.0)).collect();
        v_rows.push(v);
        b_rows.push(brow);
        c_rows.push(rng.random_range(-1.0..1.0));
    }
    let n = v_rows.len();
    DiagonalCdeParams::new(
        DMatrix::from_fn(n, d_omega, |r, c| v_rows[r][c]),
        DMatrix::from_fn(n, d_xi, |r, c| b_rows[r][c]),
        DMatrix::from_fn(n, 1, |r, _| c_rows[r]),
        DVector::zeros(n),
    )
}

/// Least-squares readout from states at every grid point of every path.
pub fn fit_trajectory_readout(states: &[Trajectory], targets: &[Vec<f64>], max_rows: usize) -> Result<DVector<f64>> {
    check_len("readout target paths", states.len(), targets.len())?;
    let Some(first) = states.first() else {
        return Err(Error::Invalid("no training paths".into()));
    };
    let n = first.dim();
    let per_path = first.len();
    let total = states.len() * per_path;
    let stride = total.div_ceil(max_rows.max(1)).max(1);
    let picks: Vec<(usize, usize)> = (0..total).step_by(stride).map(|r| (r / per_path, r % per_path)).collect();
    let a = DMatrix::from_fn(picks.len(), n, |r, c| states[picks[r].0].state(picks[r].1)[c]);
    let y = DVector::from_fn(picks.len(), |r, _| targets[picks[r].0][picks[r].1]);
    Ok(lstsq_svd(&a, &y, 1e-13)?.0)
}

/// Coefficient of `word` in `Sig(x)_{0,t}` at every grid point.
pub fn signature_coordinate(x: &Path, word: &Word) -> Result<Vec<f64>> {
    let idx = word_index(word, x.channels())?;
    Ok(signature_trajectory(x, word.len()).iter().map(|s| s.coeffs()[idx]).collect())
}

/// Builds a `(|I| - 1)`-layer chain whose last readout approximates
/// `Sig(X)^I_{0,t}`, fitting each `W_k` against the prefix of `I` of length
/// `k + 1` on `train`.
pub fn build_signature_chain(word: &Word, train: &[Path], options: &ChainOptions) -> Result<ChainSpec> {
    let Some(first) = train.first() else {
        return Err(Error::Invalid("no training paths".into()));
    };
    let d = first.channels();
    word.validate(d)?;
    if word.len() < 2 {
        return Err(Error::Invalid("chains start at words of length 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let letters = word.letters();
    let mut layers = Vec::with_capacity(word.len() - 1);
    let mut prev: Option<Vec<Vec<f64>>> = None;
    for k in 1..word.len() {
        let j = letters[k] - 1;
        let (d_omega, a, b) = if k == 1 { (d, letters[0] - 1, j) } else { (d + 1, 0, j + 1) };
        let cde = stencil_layer(d_omega, d, a, b, j, options, &mut rng)?;
        let mut states = Vec::with_capacity(train.len());
        let mut targets = Vec::with_capacity(train.len());
        let prefix = Word::new(&letters[..=k]);
        for (p, x) in train.iter().enumerate() {
            check_len("training path channels", d, x.channels())?;
            let omega = layer_drivers(x, prev.as_ref().map(|v| v[p].as_slice()))?;
            states.push(solve_diagonal(&cde, &omega, x, &[1.0])?);
            targets.push(signature_coordinate(x, &prefix)?);
        }
        let readout = fit_trajectory_readout(&states, &targets, options.max_fit_rows)?;
        prev = Some(states.iter().map(|z| z.readout(&readout)).collect());
        layers.push(ChainLayer { cde, readout });
    }
    Ok(ChainSpec {
        input_channels: d,
        layers,
    })
}

/// A single diagonal layer driven by `ω = (t, X)` with no ξ forcing. Its
/// states depend on the path only through the increment `ω_t - ω_0`.
pub fn homogeneous_layer(d: usize, width: usize, scale: f64, seed: u64) -> Result<DiagonalCdeParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = DMatrix::from_fn(width, d + 1, |_, _| scale * rng.random_range(-1.0..1.0));
    DiagonalCdeParams::new(v, DMatrix::zeros(width, 0), DMatrix::from_element(width, 1, 1.0), DVector::zeros(width))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil;

    #[test]
    fn level2_identity_is_exact() {
        let mut r = testutil::rng(1);
        let x = testutil::path(&mut r, 20, 2, 0.4);
        let y = recover_level2(&x, &x, &[1.0], 0, 1).unwrap();
        let want = signature_coordinate(&x, &Word::new(&[1, 2])).unwrap();
        for (a, b) in y.iter().zip(&want) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn level2_preconditions() {
        let mut r = testutil::rng(2);
        let x = testutil::path(&mut r, 10, 2, 0.4);
        let other = testutil::path(&mut r, 10, 1, 0.4);
        assert!(matches!(recover_level2(&x, &other, &[1.0], 0, 0), Err(Error::Precondition(_))));
        assert!(matches!(recover_level2(&x, &x, &[2.0], 0, 1), Err(Error::Precondition(_))));
        // ξ = 2 X^1 - X^2 is a valid combination
        let mixed: Vec<f64> = (0..=10).map(|k| 2.0 * x.row(k)[0] - x.row(k)[1]).collect();
        let xi = Path::new(10, 1, mixed).unwrap();
        assert!(recover_level2(&x, &xi, &[1.0], 0, 0).is_ok());
    }

    #[test]
    fn chain_recovers_level_two_and_three() {
        let mut r = testutil::rng(3);
        let paths: Vec<Path> = (0..160).map(|_| testutil::path(&mut r, 30, 3, 0.15)).collect();
        let (train, test) = paths.split_at(120);
        let opts = ChainOptions { width: 64, ..ChainOptions::default() };
        for letters in [&[1usize, 2][..], &[1, 2, 3], &[3, 1, 2]] {
            let word = Word::new(letters);
            let spec = build_signature_chain(&word, train, &opts).unwrap();
            assert_eq!(spec.layers.len(), letters.len() - 1);
            let mut err = 0.0;
            let mut var = 0.0;
            for x in test {
                let got = *chain_forward(&spec, x).unwrap().last().unwrap();
                let want = *signature_coordinate(x, &word).unwrap().last().unwrap();
                err += (got - want) * (got - want);
                var += want * want;
            }
            assert!(err / var < 1e-3, "{letters:?}: relative error {}", err / var);
        }
    }

    #[test]
    fn stencil_layer_rejects_narrow_width() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let opts = ChainOptions { width: 8, ..ChainOptions::default() };
        assert!(stencil_layer(2, 2, 0, 1, 1, &opts, &mut rng).is_err());
    }
}
