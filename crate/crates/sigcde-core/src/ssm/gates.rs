use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};
use crate::path::Path;

/// Nonnegative gate applied to the selectivity pre-activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Softplus,
    Relu,
}

impl Gate {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Gate::Softplus => softplus(x),
            Gate::Relu => x.max(0.0),
        }
    }

    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Gate::Softplus => sigmoid(x),
            Gate::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else if x < -30.0 {
        libm::exp(x)
    } else {
        libm::log1p(libm::exp(x))
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// Which driving paths a token sequence induces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateKind {
    /// `ω = t`, `ξ = ∫ X dt` with `X` held constant on each step.
    S4,
    /// `dω = σ(α X + β) dt`, `dξ = σ(α X + β) X dt` per channel.
    MambaSoftplus,
    MambaRelu,
    /// `ω = ξ = (t, X_t)` with the tokens as path samples.
    LinearNcde,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateParams {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    /// Time step per token; `1/L` when `None`.
    pub delta: Option<f64>,
}

impl GateParams {
    pub fn time_only() -> Self {
        Self {
            alpha: Vec::new(),
            beta: Vec::new(),
            delta: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gates {
    pub omega: Path,
    pub xi: Path,
    pub x0: Vec<f64>,
}

/// Driving paths for a token sequence `x` (rows are time steps).
pub fn make_gates(kind: GateKind, x: &DMatrix<f64>, params: &GateParams) -> Result<Gates> {
    let (len, d) = x.shape();
    if len == 0 {
        return Err(Error::Invalid("empty token sequence".into()));
    }
    crate::error::check_finite("tokens", x.as_slice())?;
    let delta = params.delta.unwrap_or(1.0 / len as f64);
    match kind {
        GateKind::S4 => {
            let mut w = Vec::with_capacity(len + 1);
            let mut s = Vec::with_capacity((len + 1) * d);
            w.push(0.0);
            s.extend(core::iter::repeat(0.0).take(d));
            for l in 0..len {
                w.push(w[l] + delta);
                for c in 0..d {
                    let prev = s[l * d + c];
                    s.push(prev + delta * x[(l, c)]);
                }
            }
            Ok(Gates {
                omega: Path::new(len, 1, w)?,
                xi: Path::new(len, d, s)?,
                x0: Vec::new(),
            })
        }
        GateKind::MambaSoftplus | GateKind::MambaRelu => {
            check_len("gate α", d, params.alpha.len())?;
            check_len("gate β", d, params.beta.len())?;
            let gate = if kind == GateKind::MambaSoftplus {
                Gate::Softplus
            } else {
                Gate::Relu
            };
            let mut w = alloc::vec![0.0; (len + 1) * d];
            let mut s = alloc::vec![0.0; (len + 1) * d];
            for l in 0..len {
                for c in 0..d {
                    let xv = x[(l, c)];
                    let g = gate.apply(params.alpha[c] * xv + params.beta[c]) * delta;
                    w[(l + 1) * d + c] = w[l * d + c] + g;
                    s[(l + 1) * d + c] = s[l * d + c] + g * xv;
                }
            }
            Ok(Gates {
                omega: Path::new(len, d, w)?,
                xi: Path::new(len, d, s)?,
                x0: Vec::new(),
            })
        }
        GateKind::LinearNcde => {
            if len < 2 {
                return Err(Error::Invalid("linear NCDE gates need at least two samples".into()));
            }
            let samples: Vec<f64> = (0..len).flat_map(|l| (0..d).map(move |c| (l, c))).map(|(l, c)| x[(l, c)]).collect();
            let path = Path::from_samples(len - 1, d, &samples)?.time_augment(false);
            let mut x0 = Vec::with_capacity(d + 1);
            x0.push(1.0);
            x0.extend_from_slice(&samples[..d]);
            Ok(Gates {
                omega: path.clone(),
                xi: path,
                x0,
            })
        }
    }
}

/// `[ReLU(Wx + b); ReLU(-Wx - b)]` for every token.
pub fn relu_split(w: &DMatrix<f64>, b: &DVector<f64>, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_len("relu_split input width", w.ncols(), x.ncols())?;
    check_len("relu_split bias", w.nrows(), b.len())?;
    let k = w.nrows();
    let mut out = DMatrix::zeros(x.nrows(), 2 * k);
    for l in 0..x.nrows() {
        let pre = w * x.row(l).transpose() + b;
        for i in 0..k {
            out[(l, i)] = pre[i].max(0.0);
            out[(l, k + i)] = (-pre[i]).max(0.0);
        }
    }
    Ok(out)
}
