use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_len, Error, Result};
use crate::ssm::{sigmoid, softplus};

/// Trainable sequence architectures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ModelKind {
    S5,
    Mamba,
    S5Stacked,
    MambaStacked,
    LinearNcde,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::S5,
        ModelKind::Mamba,
        ModelKind::S5Stacked,
        ModelKind::MambaStacked,
        ModelKind::LinearNcde,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::S5 => "s5",
            ModelKind::Mamba => "mamba",
            ModelKind::S5Stacked => "s5-stacked",
            ModelKind::MambaStacked => "mamba-stacked",
            ModelKind::LinearNcde => "linear-ncde",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    fn layers(self) -> usize {
        match self {
            ModelKind::S5 | ModelKind::Mamba => 1,
            ModelKind::S5Stacked | ModelKind::MambaStacked => 2,
            ModelKind::LinearNcde => 0,
        }
    }

    fn is_mamba(self) -> bool {
        matches!(self, ModelKind::Mamba | ModelKind::MambaStacked)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelShape {
    pub kind: ModelKind,
    pub input_dim: usize,
    pub hidden: usize,
    /// State size `P` of an S5 layer, or per-channel state size `N` of a Mamba layer.
    pub state: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Slot {
    off: usize,
    len: usize,
}

impl Slot {
    fn get<'a>(&self, p: &'a [f64]) -> &'a [f64] {
        &p[self.off..self.off + self.len]
    }

    fn get_mut<'a>(&self, p: &'a mut [f64]) -> &'a mut [f64] {
        &mut p[self.off..self.off + self.len]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum LayerSlots {
    /// `a = -exp(a_raw)`, `Δ = exp(log_dt)`, `B: P x H`, `C: H x P`, `D: H`.
    S5 { a_raw: Slot, log_dt: Slot, b: Slot, c: Slot, d: Slot },
    /// `Δ_h = softplus(α_h u_h + β_h)`; `a, b, c: H x N`.
    Mamba { alpha: Slot, beta: Slot, a_raw: Slot, b: Slot, c: Slot, d: Slot },
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Layout {
    w_in: Slot,
    b_in: Slot,
    layers: Vec<LayerSlots>,
    /// Mixing `M: H x H`, `m: H` before each layer after the first.
    mix: Vec<(Slot, Slot)>,
    readout: Slot,
    readout_bias: Slot,
    total: usize,
}

impl Layout {
    fn new(shape: &ModelShape) -> Self {
        let mut off = 0;
        let mut take = |len: usize| {
            let s = Slot { off, len };
            off += len;
            s
        };
        let (h, p, d) = (shape.hidden, shape.state, shape.input_dim);
        let w_in = take(h * d);
        let b_in = take(h);
        let mut layers = Vec::new();
        let mut mix = Vec::new();
        for l in 0..shape.kind.layers() {
            if l > 0 {
                mix.push((take(h * h), take(h)));
            }
            layers.push(if shape.kind.is_mamba() {
                LayerSlots::Mamba {
                    alpha: take(h),
                    beta: take(h),
                    a_raw: take(h * p),
                    b: take(h * p),
                    c: take(h * p),
                    d: take(h),
                }
            } else {
                LayerSlots::S5 {
                    a_raw: take(p),
                    log_dt: take(p),
                    b: take(p * h),
                    c: take(h * p),
                    d: take(h),
                }
            });
        }
        let state_len = if shape.kind.is_mamba() { h * p } else { p };
        let readout = take(state_len);
        let readout_bias = take(1);
        Self {
            w_in,
            b_in,
            layers,
            mix,
            readout,
            readout_bias,
            total: off,
        }
    }
}

/// Per-sample activations kept for the backward pass.
#[derive(Debug, Clone, Default)]
struct LayerCache {
    u: Vec<f64>,
    z: Vec<f64>,
    y: Vec<f64>,
    /// S5: `B u_t` per step. Mamba: `exp(Δ a)` per step and state.
    aux: Vec<f64>,
    /// Mamba only: gate pre-activation and step size per step and channel.
    pre: Vec<f64>,
    dt: Vec<f64>,
}

/// Workspace reused across samples.
#[derive(Debug, Clone, Default)]
pub struct Workspace {
    layers: Vec<LayerCache>,
    gu: Vec<f64>,
    gy: Vec<f64>,
    gz: Vec<f64>,
}

/// Encoder, one or two diagonal recurrent layers and a linear readout of
/// the final state. Predictions are `target_mean + target_scale * raw`.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceModel {
    pub shape: ModelShape,
    pub params: Vec<f64>,
    pub target_mean: f64,
    pub target_scale: f64,
    layout: Layout,
}

fn phi1_and_deriv(m: f64, e: f64) -> (f64, f64) {
    if m.abs() < 1e-4 {
        (1.0 + m / 2.0 + m * m / 6.0, 0.5 + m / 3.0 + m * m / 8.0)
    } else {
        let phi = (e - 1.0) / m;
        (phi, (e - phi) / m)
    }
}

impl SequenceModel {
    pub fn new(shape: ModelShape, seed: u64) -> Result<Self> {
        if shape.kind == ModelKind::LinearNcde {
            return Err(Error::Invalid("the linear NCDE baseline is not a gradient-trained model".into()));
        }
        if shape.input_dim == 0 || shape.hidden == 0 || shape.state == 0 {
            return Err(Error::Invalid("model dimensions must be positive".into()));
        }
        let layout = Layout::new(&shape);
        let mut params = vec![0.0; layout.total];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (h, p) = (shape.hidden, shape.state);
        let normal = |slot: Slot, std: f64, params: &mut [f64], rng: &mut ChaCha8Rng| {
            for v in slot.get_mut(params) {
                let z: f64 = StandardNormal.sample(rng);
                *v = std * z;
            }
        };
        normal(layout.w_in, 1.0 / libm::sqrt(shape.input_dim as f64), &mut params, &mut rng);
        let (ln_lo, ln_hi) = (libm::log(1e-3), libm::log(1e-1));
        for (l, layer) in layout.layers.iter().enumerate() {
            if l > 0 {
                let (m, _) = layout.mix[l - 1];
                normal(m, 1.0 / libm::sqrt(h as f64), &mut params, &mut rng);
            }
            match *layer {
                LayerSlots::S5 { a_raw, log_dt, b, c, d } => {
                    for (i, v) in a_raw.get_mut(&mut params).iter_mut().enumerate() {
                        *v = libm::log(0.5 * (i + 1) as f64);
                    }
                    for v in log_dt.get_mut(&mut params) {
                        *v = rng.random_range(ln_lo..ln_hi);
                    }
                    normal(b, 1.0 / libm::sqrt(h as f64), &mut params, &mut rng);
                    normal(c, 1.0 / libm::sqrt(p as f64), &mut params, &mut rng);
                    normal(d, 1.0, &mut params, &mut rng);
                }
                LayerSlots::Mamba { alpha, beta, a_raw, b, c, d } => {
                    for v in alpha.get_mut(&mut params) {
                        *v = rng.random_range(-1.0..1.0);
                    }
                    for v in beta.get_mut(&mut params) {
                        // inverse softplus of a log-uniform step size
                        let dt = libm::exp(rng.random_range(ln_lo..ln_hi));
                        *v = libm::log(libm::expm1(dt));
                    }
                    for (i, v) in a_raw.get_mut(&mut params).iter_mut().enumerate() {
                        *v = libm::log(0.5 * ((i % p) + 1) as f64);
                    }
                    normal(b, 1.0, &mut params, &mut rng);
                    normal(c, 1.0 / libm::sqrt(p as f64), &mut params, &mut rng);
                    normal(d, 1.0, &mut params, &mut rng);
                }
            }
        }
        Ok(Self {
            shape,
            params,
            target_mean: 0.0,
            target_scale: 1.0,
            layout,
        })
    }

    pub fn num_params(&self) -> usize {
        self.layout.total
    }

    /// Named parameter tensors as `(name, offset, len)`.
    pub fn tensors(&self) -> Vec<(alloc::string::String, usize, usize)> {
        use alloc::format;
        let l = &self.layout;
        let mut out = vec![
            ("w_in".into(), l.w_in.off, l.w_in.len),
            ("b_in".into(), l.b_in.off, l.b_in.len),
        ];
        for (i, layer) in l.layers.iter().enumerate() {
            if i > 0 {
                let (m, b) = l.mix[i - 1];
                out.push((format!("mix{i}.weight"), m.off, m.len));
                out.push((format!("mix{i}.bias"), b.off, b.len));
            }
            let named: Vec<(&str, Slot)> = match *layer {
                LayerSlots::S5 { a_raw, log_dt, b, c, d } => {
                    vec![("a_raw", a_raw), ("log_dt", log_dt), ("b", b), ("c", c), ("d", d)]
                }
                LayerSlots::Mamba { alpha, beta, a_raw, b, c, d } => {
                    vec![("alpha", alpha), ("beta", beta), ("a_raw", a_raw), ("b", b), ("c", c), ("d", d)]
                }
            };
            for (n, s) in named {
                out.push((format!("layer{i}.{n}"), s.off, s.len));
            }
        }
        out.push(("readout".into(), l.readout.off, l.readout.len));
        out.push(("readout_bias".into(), l.readout_bias.off, l.readout_bias.len));
        out
    }

    /// Prediction for a token sequence (`tokens` is `T x input_dim`, row-major).
    pub fn predict(&self, tokens: &[f64], ws: &mut Workspace) -> Result<f64> {
        self.forward(tokens, ws)
    }

    fn forward(&self, tokens: &[f64], ws: &mut Workspace) -> Result<f64> {
        let d = self.shape.input_dim;
        if tokens.is_empty() || tokens.len() % d != 0 {
            return Err(Error::Shape {
                context: "model tokens",
                expected: d,
                found: tokens.len(),
            });
        }
        let t_len = tokens.len() / d;
        let h = self.shape.hidden;
        let p = &self.params;
        let nl = self.layout.layers.len();
        ws.layers.resize_with(nl, LayerCache::default);
        let w_in = self.layout.w_in.get(p);
        let b_in = self.layout.b_in.get(p);
        {
            let u = &mut ws.layers[0].u;
            u.clear();
            u.resize(t_len * h, 0.0);
            for t in 0..t_len {
                let x = &tokens[t * d..(t + 1) * d];
                for i in 0..h {
                    let mut acc = b_in[i];
                    for c in 0..d {
                        acc += w_in[i * d + c] * x[c];
                    }
                    u[t * h + i] = acc;
                }
            }
        }
        for l in 0..nl {
            if l > 0 {
                let (ms, bs) = self.layout.mix[l - 1];
                let (m, b) = (ms.get(p), bs.get(p));
                let (prev, cur) = ws.layers.split_at_mut(l);
                let y = &prev[l - 1].y;
                let u = &mut cur[0].u;
                u.clear();
                u.resize(t_len * h, 0.0);
                for t in 0..t_len {
                    for i in 0..h {
                        let mut acc = b[i];
                        let row = &m[i * h..(i + 1) * h];
                        let yt = &y[t * h..(t + 1) * h];
                        for k in 0..h {
                            acc += row[k] * yt[k];
                        }
                        u[t * h + i] = acc;
                    }
                }
            }
            let need_y = l + 1 < nl;
            match self.layout.layers[l] {
                LayerSlots::S5 { a_raw, log_dt, b, c, d } => {
                    self.s5_forward(t_len, (a_raw, log_dt, b, c, d), &mut ws.layers[l], need_y)
                }
                LayerSlots::Mamba { alpha, beta, a_raw, b, c, d } => self.mamba_forward(
                    t_len,
                    (alpha, beta, a_raw, b, c, d),
                    &mut ws.layers[l],
                    need_y,
                ),
            }
        }
        let cache = &ws.layers[nl - 1];
        let s = self.layout.readout.len;
        let z_last = &cache.z[(t_len - 1) * s..t_len * s];
        let r = self.layout.readout.get(p);
        let raw: f64 = self.layout.readout_bias.get(p)[0] + r.iter().zip(z_last).map(|(a, b)| a * b).sum::<f64>();
        Ok(self.target_mean + self.target_scale * raw)
    }

    fn s5_forward(&self, t_len: usize, slots: (Slot, Slot, Slot, Slot, Slot), cache: &mut LayerCache, need_y: bool) {
        let (a_raw, log_dt, bs, cs, ds) = slots;
        let p = &self.params;
        let (h, ps) = (self.shape.hidden, self.shape.state);
        let (b, c, dd) = (bs.get(p), cs.get(p), ds.get(p));
        let mut ebar = vec![0.0; ps];
        let mut gain = vec![0.0; ps];
        for i in 0..ps {
            let a = -libm::exp(a_raw.get(p)[i]);
            let dt = libm::exp(log_dt.get(p)[i]);
            let m = a * dt;
            let em1 = libm::expm1(m);
            ebar[i] = 1.0 + em1;
            gain[i] = if m == 0.0 { dt } else { em1 / m * dt };
        }
        cache.z.clear();
        cache.z.resize(t_len * ps, 0.0);
        cache.aux.clear();
        cache.aux.resize(t_len * ps, 0.0);
        cache.y.clear();
        if need_y {
            cache.y.resize(t_len * h, 0.0);
        }
        for t in 0..t_len {
            let ut = &cache.u[t * h..(t + 1) * h];
            for i in 0..ps {
                let row = &b[i * h..(i + 1) * h];
                let w: f64 = row.iter().zip(ut).map(|(x, y)| x * y).sum();
                cache.aux[t * ps + i] = w;
                let prev = if t > 0 { cache.z[(t - 1) * ps + i] } else { 0.0 };
                cache.z[t * ps + i] = ebar[i] * prev + gain[i] * w;
            }
            if need_y {
                let zt = &cache.z[t * ps..(t + 1) * ps];
                for k in 0..h {
                    let row = &c[k * ps..(k + 1) * ps];
                    cache.y[t * h + k] = row.iter().zip(zt).map(|(x, y)| x * y).sum::<f64>() + dd[k] * ut[k];
                }
            }
        }
    }

    fn mamba_forward(
        &self,
        t_len: usize,
        slots: (Slot, Slot, Slot, Slot, Slot, Slot),
        cache: &mut LayerCache,
        need_y: bool,
    ) {
        let (als, bes, a_raw, bs, cs, ds) = slots;
        let p = &self.params;
        let (h, n) = (self.shape.hidden, self.shape.state);
        let (alpha, beta, b, c, dd) = (als.get(p), bes.get(p), bs.get(p), cs.get(p), ds.get(p));
        let a: Vec<f64> = a_raw.get(p).iter().map(|v| -libm::exp(*v)).collect();
        let s = h * n;
        cache.z.clear();
        cache.z.resize(t_len * s, 0.0);
        cache.aux.clear();
        cache.aux.resize(t_len * s, 0.0);
        cache.pre.clear();
        cache.pre.resize(t_len * h, 0.0);
        cache.dt.clear();
        cache.dt.resize(t_len * h, 0.0);
        cache.y.clear();
        if need_y {
            cache.y.resize(t_len * h, 0.0);
        }
        for t in 0..t_len {
            for k in 0..h {
                let u = cache.u[t * h + k];
                let pre = alpha[k] * u + beta[k];
                let dt = softplus(pre);
                cache.pre[t * h + k] = pre;
                cache.dt[t * h + k] = dt;
                let mut y = dd[k] * u;
                for j in 0..n {
                    let idx = k * n + j;
                    let m = dt * a[idx];
                    let e = libm::exp(m);
                    let phi = phi1_and_deriv(m, e).0;
                    let prev = if t > 0 { cache.z[(t - 1) * s + idx] } else { 0.0 };
                    let z = e * prev + phi * dt * b[idx] * u;
                    cache.z[t * s + idx] = z;
                    cache.aux[t * s + idx] = e;
                    y += c[idx] * z;
                }
                if need_y {
                    cache.y[t * h + k] = y;
                }
            }
        }
    }

    /// Adds `scale * d(prediction)/d(params)` for one sample into `grads`
    /// and returns the prediction.
    pub fn accumulate_gradient(&self, tokens: &[f64], scale: f64, grads: &mut [f64], ws: &mut Workspace) -> Result<f64> {
        check_len("gradient buffer", self.layout.total, grads.len())?;
        let pred = self.forward(tokens, ws)?;
        let d = self.shape.input_dim;
        let t_len = tokens.len() / d;
        let h = self.shape.hidden;
        let p = &self.params;
        let nl = self.layout.layers.len();
        let g_raw = scale * self.target_scale;
        // readout
        let s = self.layout.readout.len;
        ws.gz.clear();
        ws.gz.resize(s, 0.0);
        {
            let z_last = &ws.layers[nl - 1].z[(t_len - 1) * s..t_len * s];
            let r = self.layout.readout.get(p);
            let gr = self.layout.readout.get_mut(grads);
            for i in 0..s {
                gr[i] += g_raw * z_last[i];
                ws.gz[i] = g_raw * r[i];
            }
            self.layout.readout_bias.get_mut(grads)[0] += g_raw;
        }
        ws.gy.clear();
        let mut have_gy = false;
        for l in (0..nl).rev() {
            ws.gu.clear();
            ws.gu.resize(t_len * h, 0.0);
            let gy = if have_gy { Some(&ws.gy[..]) } else { None };
            match self.layout.layers[l] {
                LayerSlots::S5 { a_raw, log_dt, b, c, d } => {
                    self.s5_backward(t_len, (a_raw, log_dt, b, c, d), &ws.layers[l], &mut ws.gz, gy, &mut ws.gu, grads)
                }
                LayerSlots::Mamba { alpha, beta, a_raw, b, c, d } => self.mamba_backward(
                    t_len,
                    (alpha, beta, a_raw, b, c, d),
                    &ws.layers[l],
                    &mut ws.gz,
                    gy,
                    &mut ws.gu,
                    grads,
                ),
            }
            if l > 0 {
                // u_l = M y_{l-1} + m
                let (ms, bs) = self.layout.mix[l - 1];
                let m = ms.get(p);
                let y = &ws.layers[l - 1].y;
                ws.gy.clear();
                ws.gy.resize(t_len * h, 0.0);
                for t in 0..t_len {
                    for i in 0..h {
                        let g = ws.gu[t * h + i];
                        if g == 0.0 {
                            continue;
                        }
                        bs.get_mut(grads)[i] += g;
                        let gm = ms.get_mut(grads);
                        for k in 0..h {
                            gm[i * h + k] += g * y[t * h + k];
                            ws.gy[t * h + k] += g * m[i * h + k];
                        }
                    }
                }
                have_gy = true;
                let prev_s = match self.layout.layers[l - 1] {
                    LayerSlots::S5 { .. } => self.shape.state,
                    LayerSlots::Mamba { .. } => h * self.shape.state,
                };
                ws.gz.clear();
                ws.gz.resize(prev_s, 0.0);
            }
        }
        // encoder
        let gw = self.layout.w_in.off;
        let gb = self.layout.b_in.off;
        for t in 0..t_len {
            let x = &tokens[t * d..(t + 1) * d];
            for i in 0..h {
                let g = ws.gu[t * h + i];
                grads[gb + i] += g;
                for c in 0..d {
                    grads[gw + i * d + c] += g * x[c];
                }
            }
        }
        Ok(pred)
    }

    #[allow(clippy::too_many_arguments)]
    fn s5_backward(
        &self,
        t_len: usize,
        slots: (Slot, Slot, Slot, Slot, Slot),
        cache: &LayerCache,
        gz: &mut [f64],
        gy: Option<&[f64]>,
        gu: &mut [f64],
        grads: &mut [f64],
    ) {
        let (a_raw, log_dt, bs, cs, ds) = slots;
        let p = &self.params;
        let (h, ps) = (self.shape.hidden, self.shape.state);
        let (b, c, dd) = (bs.get(p), cs.get(p), ds.get(p));
        let mut a = vec![0.0; ps];
        let mut dt = vec![0.0; ps];
        let mut ebar = vec![0.0; ps];
        let mut gain = vec![0.0; ps];
        for i in 0..ps {
            a[i] = -libm::exp(a_raw.get(p)[i]);
            dt[i] = libm::exp(log_dt.get(p)[i]);
            let m = a[i] * dt[i];
            ebar[i] = libm::exp(m);
            gain[i] = phi1_and_deriv(m, ebar[i]).0 * dt[i];
        }
        let mut g_ebar = vec![0.0; ps];
        let mut g_gain = vec![0.0; ps];
        let mut gw = vec![0.0; ps];
        for t in (0..t_len).rev() {
            let ut = &cache.u[t * h..(t + 1) * h];
            if let Some(gy) = gy {
                let gyt = &gy[t * h..(t + 1) * h];
                let zt = &cache.z[t * ps..(t + 1) * ps];
                let gc = cs.get_mut(grads);
                for k in 0..h {
                    let g = gyt[k];
                    for i in 0..ps {
                        gz[i] += c[k * ps + i] * g;
                        gc[k * ps + i] += g * zt[i];
                    }
                }
                let gd = ds.get_mut(grads);
                for k in 0..h {
                    gd[k] += gyt[k] * ut[k];
                    gu[t * h + k] += dd[k] * gyt[k];
                }
            }
            for i in 0..ps {
                let prev = if t > 0 { cache.z[(t - 1) * ps + i] } else { 0.0 };
                g_ebar[i] += gz[i] * prev;
                g_gain[i] += gz[i] * cache.aux[t * ps + i];
                gw[i] = gain[i] * gz[i];
            }
            let gb = bs.get_mut(grads);
            for i in 0..ps {
                let g = gw[i];
                for k in 0..h {
                    gb[i * h + k] += g * ut[k];
                    gu[t * h + k] += b[i * h + k] * g;
                }
            }
            for i in 0..ps {
                gz[i] *= ebar[i];
            }
        }
        for i in 0..ps {
            let m = a[i] * dt[i];
            let (phi, dphi) = phi1_and_deriv(m, ebar[i]);
            let gm = g_ebar[i] * ebar[i] + g_gain[i] * dphi * dt[i];
            let gdt = g_gain[i] * phi + gm * a[i];
            let ga = gm * dt[i];
            a_raw.get_mut(grads)[i] += ga * a[i];
            log_dt.get_mut(grads)[i] += gdt * dt[i];
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn mamba_backward(
        &self,
        t_len: usize,
        slots: (Slot, Slot, Slot, Slot, Slot, Slot),
        cache: &LayerCache,
        gz: &mut [f64],
        gy: Option<&[f64]>,
        gu: &mut [f64],
        grads: &mut [f64],
    ) {
        let (als, bes, a_raw, bs, cs, ds) = slots;
        let p = &self.params;
        let (h, n) = (self.shape.hidden, self.shape.state);
        let (alpha, b, c, dd) = (als.get(p), bs.get(p), cs.get(p), ds.get(p));
        let a: Vec<f64> = a_raw.get(p).iter().map(|v| -libm::exp(*v)).collect();
        let s = h * n;
        let mut ga = vec![0.0; s];
        let mut gb = vec![0.0; s];
        let mut gc = vec![0.0; s];
        let mut galpha = vec![0.0; h];
        let mut gbeta = vec![0.0; h];
        let mut gd = vec![0.0; h];
        for t in (0..t_len).rev() {
            for k in 0..h {
                let u = cache.u[t * h + k];
                let dt = cache.dt[t * h + k];
                let gyk = gy.map_or(0.0, |g| g[t * h + k]);
                let mut gu_k = 0.0;
                if gyk != 0.0 {
                    gd[k] += gyk * u;
                    gu_k += dd[k] * gyk;
                }
                let mut gdt = 0.0;
                for j in 0..n {
                    let idx = k * n + j;
                    let mut g = gz[idx];
                    if gyk != 0.0 {
                        g += c[idx] * gyk;
                        gc[idx] += gyk * cache.z[t * s + idx];
                    }
                    if g == 0.0 {
                        gz[idx] = 0.0;
                        continue;
                    }
                    let e = cache.aux[t * s + idx];
                    let m = dt * a[idx];
                    let (phi, dphi) = phi1_and_deriv(m, e);
                    let prev = if t > 0 { cache.z[(t - 1) * s + idx] } else { 0.0 };
                    let gf = g * u;
                    gu_k += phi * dt * b[idx] * g;
                    let gm = g * prev * e + gf * b[idx] * dt * dphi;
                    gdt += gf * b[idx] * phi + gm * a[idx];
                    ga[idx] += gm * dt;
                    gb[idx] += gf * phi * dt;
                    gz[idx] = e * g;
                }
                let gpre = gdt * sigmoid(cache.pre[t * h + k]);
                galpha[k] += gpre * u;
                gbeta[k] += gpre;
                gu_k += gpre * alpha[k];
                gu[t * h + k] += gu_k;
            }
        }
        for (dst, src) in [(als, &galpha), (bes, &gbeta), (bs, &gb), (cs, &gc), (ds, &gd)] {
            for (g, v) in dst.get_mut(grads).iter_mut().zip(src.iter()) {
                *g += v;
            }
        }
        for (i, g) in a_raw.get_mut(grads).iter_mut().enumerate() {
            *g += ga[i] * a[i];
        }
    }
}

/// Largest relative error, over parameter tensors, between the analytic
/// gradient of the prediction and central finite differences with step `h`.
/// Each tensor's error is `|g - g_fd| / max(|g_fd|, floor)` in the 2-norm.
pub fn gradient_check(model: &SequenceModel, tokens: &[f64], h: f64) -> Result<f64> {
    let mut ws = Workspace::default();
    let mut g = vec![0.0; model.num_params()];
    model.accumulate_gradient(tokens, 1.0, &mut g, &mut ws)?;
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for (_, off, len) in model.tensors() {
        let mut diff2 = 0.0;
        let mut ref2 = 0.0;
        for i in off..off + len {
            let orig = probe.params[i];
            probe.params[i] = orig + h;
            let up = probe.forward(tokens, &mut ws)?;
            probe.params[i] = orig - h;
            let down = probe.forward(tokens, &mut ws)?;
            probe.params[i] = orig;
            let fd = (up - down) / (2.0 * h);
            diff2 += (g[i] - fd) * (g[i] - fd);
            ref2 += fd * fd;
        }
        let rel = libm::sqrt(diff2) / libm::sqrt(ref2).max(1e-10);
        worst = worst.max(rel);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil;

    fn tokens(seed: u64, t: usize, d: usize) -> Vec<f64> {
        let mut rng = testutil::rng(seed);
        testutil::vector(&mut rng, t * d, 1.0).as_slice().to_vec()
    }

    #[test]
    fn gradients_match_finite_differences() {
        for kind in [ModelKind::S5, ModelKind::Mamba, ModelKind::S5Stacked, ModelKind::MambaStacked] {
            let shape = ModelShape { kind, input_dim: 2, hidden: 3, state: 4 };
            let mut model = SequenceModel::new(shape, 5).unwrap();
            // nonzero readout so every tensor receives gradient
            let mut rng = testutil::rng(9);
            let r = model.layout.readout;
            let vals = testutil::vector(&mut rng, r.len, 1.0);
            r.get_mut(&mut model.params).copy_from_slice(vals.as_slice());
            model.target_scale = 0.7;
            let err = gradient_check(&model, &tokens(3, 9, 2), 1e-6).unwrap();
            assert!(err <= 1e-4, "{kind:?}: {err}");
        }
    }

    #[test]
    fn layout_covers_all_parameters() {
        for kind in [ModelKind::S5, ModelKind::Mamba, ModelKind::S5Stacked, ModelKind::MambaStacked] {
            let m = SequenceModel::new(ModelShape { kind, input_dim: 3, hidden: 5, state: 2 }, 0).unwrap();
            let total: usize = m.tensors().iter().map(|t| t.2).sum();
            assert_eq!(total, m.num_params());
        }
    }

    #[test]
    fn mamba_state_matches_diagonal_solver() {
        // one channel, identity encoder: the layer is a diagonal CDE driven by
        // ω = ∫ Δ, ξ = ∫ Δ u with the input held over each step.
        let shape = ModelShape { kind: ModelKind::Mamba, input_dim: 1, hidden: 1, state: 3 };
        let mut model = SequenceModel::new(shape, 2).unwrap();
        let l = model.layout.clone();
        l.w_in.get_mut(&mut model.params)[0] = 1.0;
        l.b_in.get_mut(&mut model.params)[0] = 0.0;
        let x = tokens(4, 12, 1);
        let mut ws = Workspace::default();
        model.forward(&x, &mut ws).unwrap();
        let LayerSlots::Mamba { alpha, beta, a_raw, b, .. } = l.layers[0] else { unreachable!() };
        let p = &model.params;
        let (al, be) = (alpha.get(p)[0], beta.get(p)[0]);
        let a: Vec<f64> = a_raw.get(p).iter().map(|v| -libm::exp(*v)).collect();
        let mut w = vec![0.0];
        let mut s = vec![0.0];
        for &u in &x {
            let dt = softplus(al * u + be);
            w.push(w.last().unwrap() + dt);
            s.push(s.last().unwrap() + dt * u);
        }
        let omega = crate::Path::new(12, 1, w).unwrap();
        let xi = crate::Path::new(12, 1, s).unwrap();
        let bmat = nalgebra::DMatrix::from_column_slice(3, 1, b.get(p));
        let cde = crate::cde::DiagonalCdeParams::new(
            nalgebra::DMatrix::from_column_slice(3, 1, &a),
            bmat,
            nalgebra::DMatrix::zeros(3, 0),
            nalgebra::DVector::zeros(3),
        )
        .unwrap();
        let traj = crate::cde::solve_diagonal(&cde, &omega, &xi, &[]).unwrap();
        for t in 0..12 {
            for j in 0..3 {
                assert!((traj.state(t + 1)[j] - ws.layers[0].z[t * 3 + j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_bad_tokens() {
        let m = SequenceModel::new(ModelShape { kind: ModelKind::S5, input_dim: 2, hidden: 2, state: 2 }, 0).unwrap();
        assert!(m.predict(&[1.0, 2.0, 3.0], &mut Workspace::default()).is_err());
        assert!(SequenceModel::new(ModelShape { kind: ModelKind::LinearNcde, input_dim: 2, hidden: 2, state: 2 }, 0).is_err());
    }
}
