//! The twelve acceptance criteria. Runs without the libtest harness and
//! prints one PASS/FAIL line per criterion; exits non-zero if any fails.
//! `ACCEPTANCE_ONLY=1,4,9` restricts the run to the listed criteria.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sigcde::batch::{self, Schedule};
use sigcde::suite::{run_manifest, Manifest};
use sigcde_core::cde::{
    liouville_determinant, solve_dense, solve_dense_with, solve_diagonal, solve_via_signature, stability_check,
    tensor_algebra_realization, wronskian, DenseCdeParams, DiagonalCdeParams, RealizationAlphabet, RealizationReadout,
    SolveOptions, Stepper,
};
use sigcde_core::chain::{build_signature_chain, chain_forward_all, homogeneous_layer, signature_coordinate, ChainOptions};
use sigcde_core::experiments::{gen_dataset, gradient_check, train_model, DatasetSpec, ModelKind, ModelShape, SequenceModel, TrainConfig};
use sigcde_core::features::{feature_tensor, kernel_goursat, sample_lecun, KernelInput, SeededInit};
use sigcde_core::linalg::lstsq_svd;
use sigcde_core::signature::{brute_force_signature, signature, signature_interval, tensor_len, word_at, Quadrature, TruncatedTensor, Word};
use sigcde_core::ssm::{make_gates, s4_forward, s6_forward, Gate, GateKind, GateParams, InputRule, S4Params, S6Params};
use sigcde_core::Path;

type Outcome = Result<String, String>;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_path(r: &mut ChaCha8Rng, steps: usize, channels: usize, scale: f64) -> Path {
    let mut v = vec![0.0; channels];
    for k in 0..steps {
        for c in 0..channels {
            let prev = v[k * channels + c];
            v.push(prev + scale * r.random_range(-1.0..1.0));
        }
    }
    Path::new(steps, channels, v).unwrap()
}

fn random_matrix(r: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| scale * r.random_range(-1.0..1.0))
}

fn random_dense(r: &mut ChaCha8Rng, n: usize, d_omega: usize, d_xi: usize, d0: usize, scale: f64) -> DenseCdeParams {
    let a = (0..d_omega).map(|_| random_matrix(r, n, n, scale)).collect();
    DenseCdeParams::new(a, random_matrix(r, n, d_xi, 1.0), random_matrix(r, n, d0, 1.0), DVector::from_fn(n, |_, _| r.random_range(-1.0..1.0))).unwrap()
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Largest per-level relative error `max|a - b| / max|b|` over levels 1..=depth.
fn levelwise_rel(a: &TruncatedTensor, b: &TruncatedTensor) -> f64 {
    let mut worst: f64 = 0.0;
    for k in 1..=b.depth() {
        let (la, lb) = (a.level(k), b.level(k));
        let scale = lb.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if scale == 0.0 {
            continue;
        }
        let diff = la.iter().zip(lb).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        worst = worst.max(diff / scale);
    }
    worst
}

fn signature_oracle() -> Outcome {
    let start = Instant::now();
    let mut r = rng(1);
    let mut worst: f64 = 0.0;
    for case in 0..60 {
        let d = 1 + case % 3;
        let steps = 1 + r.random_range(0..10);
        let depth = 1 + r.random_range(0..4);
        let p = random_path(&mut r, steps, d, 1.0);
        let fast = signature(&p, depth);
        let slow = brute_force_signature(&p, depth, 200, Quadrature::RichardsonTrapezoid);
        worst = worst.max(levelwise_rel(&fast, &slow));
    }
    let secs = start.elapsed().as_secs_f64();
    check(worst <= 1e-6 && secs < 10.0, format!("60 paths, worst level-wise rel. err {worst:.2e}, {secs:.2}s"))
}

fn s4_closed_form() -> Outcome {
    let l = 50;
    let time = Path::time(l).unwrap();
    let mut worst_sig: f64 = 0.0;
    for (i, j) in [(0usize, 50usize), (10, 35), (7, 8)] {
        let (s, t) = (i as f64 / l as f64, j as f64 / l as f64);
        let sig = signature_interval(&time, 6, s, t).unwrap();
        for k in 0..=6 {
            let want = (t - s).powi(k as i32) / (1..=k).map(|x| x as f64).product::<f64>();
            worst_sig = worst_sig.max((sig.level(k)[0] - want).abs());
        }
    }
    let mut r = rng(2);
    let mut worst_state: f64 = 0.0;
    for _ in 0..10 {
        let (d, n, len) = (2, 4, 40);
        let x = random_matrix(&mut r, len, d, 1.0);
        let p = S4Params {
            a: DMatrix::from_fn(d, n, |_, _| -r.random_range(0.05..4.0)),
            b: random_matrix(&mut r, d, n, 1.0),
            delta: (0..d).map(|_| r.random_range(0.005..0.1)).collect(),
        };
        let z = s4_forward(&p, &x).unwrap();
        // z after token l is sum_m ∫ over step m of e^{a(lΔ - s)} ds b x_m
        for h in 0..d {
            for k in 0..n {
                let (a, b, dt) = (p.a[(h, k)], p.b[(h, k)], p.delta[h]);
                for li in 1..=len {
                    let mut want = 0.0;
                    for m in 1..=li {
                        let hi = (li - m + 1) as f64 * dt;
                        let lo = (li - m) as f64 * dt;
                        want += b * x[(m - 1, h)] * ((a * hi).exp() - (a * lo).exp()) / a;
                    }
                    let got = z[(li - 1, h * n + k)];
                    worst_state = worst_state.max((got - want).abs() / want.abs().max(1.0));
                }
            }
        }
    }
    check(
        worst_sig <= 1e-12 && worst_state <= 1e-8,
        format!("time-path levels err {worst_sig:.1e}, S4 state vs segment integrals {worst_state:.1e}"),
    )
}

fn wronskian_laws() -> Outcome {
    let mut r = rng(3);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = r.random_range(2..7);
        let d = r.random_range(1..4);
        let p = random_dense(&mut r, n, d, 1, 1, 0.8);
        let omega = random_path(&mut r, 12, d, 0.5);
        let mut ts: Vec<f64> = (0..3).map(|_| r.random_range(0..=12) as f64 / 12.0).collect();
        ts.sort_by(f64::total_cmp);
        let (a, b, c) = (ts[0], ts[1], ts[2]);
        let w_ab = wronskian(&p, &omega, a, b).unwrap();
        let w_bc = wronskian(&p, &omega, b, c).unwrap();
        let w_ac = wronskian(&p, &omega, a, c).unwrap();
        let cocycle = (&w_bc * &w_ab - &w_ac).norm() / w_ac.norm();
        let inverse = (wronskian(&p, &omega, c, a).unwrap() * &w_ac - DMatrix::identity(n, n)).norm();
        let det = w_ac.determinant();
        let liouville = liouville_determinant(&p, &omega, a, c).unwrap();
        let det_err = (det - liouville).abs() / liouville.abs();
        worst = worst.max(cocycle).max(inverse).max(det_err);
    }
    check(worst <= 1e-8, format!("100 instances, worst relative violation {worst:.2e}"))
}

fn zoh_equivalence() -> Outcome {
    let mut r = rng(4);
    let mut worst: f64 = 0.0;
    for case in 0..10 {
        let (d, n, len) = (2, 3, 25);
        let x = random_matrix(&mut r, len, d, 1.0);
        let s4 = S4Params {
            a: DMatrix::from_fn(d, n, |_, _| -r.random_range(0.1..3.0)),
            b: random_matrix(&mut r, d, n, 1.0),
            delta: vec![r.random_range(0.01..0.1); d],
        };
        let g = make_gates(GateKind::S4, &x, &GateParams::time_only()).unwrap();
        let cde = s4.as_diagonal_cde(1.0 / len as f64).unwrap().to_dense();
        let traj = solve_dense(&cde, &g.omega, &g.xi, &g.x0).unwrap();
        let z = s4_forward(&s4, &x).unwrap();
        for l in 0..len {
            for i in 0..d * n {
                worst = worst.max((z[(l, i)] - traj.state(l + 1)[i]).abs());
            }
        }
        let gate = if case % 2 == 0 { Gate::Softplus } else { Gate::Relu };
        let s6 = S6Params {
            a: DMatrix::from_fn(d, n, |_, _| -r.random_range(0.1..5.0)),
            b: random_matrix(&mut r, d, n, 1.0),
            alpha: (0..d).map(|_| r.random_range(-2.0..2.0)).collect(),
            beta: (0..d).map(|_| r.random_range(-0.5..0.5)).collect(),
            delta: 1.0 / len as f64,
            gate,
            input_rule: InputRule::ZeroOrderHold,
        };
        let kind = if gate == Gate::Softplus { GateKind::MambaSoftplus } else { GateKind::MambaRelu };
        let g = make_gates(kind, &x, &GateParams { alpha: s6.alpha.clone(), beta: s6.beta.clone(), delta: None }).unwrap();
        let traj = solve_dense(&s6.as_diagonal_cde().unwrap().to_dense(), &g.omega, &g.xi, &g.x0).unwrap();
        let z = s6_forward(&s6, &x).unwrap().states;
        for l in 0..len {
            for i in 0..d * n {
                worst = worst.max((z[(l, i)] - traj.state(l + 1)[i]).abs());
            }
        }
    }
    // Euler-input S6 on samples of a smooth signal against a fine ZOH reference.
    let signal = |t: f64| [(2.0 * std::f64::consts::PI * t).sin() + 0.3, (3.0 * t).cos() - 0.5 * t];
    let params = |delta: f64, rule: InputRule| S6Params {
        a: DMatrix::from_row_slice(2, 2, &[-1.0, -3.0, -0.5, -2.0]),
        b: DMatrix::from_row_slice(2, 2, &[1.0, -0.7, 0.4, 1.2]),
        alpha: vec![1.3, -0.8],
        beta: vec![0.2, 0.1],
        delta,
        gate: Gate::Softplus,
        input_rule: rule,
    };
    let final_state = |len: usize, rule: InputRule| {
        let x = DMatrix::from_fn(len, 2, |l, c| signal((l + 1) as f64 / len as f64)[c]);
        let z = s6_forward(&params(1.0 / len as f64, rule), &x).unwrap().states;
        z.row(len - 1).transpose()
    };
    let reference = final_state(1 << 18, InputRule::ZeroOrderHold);
    let sizes = [32usize, 64, 128, 256, 512];
    let errs: Vec<f64> = sizes.iter().map(|&n| (final_state(n, InputRule::Euler) - &reference).norm()).collect();
    let xs: Vec<f64> = sizes.iter().map(|&n| (1.0 / n as f64).ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let order = slope(&xs, &ys);
    check(
        worst <= 1e-8 && (order - 1.0).abs() <= 0.2,
        format!("ZOH layers vs dense CDE max err {worst:.1e}; Euler-input convergence order {order:.3}"),
    )
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let cov: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    cov / var
}

fn expansion_bound() -> Outcome {
    let mut r = rng(5);
    let mut worst_ratio: f64 = 0.0;
    let mut final_err: f64 = 0.0;
    for _ in 0..20 {
        let p = random_dense(&mut r, 4, 2, 1, 1, 0.3);
        let omega = random_path(&mut r, 8, 2, 0.25);
        let xi = random_path(&mut r, 8, 1, 0.5);
        let exact = solve_dense(&p, &omega, &xi, &[1.0]).unwrap();
        for depth in 0..=10 {
            let e = solve_via_signature(&p, &omega, &xi, &[1.0], depth).unwrap();
            for k in 0..=8 {
                let err = e.trajectory.state(k).iter().zip(exact.state(k)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                if err > 1e-14 {
                    worst_ratio = worst_ratio.max(err / e.tail_bound[k]);
                }
            }
            if depth == 10 {
                final_err = final_err.max(e.trajectory.max_abs_diff(&exact));
            }
        }
    }
    check(
        worst_ratio <= 1.0,
        format!("20 instances, M = 0..=10: worst error / bound {worst_ratio:.3}; error at M = 10 {final_err:.1e}"),
    )
}

fn realization() -> Outcome {
    let mut r = rng(6);
    let alphabet = RealizationAlphabet { d0: 2, d_xi: 2, d_omega: 2 };
    let depth = 3;
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let words: Vec<Word> = (0..tensor_len(2, depth - 1)).map(|i| word_at(i, 2)).collect();
        let mut readout = RealizationReadout::default();
        for w in &words {
            for i in 0..2 {
                readout.alpha.push((i, w.clone(), r.random_range(-1.0..1.0)));
                readout.beta.push((i, w.clone(), r.random_range(-1.0..1.0)));
            }
        }
        let p = tensor_algebra_realization(depth, alphabet, &readout).unwrap();
        let omega = random_path(&mut r, 6, 2, 0.7);
        let xi = random_path(&mut r, 6, 2, 0.7);
        let x0 = [r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)];
        let y = *solve_dense(&p, &omega, &xi, &x0).unwrap().readout(&p.v).last().unwrap();
        let f = feature_tensor(&omega, &xi, &x0, depth - 1).unwrap();
        let mut want = 0.0;
        for (i, w, c) in &readout.alpha {
            want += c * f.x0[*i] * f.sig.get(w).unwrap();
        }
        for (j, w, c) in &readout.beta {
            want += c * f.xi_terms[*j].get(w).unwrap();
        }
        worst = worst.max((y - want).abs());
    }
    check(worst <= 1e-10, format!("10 random readouts over all words of length <= 2, max err {worst:.1e}"))
}

fn kernel_consistency() -> Outcome {
    let mut r = rng(7);
    let mut worst_pde: f64 = 0.0;
    for _ in 0..5 {
        let (ox, oy) = (random_path(&mut r, 3, 2, 0.3), random_path(&mut r, 3, 2, 0.3));
        let (sx, sy) = (random_path(&mut r, 3, 1, 0.3), random_path(&mut r, 3, 1, 0.3));
        let k = kernel_goursat(
            KernelInput { omega: &ox, xi: &sx, x0: &[1.0] },
            KernelInput { omega: &oy, xi: &sy, x0: &[0.7] },
            64,
        )
        .unwrap();
        let fx = feature_tensor(&ox, &sx, &[1.0], 6).unwrap();
        let fy = feature_tensor(&oy, &sy, &[0.7], 6).unwrap();
        worst_pde = worst_pde.max((k.terminal() - fx.inner(&fy).unwrap()).abs());
    }
    // Monte Carlo: four short paths, all pairs, ten feature seeds per width.
    let paths: Vec<(Path, Path)> = (0..4).map(|_| (random_path(&mut r, 2, 2, 0.1), random_path(&mut r, 2, 1, 1.0))).collect();
    let x0 = [1.0];
    let mut exact = vec![vec![0.0; 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            exact[a][b] = kernel_goursat(
                KernelInput { omega: &paths[a].0, xi: &paths[a].1, x0: &x0 },
                KernelInput { omega: &paths[b].0, xi: &paths[b].1, x0: &x0 },
                64,
            )
            .unwrap()
            .terminal();
        }
    }
    let widths = [64usize, 256, 1024, 4096];
    let mut rmse = Vec::new();
    for &n in &widths {
        let mut sq = 0.0;
        let mut count = 0;
        for seed in 0..10 {
            let params = sample_lecun(&SeededInit { seed, n, d0: 1, d_omega: 2, d_xi: 1 }).unwrap();
            let opts = SolveOptions { stepper: Stepper::Action, cache_transitions: false };
            let z: Vec<Vec<f64>> = paths
                .iter()
                .map(|(o, s)| solve_dense_with(&params, o, s, &x0, opts).unwrap().final_state().to_vec())
                .collect();
            for a in 0..4 {
                for b in a..4 {
                    let ip: f64 = z[a].iter().zip(&z[b]).map(|(u, v)| u * v).sum::<f64>() / n as f64;
                    sq += (ip - exact[a][b]).powi(2);
                    count += 1;
                }
            }
        }
        rmse.push((sq / count as f64).sqrt());
    }
    let xs: Vec<f64> = widths.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = rmse.iter().map(|e| e.ln()).collect();
    let s = slope(&xs, &ys);
    check(
        worst_pde <= 1e-4 && (s + 0.5).abs() <= 0.15,
        format!(
            "Goursat vs depth-6 features max err {worst_pde:.1e}; Monte Carlo RMSE {} slope {s:.3}",
            rmse.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn chaining() -> Outcome {
    let d2 = gen_dataset(&DatasetSpec::new(2400, 2, 8)).unwrap();
    let d3 = gen_dataset(&DatasetSpec::new(300, 3, 9)).unwrap();
    let paths2: Vec<Path> = (0..d2.len()).map(|i| d2.path(i)).collect();
    let paths3: Vec<Path> = (0..d3.len()).map(|i| d3.path(i)).collect();
    let opts = ChainOptions::default();
    // held-out MSE over every grid time
    let chain_mse = |word: &[usize], train: &[Path], test: &[Path]| {
        let w = Word::new(word);
        let spec = build_signature_chain(&w, train, &opts).unwrap();
        let mut se = 0.0;
        let mut n = 0;
        let mut finals = Vec::new();
        for x in test {
            let got = chain_forward_all(&spec, x).unwrap().pop().unwrap();
            let want = signature_coordinate(x, &w).unwrap();
            for (g, t) in got.iter().zip(&want) {
                se += (g - t) * (g - t);
                n += 1;
            }
            finals.push(*got.last().unwrap());
        }
        (se / n as f64, finals)
    };
    let (mse12, f12) = chain_mse(&[1, 2], &paths2[..200], &paths2[2000..]);
    let (mse123, _) = chain_mse(&[1, 2, 3], &paths3[..200], &paths3[200..]);
    let (_, f21) = chain_mse(&[2, 1], &paths2[..200], &paths2[2000..]);

    // antisymmetric area at the final time
    let area = |x: &Path| {
        let s = signature(x, 2);
        s.get(&Word::new(&[1, 2])).unwrap() - s.get(&Word::new(&[2, 1])).unwrap()
    };
    let targets: Vec<f64> = paths2.iter().map(area).collect();
    let test_t = &targets[2000..];
    let mean = test_t.iter().sum::<f64>() / test_t.len() as f64;
    let var = test_t.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / test_t.len() as f64;
    let layer = homogeneous_layer(2, 64, 1.0, 10).unwrap();
    let xi = Path::zeros(100, 0).unwrap();
    let features: Vec<Vec<f64>> = paths2
        .iter()
        .map(|x| solve_diagonal(&layer, &x.time_augment(false), &xi, &[1.0]).unwrap().final_state().to_vec())
        .collect();
    let design = DMatrix::from_fn(2000, 64, |i, j| features[i][j]);
    let (w, _) = lstsq_svd(&design, &DVector::from_column_slice(&targets[..2000]), 1e-12).unwrap();
    let single: f64 = (2000..2400)
        .map(|i| {
            let pred: f64 = features[i].iter().zip(w.iter()).map(|(a, b)| a * b).sum();
            (pred - targets[i]).powi(2)
        })
        .sum::<f64>()
        / 400.0;
    let chained: f64 = (0..400).map(|i| (f12[i] - f21[i] - test_t[i]).powi(2)).sum::<f64>() / 400.0;
    let (single_rel, chained_rel) = (single / var, chained / var);
    check(
        mse12 <= 1e-3 && mse123 <= 1e-2 && single_rel >= 0.5 && chained_rel < 0.05,
        format!(
            "Sig^(12) MSE {mse12:.2e}, Sig^(123) MSE {mse123:.2e}; antisymmetric area: single layer {single_rel:.3}, chains {chained_rel:.2e} of variance"
        ),
    )
}

fn suite_ordering() -> Outcome {
    let start = Instant::now();
    let manifest = Manifest::desk(2, 10_000, 0);
    let report = run_manifest(&manifest, std::path::Path::new(".")).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let rel: Vec<String> = report
        .records
        .iter()
        .map(|r| format!("{} {:.3}", r.name, r.relative_test_mse.unwrap_or(f64::NAN)))
        .collect();
    let failed: Vec<&str> = report.thresholds.iter().filter(|t| !t.passed).map(|t| t.detail.as_str()).collect();
    check(
        report.passed() && secs < 1800.0,
        format!("relative test MSE: {}; {secs:.0}s; failed: [{}]", rel.join(", "), failed.join("; ")),
    )
}

fn gradients() -> Outcome {
    let mut r = rng(10);
    let mut worst: f64 = 0.0;
    for kind in [ModelKind::S5, ModelKind::Mamba, ModelKind::S5Stacked, ModelKind::MambaStacked] {
        let mut model = SequenceModel::new(ModelShape { kind, input_dim: 2, hidden: 4, state: 4 }, 3).unwrap();
        // perturb every parameter so the readout and gates are generic
        for p in model.params.iter_mut() {
            *p += 0.3 * r.random_range(-1.0..1.0);
        }
        let tokens: Vec<f64> = (0..9 * 2).map(|_| r.random_range(-1.0..1.0)).collect();
        worst = worst.max(gradient_check(&model, &tokens, 1e-5).unwrap());
    }
    check(worst <= 1e-4, format!("four architectures, N = 4, L = 8: worst tensor-wise rel. err {worst:.2e}"))
}

fn stability() -> Outcome {
    let mut r = rng(11);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for _ in 0..1000 {
        let n = r.random_range(1..9);
        let d = r.random_range(1..4);
        let rates: Vec<f64> = (0..n).map(|_| r.random_range(0.0..10.0)).collect();
        let p = DiagonalCdeParams::shared_decay(&rates, d, random_matrix(&mut r, n, 1, 1.0), random_matrix(&mut r, n, 1, 1.0)).unwrap();
        let steps = r.random_range(1..30);
        let mut v = vec![0.0; d];
        for k in 0..steps {
            for c in 0..d {
                let prev = v[k * d + c];
                v.push(prev + r.random_range(0.0..0.5));
            }
        }
        let omega = Path::new(steps, d, v).unwrap();
        let rep = stability_check(&p, &omega).unwrap();
        lo = lo.min(rep.min_multiplier);
        hi = hi.max(rep.max_multiplier);
    }
    check(lo > 0.0 && hi <= 1.0, format!("1000 instances, multipliers in [{lo:.3e}, {hi}]"))
}

fn determinism() -> Outcome {
    let spec = DatasetSpec::new(300, 2, 12);
    let a = gen_dataset(&spec).unwrap();
    let same_data = a == gen_dataset(&spec).unwrap();
    let init = SeededInit { seed: 4, n: 32, d0: 3, d_omega: 3, d_xi: 3 };
    let same_init = sample_lecun(&init).unwrap() == sample_lecun(&init).unwrap();
    let mut cfg = TrainConfig::desk(ModelKind::Mamba);
    cfg.steps = 20;
    cfg.log_every = 10;
    cfg.hidden = 8;
    cfg.state = 4;
    let same_train = train_model(&a, &cfg).unwrap() == train_model(&a, &cfg).unwrap();

    let paths: Vec<Path> = (0..64).map(|i| a.path(i).time_augment(false)).collect();
    let s_seq = batch::signatures(&paths, 3, Schedule::Sequential);
    let s_par = batch::signatures(&paths, 3, Schedule::Parallel);
    let sig_gap = s_seq.iter().zip(&s_par).fold(0.0f64, |m, (x, y)| m.max(x.max_abs_diff(y)));
    let params = sample_lecun(&init).unwrap();
    let x0 = [1.0, 0.0, 0.0];
    let z_seq = batch::solve_paths(&params, &paths, &x0, SolveOptions::default(), Schedule::Sequential).unwrap();
    let z_par = batch::solve_paths(&params, &paths, &x0, SolveOptions::default(), Schedule::Parallel).unwrap();
    let solve_gap = z_seq.iter().zip(&z_par).fold(0.0f64, |m, (x, y)| m.max(x.max_abs_diff(y)));
    let model = SequenceModel::new(ModelShape { kind: ModelKind::MambaStacked, input_dim: 2, hidden: 8, state: 4 }, 1).unwrap();
    let p_seq = batch::predict(&model, &a, 0..64, Schedule::Sequential).unwrap();
    let p_par = batch::predict(&model, &a, 0..64, Schedule::Parallel).unwrap();
    let pred_gap = p_seq.iter().zip(&p_par).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));

    let mut manifest = Manifest::desk(2, 200, 3);
    for run in manifest.runs.iter_mut() {
        run.steps = Some(20);
        run.hidden = Some(8);
        run.state = Some(4);
        run.log_every = Some(10);
    }
    manifest.thresholds.clear();
    let base = std::path::Path::new(".");
    let jsonl_a = run_manifest(&manifest, base).unwrap().results_jsonl();
    let jsonl_b = run_manifest(&manifest, base).unwrap().results_jsonl();
    let gap = sig_gap.max(solve_gap).max(pred_gap);
    check(
        same_data && same_init && same_train && jsonl_a == jsonl_b && gap <= 1e-12,
        format!(
            "dataset {same_data}, features {same_init}, training {same_train}, suite JSON-lines {}; parallel vs sequential max gap {gap:.1e}",
            jsonl_a == jsonl_b
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(usize, &str, fn() -> Outcome); 12] = [
        (1, "signature oracle equivalence", signature_oracle),
        (2, "S4 closed form", s4_closed_form),
        (3, "Wronskian laws", wronskian_laws),
        (4, "ZOH equivalence and Euler-input order", zoh_equivalence),
        (5, "signature-expansion truncation bound", expansion_bound),
        (6, "tensor-algebra realization", realization),
        (7, "kernel consistency", kernel_consistency),
        (8, "chaining recovery and single-layer gap", chaining),
        (9, "desk-scale model ordering", suite_ordering),
        (10, "gradient check", gradients),
        (11, "shared-decay stability", stability),
        (12, "determinism", determinism),
    ];
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut failures = 0;
    for (id, name, f) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("acceptance {id:>2} PASS {name} ({secs:.1}s): {detail}"),
            Err(detail) => {
                failures += 1;
                println!("acceptance {id:>2} FAIL {name} ({secs:.1}s): {detail}");
            }
        }
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
