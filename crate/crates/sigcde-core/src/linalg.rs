//! Dense matrix helpers: Padé matrix exponential, the `phi_1` function,
//! Taylor exponential actions and least-squares solves.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Below this 1-norm `phi_1` and the exponential are summed as Taylor series.
pub const SMALL_NORM: f64 = 1e-2;

const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.53939833006323e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068),
];
const THETA_13: f64 = 5.371920351148152;

const PADE_3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE_5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE_7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE_9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE_13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Maximum absolute column sum.
pub fn norm1(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn norm_inf_vec(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| f64::max(m, x.abs()))
}

/// Largest singular value.
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone().singular_values().max()
}

fn pade_low(a: &DMatrix<f64>, b: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let a2 = a * a;
    let mut u = DMatrix::identity(n, n) * b[1];
    let mut v = DMatrix::identity(n, n) * b[0];
    let mut p = DMatrix::identity(n, n);
    for k in 1..b.len() / 2 {
        p = &p * &a2;
        u += &p * b[2 * k + 1];
        v += &p * b[2 * k];
    }
    (a * u, v)
}

fn pade_13(a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let b = &PADE_13;
    let id = DMatrix::<f64>::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = &a6 * b[13] + &a4 * b[11] + &a2 * b[9];
    let u = a * (&a6 * inner_u + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &id * b[1]);
    let inner_v = &a6 * b[12] + &a4 * b[10] + &a2 * b[8];
    let v = &a6 * inner_v + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &id * b[0];
    (u, v)
}

/// Matrix exponential by scaling and squaring with a degree-13 (or lower)
/// Padé approximant.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let norm = norm1(a);
    if !norm.is_finite() {
        return DMatrix::from_element(n, n, f64::NAN);
    }
    let mut squarings = 0u32;
    let (u, v) = if let Some(&(m, _)) = THETA.iter().find(|(_, th)| norm <= *th) {
        let coeffs: &[f64] = match m {
            3 => &PADE_3,
            5 => &PADE_5,
            7 => &PADE_7,
            _ => &PADE_9,
        };
        pade_low(a, coeffs)
    } else {
        if norm > THETA_13 {
            squarings = libm::ceil(libm::log2(norm / THETA_13)) as u32;
        }
        let scaled = a * libm::ldexp(1.0, -(squarings as i32));
        pade_13(&scaled)
    };
    let p = &v + &u;
    let q = &v - &u;
    let mut r = match q.lu().solve(&p) {
        Some(r) => r,
        None => return DMatrix::from_element(n, n, f64::NAN),
    };
    for _ in 0..squarings {
        r = &r * &r;
    }
    r
}

fn phi1_taylor(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut sum = DMatrix::<f64>::identity(n, n);
    let mut term = DMatrix::<f64>::identity(n, n);
    for k in 2..40 {
        term = (&term * a) / k as f64;
        let size = norm1(&term);
        sum += &term;
        if size <= f64::EPSILON * 1e-2 {
            break;
        }
    }
    sum
}

/// Returns `(exp(a), phi_1(a))` with `phi_1(a) = sum_k a^k / (k+1)!`.
///
/// Small arguments use the Taylor series; otherwise both blocks are read off
/// `exp([[a, I], [0, 0]])`, which needs no inverse of `a`.
pub fn expm_phi1(a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    if norm1(a) < SMALL_NORM {
        let phi = phi1_taylor(a);
        let e = DMatrix::identity(n, n) + a * &phi;
        return (e, phi);
    }
    let mut big = DMatrix::<f64>::zeros(2 * n, 2 * n);
    big.view_mut((0, 0), (n, n)).copy_from(a);
    big.view_mut((0, n), (n, n)).fill_with_identity();
    let eb = expm(&big);
    (
        eb.view((0, 0), (n, n)).into_owned(),
        eb.view((0, n), (n, n)).into_owned(),
    )
}

pub fn phi1(a: &DMatrix<f64>) -> DMatrix<f64> {
    expm_phi1(a).1
}

/// Scalar `phi_1(x) = (e^x - 1) / x`, continuous at zero.
pub fn phi1_scalar(x: f64) -> f64 {
    if x.abs() < 1e-5 {
        1.0 + x * (0.5 + x * (1.0 / 6.0 + x / 24.0))
    } else {
        libm::expm1(x) / x
    }
}

/// Derivative of [`phi1_scalar`].
pub fn phi1_scalar_deriv(x: f64) -> f64 {
    if x.abs() < 1e-3 {
        0.5 + x * (1.0 / 3.0 + x * (1.0 / 8.0 + x / 30.0))
    } else {
        (x * libm::exp(x) - libm::expm1(x)) / (x * x)
    }
}

/// Overwrites `z` with `exp(m) z + phi_1(m) f` using a substepped Taylor
/// series on the augmented system; only matrix-vector products are used.
pub fn affine_exp_action(m: &DMatrix<f64>, f: &DVector<f64>, z: &mut DVector<f64>) {
    let n = z.len();
    let norm = norm1(m);
    let substeps = if norm.is_finite() {
        libm::ceil(norm / 2.0).max(1.0) as usize
    } else {
        1
    };
    let h = 1.0 / substeps as f64;
    let mut w = DVector::<f64>::zeros(n);
    let mut next = DVector::<f64>::zeros(n);
    for _ in 0..substeps {
        w.copy_from(f);
        w.gemv(h, m, z, h);
        let mut sum = z.clone();
        sum += &w;
        let mut quiet = 0;
        for k in 2..80 {
            next.gemv(h / k as f64, m, &w, 0.0);
            core::mem::swap(&mut w, &mut next);
            sum += &w;
            let scale = norm_inf_vec(sum.as_slice()).max(f64::MIN_POSITIVE);
            if norm_inf_vec(w.as_slice()) <= 1e-18 * scale {
                quiet += 1;
                if quiet == 2 {
                    break;
                }
            } else {
                quiet = 0;
            }
        }
        z.copy_from(&sum);
    }
}

/// Least squares by SVD with relative singular-value cutoff `rcond`.
/// Returns the minimum-norm solution and the condition number of `a`.
pub fn lstsq_svd(a: &DMatrix<f64>, b: &DVector<f64>, rcond: f64) -> Result<(DVector<f64>, f64)> {
    if a.nrows() != b.len() {
        return Err(Error::Shape {
            context: "least-squares right-hand side",
            expected: a.nrows(),
            found: b.len(),
        });
    }
    if a.ncols() == 0 {
        return Ok((DVector::zeros(0), 1.0));
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    let eps = (rcond * smax).max(f64::MIN_POSITIVE);
    let x = svd.solve(b, eps).map_err(|_| Error::Singular("svd solve"))?;
    Ok((x, cond))
}
