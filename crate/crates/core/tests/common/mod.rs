//! Brute-force oracles built from explicit matrices, independent of the
//! factored code paths under test.

#![allow(dead_code)]

use face_core::linalg::t_mul;
use face_core::{bspline_design, difference_penalty, BasisSpec, Mat, MatRef};
use faer::linalg::solvers::Solve;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Mat<f64> {
    Mat::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

pub fn uniform(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Mat<f64> {
    Mat::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

pub fn frob(m: MatRef<'_, f64>) -> f64 {
    let mut s = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            s += m[(i, j)] * m[(i, j)];
        }
    }
    s.sqrt()
}

pub fn max_abs_diff(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max((a[(i, j)] - b[(i, j)]).abs());
        }
    }
    m
}

/// `B (B^T B + lambda P)^{-1} B^T` by a dense LU solve.
pub fn direct_smoother(spec: &BasisSpec, lambda: f64) -> Mat<f64> {
    let b = bspline_design(spec).unwrap();
    let p = difference_penalty(spec.num_basis(), spec.penalty_diff_order).unwrap();
    let m = t_mul(b.as_ref(), b.as_ref()) + p * lambda;
    let x = m.partial_piv_lu().solve(b.transpose().to_owned());
    b.as_ref() * x.as_ref()
}

/// The same smoother from the thin QR of the augmented least-squares matrix
/// `[B; sqrt(lambda) D]`, which stays accurate for very large `lambda`.
pub fn qr_smoother(spec: &BasisSpec, lambda: f64) -> Mat<f64> {
    let b = bspline_design(spec).unwrap();
    let (j, c) = (b.nrows(), b.ncols());
    let m = spec.penalty_diff_order;
    let mut d: Vec<Vec<f64>> = (0..c).map(|i| (0..c).map(|k| f64::from(u8::from(i == k))).collect()).collect();
    for _ in 0..m {
        d = d.windows(2).map(|w| w[1].iter().zip(&w[0]).map(|(a, b)| a - b).collect()).collect();
    }
    let sl = lambda.sqrt();
    let aug = Mat::from_fn(j + d.len(), c, |r, k| if r < j { b[(r, k)] } else { sl * d[r - j][k] });
    let q = aug.qr().compute_thin_Q();
    let q1 = q.subrows(0, j);
    q1 * q1.transpose()
}

/// Row means removed.
pub fn centered(y: MatRef<'_, f64>) -> Mat<f64> {
    let n = y.ncols() as f64;
    Mat::from_fn(y.nrows(), y.ncols(), |r, c| {
        let m: f64 = (0..y.ncols()).map(|k| y[(r, k)]).sum::<f64>() / n;
        y[(r, c)] - m
    })
}

/// `S (Y_c Y_c^T / I) S`.
pub fn sandwich(s: MatRef<'_, f64>, yc: MatRef<'_, f64>) -> Mat<f64> {
    let k = (yc * yc.transpose()) * (1.0 / yc.ncols() as f64);
    s * k.as_ref() * s
}

/// `sum_i ||Y_i - S Y_i||^2 / (1 - alpha tr(S) / J)^2`.
pub fn pgcv_definition(s: MatRef<'_, f64>, y: MatRef<'_, f64>, alpha: f64) -> f64 {
    let j = y.nrows() as f64;
    let resid = y - s * y;
    let tr: f64 = (0..s.nrows()).map(|i| s[(i, i)]).sum();
    frob(resid.as_ref()).powi(2) / (1.0 - alpha * tr / j).powi(2)
}

/// `V diag(d) V^T`.
pub fn low_rank(v: MatRef<'_, f64>, d: &[f64]) -> Mat<f64> {
    let vd = Mat::from_fn(v.nrows(), d.len(), |i, k| v[(i, k)] * d[k]);
    vd.as_ref() * v.subcols(0, d.len()).transpose()
}

/// Scores by the Riemann sum `J^{-1} sum_j Y_i(t_j) psi_k(t_j)`, with
/// `psi_k = sqrt(J) v_k`.
pub fn riemann_scores(yc: MatRef<'_, f64>, v: MatRef<'_, f64>, n: usize) -> Mat<f64> {
    let j = yc.nrows();
    let jf = j as f64;
    Mat::from_fn(yc.ncols(), n, |i, k| {
        (0..j).map(|r| yc[(r, i)] * v[(r, k)] * jf.sqrt()).sum::<f64>() / jf
    })
}

/// Mixed-model BLUP through the explicit `J x J` inverse:
/// `J^{-1/2} Sigma V^T (V Sigma V^T + sigma2 / J I)^{-1} Y_i`.
pub fn dense_blup(yc: MatRef<'_, f64>, v: MatRef<'_, f64>, sigma: &[f64], sigma2: f64) -> Mat<f64> {
    let j = yc.nrows();
    let n = sigma.len();
    let jf = j as f64;
    let mut cov = low_rank(v, sigma);
    for r in 0..j {
        cov[(r, r)] += sigma2 / jf;
    }
    let solved = cov.partial_piv_lu().solve(yc.to_owned());
    let proj = v.subcols(0, n).transpose() * solved.as_ref();
    Mat::from_fn(yc.ncols(), n, |i, k| sigma[k] * proj[(k, i)] / jf.sqrt())
}

/// Minimizer of a convex quadratic `f` in `n` variables recovered from
/// finite differences of `f` alone (exact for quadratics up to rounding).
pub fn quadratic_minimizer(n: usize, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let h = 1.0;
    let zero = vec![0.0; n];
    let f0 = f(&zero);
    let unit = |a: usize, s: f64| {
        let mut x = vec![0.0; n];
        x[a] = s;
        x
    };
    let mut hess = Mat::<f64>::zeros(n, n);
    let mut grad = Mat::<f64>::zeros(n, 1);
    for a in 0..n {
        let fp = f(&unit(a, h));
        let fm = f(&unit(a, -h));
        grad[(a, 0)] = (fp - fm) / (2.0 * h);
        hess[(a, a)] = (fp - 2.0 * f0 + fm) / (h * h);
        for b in 0..a {
            let mut x = vec![0.0; n];
            x[a] = h;
            x[b] = h;
            let fab = f(&x);
            let v = (fab - f(&unit(a, h)) - f(&unit(b, h)) + f0) / (h * h);
            hess[(a, b)] = v;
            hess[(b, a)] = v;
        }
    }
    let step = hess.partial_piv_lu().solve(grad);
    (0..n).map(|a| -step[(a, 0)]).collect()
}
