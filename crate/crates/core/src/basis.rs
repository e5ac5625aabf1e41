//! P-spline basis, difference penalty and the orthogonalized smoother.
//!
//! The smoother `S(lambda) = B (B^T B + lambda P)^{-1} B^T` is factored once as
//! `S = A_S diag(1 / (1 + lambda s)) A_S^T`, where `A_S = B (B^T B)^{-1/2} U` has
//! orthonormal columns and `(U, s)` diagonalize `(B^T B)^{-1/2} P (B^T B)^{-1/2}`.
//! Only the diagonal depends on `lambda`.

use std::time::{Duration, Instant};

use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{FaceError, Result};
use crate::linalg::{inv_sqrt_sym, sym_eig, t_mul};

/// Largest `J` for which dense `J x J` helpers are allowed.
pub const EXPLICIT_THRESHOLD: usize = 2000;

/// Equally spaced B-spline basis on `[0, 1]` evaluated on a sampling grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub num_interior_knots: usize,
    /// Degree + 1.
    pub spline_order: usize,
    pub penalty_diff_order: usize,
    pub grid: Vec<f64>,
}

impl BasisSpec {
    /// Cubic splines with a second-order difference penalty.
    pub fn new(num_interior_knots: usize, grid: Vec<f64>) -> Self {
        Self {
            num_interior_knots,
            spline_order: 4,
            penalty_diff_order: 2,
            grid,
        }
    }

    /// Cubic basis on the grid `{1/J, 2/J, ..., 1}`.
    pub fn equispaced(j: usize, num_interior_knots: usize) -> Self {
        Self::new(num_interior_knots, equispaced_grid(j))
    }

    /// Number of basis functions `c`.
    pub fn num_basis(&self) -> usize {
        self.num_interior_knots + self.spline_order
    }

    pub fn grid_len(&self) -> usize {
        self.grid.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.spline_order == 0 {
            return Err(FaceError::Config("spline order must be at least 1".into()));
        }
        let c = self.num_basis();
        let j = self.grid.len();
        if c >= j {
            return Err(FaceError::Config(format!(
                "number of basis functions c = {c} must be smaller than the number of grid points J = {j}"
            )));
        }
        if self.penalty_diff_order >= c {
            return Err(FaceError::Config(format!(
                "difference order {} must be smaller than c = {c}",
                self.penalty_diff_order
            )));
        }
        for (idx, &t) in self.grid.iter().enumerate() {
            if !(0.0..=1.0).contains(&t) {
                return Err(FaceError::Config(format!("grid point {idx} = {t} lies outside [0, 1]")));
            }
        }
        if let Some(idx) = self.grid.windows(2).position(|w| w[1] <= w[0]) {
            return Err(FaceError::Config(format!(
                "grid must be strictly increasing (violated at index {})",
                idx + 1
            )));
        }
        Ok(())
    }

    /// Full knot vector: boundary knots replicated `spline_order` times at 0 and 1.
    pub fn knot_vector(&self) -> Vec<f64> {
        let k = self.num_interior_knots;
        let mut knots = vec![0.0; self.spline_order];
        knots.extend((1..=k).map(|i| i as f64 / (k + 1) as f64));
        knots.extend(std::iter::repeat_n(1.0, self.spline_order));
        knots
    }
}

/// `{1/J, 2/J, ..., 1}`.
pub fn equispaced_grid(j: usize) -> Vec<f64> {
    (1..=j).map(|i| i as f64 / j as f64).collect()
}

/// Evaluates the `order` nonzero B-splines at `t`. Returns the index of the
/// first nonzero basis function; values land in `out[..order]`.
pub(crate) fn bspline_row(knots: &[f64], order: usize, t: f64, out: &mut [f64]) -> usize {
    let p = order - 1;
    let c = knots.len() - order;
    let span = if t >= knots[c] {
        c - 1
    } else {
        // largest i in [p, c-1] with knots[i] <= t
        let upper = knots[p..=c].partition_point(|&k| k <= t);
        (p + upper).saturating_sub(1).clamp(p, c - 1)
    };
    let mut left = vec![0.0; order];
    let mut right = vec![0.0; order];
    out[0] = 1.0;
    for j in 1..=p {
        left[j] = t - knots[span + 1 - j];
        right[j] = knots[span + j] - t;
        let mut saved = 0.0;
        for r in 0..j {
            let denom = right[r + 1] + left[j - r];
            let temp = if denom == 0.0 { 0.0 } else { out[r] / denom };
            out[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        out[j] = saved;
    }
    span - p
}

/// `J x c` design matrix with entries `B_k(t_j)`.
pub fn bspline_design(spec: &BasisSpec) -> Result<Mat<f64>> {
    spec.validate()?;
    let knots = spec.knot_vector();
    let order = spec.spline_order;
    let mut b = Mat::<f64>::zeros(spec.grid.len(), spec.num_basis());
    let mut vals = vec![0.0; order];
    for (j, &t) in spec.grid.iter().enumerate() {
        let first = bspline_row(&knots, order, t, &mut vals);
        for (k, v) in vals.iter().enumerate() {
            b[(j, first + k)] = *v;
        }
    }
    Ok(b)
}

/// `P = D_m^T D_m` for the order-`m` difference operator on `c` coefficients.
pub fn difference_penalty(c: usize, diff_order: usize) -> Result<Mat<f64>> {
    if diff_order >= c {
        return Err(FaceError::Config(format!(
            "difference order {diff_order} must be smaller than c = {c}"
        )));
    }
    // rows of D_m via repeated differencing of the identity
    let mut d: Vec<Vec<f64>> = (0..c)
        .map(|i| (0..c).map(|k| if i == k { 1.0 } else { 0.0 }).collect())
        .collect();
    for _ in 0..diff_order {
        d = d.windows(2).map(|w| w[1].iter().zip(&w[0]).map(|(a, b)| a - b).collect()).collect();
    }
    let dm = Mat::from_fn(d.len(), c, |i, k| d[i][k]);
    Ok(t_mul(dm.as_ref(), dm.as_ref()))
}

/// The lambda-independent factorization of the P-spline smoother.
#[derive(Debug, Clone)]
pub struct SmootherFactor {
    a_s: Mat<f64>,
    s: Vec<f64>,
    basis: BasisSpec,
    timings: [Duration; 2],
}

impl SmootherFactor {
    /// `J x c` matrix with orthonormal columns.
    pub fn a_s(&self) -> MatRef<'_, f64> {
        self.a_s.as_ref()
    }

    /// Penalty spectrum, nonnegative.
    pub fn s(&self) -> &[f64] {
        &self.s
    }

    pub fn basis(&self) -> &BasisSpec {
        &self.basis
    }

    pub fn grid_len(&self) -> usize {
        self.a_s.nrows()
    }

    pub fn num_basis(&self) -> usize {
        self.a_s.ncols()
    }

    /// Wall time of the two construction steps (penalty decomposition, `A_S`).
    pub fn timings(&self) -> [Duration; 2] {
        self.timings
    }

    /// Diagonal of `Sigma_S = (I + lambda diag(s))^{-1}`.
    pub fn shrinkage(&self, lambda: f64) -> Vec<f64> {
        self.s.iter().map(|s| 1.0 / (1.0 + lambda * s)).collect()
    }

    /// `tr(S(lambda))`.
    pub fn trace(&self, lambda: f64) -> f64 {
        self.shrinkage(lambda).iter().sum()
    }

    /// Dense `J x J` smoother, for diagnostics on small grids only.
    pub fn explicit_smoother(&self, lambda: f64) -> Result<Mat<f64>> {
        let j = self.grid_len();
        if j > EXPLICIT_THRESHOLD {
            return Err(FaceError::TooLarge(format!(
                "dense smoother requested for J = {j} > {EXPLICIT_THRESHOLD}"
            )));
        }
        let shrink = self.shrinkage(lambda);
        let a = self.a_s.as_ref();
        let scaled = Mat::from_fn(j, shrink.len(), |i, k| a[(i, k)] * shrink[k]);
        Ok(scaled.as_ref() * a.transpose())
    }
}

/// Builds `(A_S, s)` for a basis.
pub fn factorize_smoother(spec: &BasisSpec) -> Result<SmootherFactor> {
    let t0 = Instant::now();
    let b = bspline_design(spec)?;
    let p = difference_penalty(spec.num_basis(), spec.penalty_diff_order)?;
    let btb = t_mul(b.as_ref(), b.as_ref());
    let w = inv_sqrt_sym(btb.as_ref())?;
    let sandwich = w.as_ref() * p.as_ref() * w.as_ref();
    let sandwich = Mat::from_fn(sandwich.nrows(), sandwich.ncols(), |i, j| {
        0.5 * (sandwich[(i, j)] + sandwich[(j, i)])
    });
    let eig = sym_eig(sandwich.as_ref())?;
    let mut s: Vec<f64> = eig.values.iter().map(|v| v.max(0.0)).collect();
    // the penalty null space has exactly `diff_order` dimensions; rounding
    // leaves ~1e-16 there, which lambda would otherwise amplify
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[a].total_cmp(&s[b]));
    for &k in order.iter().take(spec.penalty_diff_order) {
        s[k] = 0.0;
    }
    let t1 = Instant::now();
    let wu = w.as_ref() * eig.vectors.as_ref();
    let a_s = b.as_ref() * wu.as_ref();
    let t2 = Instant::now();
    Ok(SmootherFactor {
        a_s,
        s,
        basis: spec.clone(),
        timings: [t1 - t0, t2 - t1],
    })
}
