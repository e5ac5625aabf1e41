//! FACE for curves with missing stretches.
//!
//! Missing values are initialized from a per-curve penalized spline fit to
//! the observed points (the curve's observed mean outside its observed
//! range). FACE is then fitted to the completed matrix, the missing values
//! are re-predicted from the mixed-model scores, and the two steps alternate
//! until the imputed values stop moving.

use faer::Mat;
use rayon::prelude::*;

use crate::basis::{bspline_design, difference_penalty, BasisSpec, SmootherFactor};
use crate::error::{FaceError, Result};
use crate::face::{fit_matrix, golden_section, DataMatrix, FaceConfig, FaceFit, ScoreMethod, Scores};
use crate::linalg::{inv_sqrt_sym, solve_spd, sym_eig, t_mul};

/// Minimum number of observed points per curve.
pub const MIN_OBSERVED: usize = 10;

/// Diagonal jitter, relative to the largest diagonal entry, used when a
/// per-curve normal matrix is not numerically positive definite.
pub const RIDGE_JITTER: f64 = 1e-10;

/// Observation pattern of a `J x I` matrix; `true` marks an observed entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    rows: usize,
    cols: usize,
    observed: Vec<bool>,
}

impl Mask {
    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut observed = Vec::with_capacity(rows * cols);
        for c in 0..cols {
            for r in 0..rows {
                observed.push(f(r, c));
            }
        }
        Self { rows, cols, observed }
    }

    pub fn all_observed(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            observed: vec![true; rows * cols],
        }
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn is_observed(&self, row: usize, col: usize) -> bool {
        self.observed[col * self.rows + row]
    }

    /// Observation flags of one curve.
    pub fn column(&self, col: usize) -> &[bool] {
        &self.observed[col * self.rows..(col + 1) * self.rows]
    }

    pub fn n_missing(&self) -> usize {
        self.observed.iter().filter(|o| !**o).count()
    }

    pub fn missing_fraction(&self) -> f64 {
        self.n_missing() as f64 / self.observed.len() as f64
    }
}

/// Data with missing entries. Missing cells hold `NaN`.
#[derive(Debug, Clone)]
pub struct MaskedData {
    values: Mat<f64>,
    mask: Mask,
}

impl MaskedData {
    /// Combines values and mask; entries flagged missing are overwritten
    /// with `NaN`, observed entries must be finite.
    pub fn new(mut values: Mat<f64>, mask: Mask) -> Result<Self> {
        if values.nrows() != mask.nrows() || values.ncols() != mask.ncols() {
            return Err(FaceError::Dimension(format!(
                "mask is {}x{} but data is {}x{}",
                mask.nrows(),
                mask.ncols(),
                values.nrows(),
                values.ncols()
            )));
        }
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(FaceError::InvalidInput("data matrix must be at least 1x1".into()));
        }
        for c in 0..values.ncols() {
            for r in 0..values.nrows() {
                if mask.is_observed(r, c) {
                    if !values[(r, c)].is_finite() {
                        return Err(FaceError::NonFinite { row: r, col: c });
                    }
                } else {
                    values[(r, c)] = f64::NAN;
                }
            }
        }
        let d = Self { values, mask };
        d.validate()?;
        Ok(d)
    }

    /// Treats every non-finite entry as missing.
    pub fn from_nan(values: Mat<f64>) -> Result<Self> {
        let mask = Mask::from_fn(values.nrows(), values.ncols(), |r, c| values[(r, c)].is_finite());
        Self::new(values, mask)
    }

    fn validate(&self) -> Result<()> {
        for c in 0..self.mask.ncols() {
            let n_obs = self.mask.column(c).iter().filter(|o| **o).count();
            if n_obs < MIN_OBSERVED {
                return Err(FaceError::InvalidInput(format!(
                    "curve {c} has {n_obs} observed points; at least {MIN_OBSERVED} are required"
                )));
            }
        }
        for r in 0..self.mask.nrows() {
            if !(0..self.mask.ncols()).any(|c| self.mask.is_observed(r, c)) {
                return Err(FaceError::InvalidInput(format!(
                    "grid point {r} is missing in every curve"
                )));
            }
        }
        Ok(())
    }

    pub fn values(&self) -> &Mat<f64> {
        &self.values
    }

    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    pub fn grid_len(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_curves(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_complete(&self) -> bool {
        self.mask.n_missing() == 0
    }
}

/// Convergence record of [`face_fit_incomplete`].
#[derive(Debug, Clone)]
pub struct ImputeTrace {
    pub iterations: usize,
    /// Max relative change of the imputed values, one entry per iteration.
    pub rel_changes: Vec<f64>,
    pub converged: bool,
    pub warnings: Vec<String>,
    /// The data matrix with the final imputed values filled in.
    pub completed: Mat<f64>,
}

/// Penalized spline fit of `y` observed at the rows `obs` of the design `b`,
/// with `lambda` chosen by GCV over the observed points. Returns the
/// coefficient vector.
fn fit_partial_curve(b: &Mat<f64>, p: &Mat<f64>, obs: &[usize], y: &[f64]) -> Result<Vec<f64>> {
    let c = b.ncols();
    let n = obs.len();
    let bo = Mat::from_fn(n, c, |i, k| b[(obs[i], k)]);
    let g = t_mul(bo.as_ref(), bo.as_ref());
    let tr_g: f64 = (0..c).map(|k| g[(k, k)]).sum();
    let tr_p: f64 = (0..c).map(|k| p[(k, k)]).sum();
    let tau = tr_g / tr_p;
    // W = (G + tau P)^{-1/2}; W G W = U diag(d) U^T with d in [0, 1] and
    // G + lambda P = W^{-1} U diag(d + (lambda / tau)(1 - d)) U^T W^{-1}
    let w = inv_sqrt_sym((&g + p * tau).as_ref())?;
    let wgw = w.as_ref() * g.as_ref() * w.as_ref();
    let eig = sym_eig(wgw.as_ref())?;
    let d: Vec<f64> = eig.values.iter().map(|v| v.clamp(0.0, 1.0)).collect();
    let wu = w.as_ref() * eig.vectors.as_ref();
    let yo = faer::MatRef::from_column_major_slice(y, n, 1);
    let z = t_mul(wu.as_ref(), (bo.transpose() * yo).as_ref());
    let y2: f64 = y.iter().map(|v| v * v).sum();
    let dtol = 1e-12;
    let explained: f64 = (0..c).filter(|&k| d[k] > dtol).map(|k| z[(k, 0)].powi(2) / d[k]).sum();
    let resid_out = (y2 - explained).max(0.0);
    let h = |lambda: f64| -> Vec<f64> { d.iter().map(|&dk| dk + lambda / tau * (1.0 - dk)).collect() };
    let gcv = |log_lambda: f64| -> f64 {
        let hk = h(10f64.powf(log_lambda));
        let mut rss = resid_out;
        let mut trace = 0.0;
        for k in 0..c {
            if d[k] > dtol {
                rss += z[(k, 0)].powi(2) / d[k] * (1.0 - d[k] / hk[k]).powi(2);
                trace += d[k] / hk[k];
            }
        }
        let denom = 1.0 - trace / n as f64;
        if denom <= 0.0 {
            f64::INFINITY
        } else {
            rss / (denom * denom)
        }
    };
    let grid: Vec<f64> = (0..21).map(|i| -6.0 + 14.0 * i as f64 / 20.0).collect();
    let (best, _) = grid
        .iter()
        .enumerate()
        .map(|(i, &x)| (i, gcv(x)))
        .fold((0, f64::INFINITY), |acc, cur| if cur.1 < acc.1 { cur } else { acc });
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(grid.len() - 1)];
    let (x, _) = golden_section(gcv, lo, hi, 1e-4);
    let hk = h(10f64.powf(x));
    let scaled = Mat::from_fn(c, 1, |k, _| if hk[k] > 0.0 { z[(k, 0)] / hk[k] } else { 0.0 });
    let beta = wu.as_ref() * scaled.as_ref();
    Ok((0..c).map(|k| beta[(k, 0)]).collect())
}

/// Completes the data: inside each curve's observed range missing points
/// come from a penalized spline fit to that curve's observed points (basis
/// orders and knots taken from `basis`); outside it they are set to the
/// curve's observed mean.
pub fn initialize_missing(d: &MaskedData, basis: &BasisSpec) -> Result<DataMatrix> {
    let j = d.grid_len();
    if basis.grid_len() != j {
        return Err(FaceError::Dimension(format!(
            "basis has {} grid points, data has {j}",
            basis.grid_len()
        )));
    }
    if d.is_complete() {
        return DataMatrix::new(d.values().clone());
    }
    let b = bspline_design(basis)?;
    let p = difference_penalty(basis.num_basis(), basis.penalty_diff_order)?;
    let min_obs = MIN_OBSERVED.max(2 * basis.spline_order);
    let columns: Vec<Vec<f64>> = (0..d.n_curves())
        .into_par_iter()
        .map(|col| {
            let flags = d.mask().column(col);
            let mut out: Vec<f64> = (0..j).map(|r| d.values()[(r, col)]).collect();
            if flags.iter().all(|o| *o) {
                return Ok(out);
            }
            let obs: Vec<usize> = (0..j).filter(|&r| flags[r]).collect();
            if obs.len() < min_obs {
                return Err(FaceError::InvalidInput(format!(
                    "curve {col} has {} observed points; at least {min_obs} are required",
                    obs.len()
                )));
            }
            let yo: Vec<f64> = obs.iter().map(|&r| out[r]).collect();
            let mean = yo.iter().sum::<f64>() / yo.len() as f64;
            let (first, last) = (obs[0], obs[obs.len() - 1]);
            let interior_gap = (first..=last).any(|r| !flags[r]);
            let beta = if interior_gap {
                Some(fit_partial_curve(&b, &p, &obs, &yo)?)
            } else {
                None
            };
            for r in 0..j {
                if flags[r] {
                    continue;
                }
                out[r] = match &beta {
                    Some(beta) if r > first && r < last => (0..beta.len()).map(|k| b[(r, k)] * beta[k]).sum(),
                    _ => mean,
                };
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    DataMatrix::new(Mat::from_fn(j, d.n_curves(), |r, c| columns[c][r]))
}

/// One prediction pass.
#[derive(Debug, Clone)]
pub struct Imputation {
    /// Predicted values at the missing points of each curve, in grid order,
    /// on the original (uncentered) scale.
    pub missing_values: Vec<Vec<f64>>,
    /// Mixed-model scores (`I x N`).
    pub scores: Scores,
    /// Curves whose normal matrix needed jitter.
    pub jittered: Vec<usize>,
}

/// Predicts the missing values of every curve from `fit`. With `Psi` the
/// first `N` unit eigenvectors,
/// `xi = (J Psi_o^T Psi_o + sigma2 Sigma_N^{-1})^{-1} J^{1/2} Psi_o^T y_o` and
/// `y_mis = J^{1/2} Psi_m xi`, which for complete curves equals the BLUP scores.
/// Components with zero eigenvalue are fixed at zero.
pub fn impute_step(fit: &FaceFit, d: &MaskedData) -> Result<Imputation> {
    let j = d.grid_len();
    if fit.grid_len() != j {
        return Err(FaceError::Dimension(format!("fit has {} grid points, data has {j}", fit.grid_len())));
    }
    let n = fit.n_selected;
    if n == 0 {
        return Err(FaceError::NoSignal("fit retained no components".into()));
    }
    let active: Vec<usize> = (0..n).filter(|&k| fit.eigvals_matrix[k] > 0.0).collect();
    let na = active.len();
    let psi = fit.eigvecs.as_ref();
    let jf = j as f64;
    let sqrt_j = jf.sqrt();
    let results: Vec<(Vec<f64>, Vec<f64>, bool)> = (0..d.n_curves())
        .into_par_iter()
        .map(|col| {
            let flags = d.mask().column(col);
            let mut normal = Mat::<f64>::zeros(na, na);
            let mut rhs = Mat::<f64>::zeros(na, 1);
            for r in (0..j).filter(|&r| flags[r]) {
                let yc = d.values()[(r, col)] - fit.mean[r];
                for (a, &ka) in active.iter().enumerate() {
                    let pa = psi[(r, ka)];
                    rhs[(a, 0)] += pa * yc;
                    for (b, &kb) in active.iter().enumerate().take(a + 1) {
                        normal[(a, b)] += pa * psi[(r, kb)];
                    }
                }
            }
            for a in 0..na {
                for b in 0..a {
                    normal[(b, a)] = normal[(a, b)];
                }
            }
            for a in 0..na {
                for b in 0..na {
                    normal[(a, b)] *= jf;
                }
                normal[(a, a)] += fit.sigma2 / fit.eigvals_matrix[active[a]];
                rhs[(a, 0)] *= sqrt_j;
            }
            let (sol, jittered) = solve_spd(normal.as_ref(), rhs.as_ref(), RIDGE_JITTER)?;
            let mut xi = vec![0.0; n];
            for (a, &k) in active.iter().enumerate() {
                xi[k] = sol[(a, 0)];
            }
            let missing: Vec<f64> = (0..j)
                .filter(|&r| !flags[r])
                .map(|r| fit.mean[r] + sqrt_j * (0..n).map(|k| psi[(r, k)] * xi[k]).sum::<f64>())
                .collect();
            Ok((missing, xi, jittered))
        })
        .collect::<Result<_>>()?;
    let xi = Mat::from_fn(d.n_curves(), n, |i, k| results[i].1[k]);
    let jittered = results.iter().enumerate().filter(|(_, r)| r.2).map(|(i, _)| i).collect();
    Ok(Imputation {
        missing_values: results.into_iter().map(|r| r.0).collect(),
        scores: Scores {
            xi,
            method: ScoreMethod::Blup,
        },
        jittered,
    })
}

/// Alternates FACE fits and [`impute_step`] until the largest change of an
/// imputed value, relative to the largest imputed magnitude, drops below
/// `tol`, or `max_iter` fits have been made.
pub fn face_fit_incomplete(
    d: &MaskedData,
    factor: &SmootherFactor,
    cfg: &FaceConfig,
    max_iter: usize,
    tol: f64,
) -> Result<(FaceFit, ImputeTrace)> {
    if max_iter == 0 {
        return Err(FaceError::Config("max_iter must be at least 1".into()));
    }
    let mut current = initialize_missing(d, factor.basis())?.into_inner();
    let mut trace = ImputeTrace {
        iterations: 0,
        rel_changes: Vec::new(),
        converged: false,
        warnings: Vec::new(),
        completed: Mat::new(),
    };
    let j = d.grid_len();
    loop {
        let fit = fit_matrix(current.as_ref(), factor, cfg)?;
        trace.iterations += 1;
        if d.is_complete() {
            trace.converged = true;
            trace.completed = current;
            return Ok((fit, trace));
        }
        let imp = impute_step(&fit, d)?;
        if !imp.jittered.is_empty() {
            trace.warnings.push(format!(
                "iteration {}: ridge jitter added for {} curve(s)",
                trace.iterations,
                imp.jittered.len()
            ));
        }
        let mut max_delta = 0.0f64;
        let mut max_old = 0.0f64;
        for (col, values) in imp.missing_values.iter().enumerate() {
            let flags = d.mask().column(col);
            for (r, v) in (0..j).filter(|&r| !flags[r]).zip(values) {
                max_delta = max_delta.max((v - current[(r, col)]).abs());
                max_old = max_old.max(current[(r, col)].abs());
                current[(r, col)] = *v;
            }
        }
        let rel = if max_old > 0.0 { max_delta / max_old } else { max_delta };
        trace.rel_changes.push(rel);
        if rel < tol {
            trace.converged = true;
            trace.completed = current;
            return Ok((fit, trace));
        }
        if trace.iterations >= max_iter {
            trace.warnings.push(format!("no convergence after {max_iter} iterations"));
            trace.completed = current;
            return Ok((fit, trace));
        }
    }
}
