//! Baseline estimators: SSVD (decompose, then smooth the singular vectors)
//! and S-Smooth (smooth every curve, then decompose).

use faer::{Mat, MatRef};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{factorize_smoother, BasisSpec, SmootherFactor};
use crate::error::{FaceError, Result};
use crate::face::{center_columns, select_lambda, select_n_components, DataMatrix, PgcvStats, SearchSpec, RANK_REL_TOL};
use crate::linalg::{frob2, thin_svd};

/// Upper bound on the number of interior knots of the univariate smoother.
pub const MAX_UNIVARIATE_KNOTS: usize = 200;

/// Richly knotted P-spline for single curves, with `lambda` chosen per curve
/// by GCV.
#[derive(Debug, Clone)]
pub struct UnivariateSmoother {
    factor: SmootherFactor,
    pub gcv_alpha: f64,
    pub search: SearchSpec,
}

impl UnivariateSmoother {
    /// `min(J / 4, 200)` interior knots on the grid `{1/J, ..., 1}`.
    pub fn for_grid_len(j: usize) -> Result<Self> {
        let knots = (j / 4).clamp(1, MAX_UNIVARIATE_KNOTS);
        Self::with_basis(&BasisSpec::equispaced(j, knots), 1.0)
    }

    pub fn with_basis(spec: &BasisSpec, gcv_alpha: f64) -> Result<Self> {
        if gcv_alpha < 1.0 {
            return Err(FaceError::InvalidInput(format!("gcv_alpha must be >= 1, got {gcv_alpha}")));
        }
        Ok(Self {
            factor: factorize_smoother(spec)?,
            gcv_alpha,
            search: SearchSpec::default(),
        })
    }

    pub fn factor(&self) -> &SmootherFactor {
        &self.factor
    }

    pub fn grid_len(&self) -> usize {
        self.factor.grid_len()
    }

    /// Smoothed curve and the selected `lambda`.
    pub fn smooth(&self, y: &[f64]) -> Result<(Vec<f64>, f64)> {
        let j = self.grid_len();
        if y.len() != j {
            return Err(FaceError::Dimension(format!("curve has {} points, smoother expects {j}", y.len())));
        }
        if let Some(pos) = y.iter().position(|v| !v.is_finite()) {
            return Err(FaceError::NonFinite { row: pos, col: 0 });
        }
        let col = MatRef::from_column_major_slice(y, j, 1);
        let a = self.factor.a_s();
        let coef = a.transpose() * col;
        let stats = PgcvStats::with_residual(col, coef.as_ref(), &self.factor);
        let lambda = if stats.y_frob2 == 0.0 {
            0.0
        } else {
            select_lambda(&stats, self.factor.s(), self.gcv_alpha, &self.search)?.lambda
        };
        let shrink = self.factor.shrinkage(lambda);
        let scaled = Mat::from_fn(coef.nrows(), 1, |k, _| coef[(k, 0)] * shrink[k]);
        let fitted = a * scaled.as_ref();
        Ok(((0..j).map(|r| fitted[(r, 0)]).collect(), lambda))
    }
}

/// `S_lambda* y` with `lambda*` minimizing the univariate GCV.
pub fn smooth_curve(y: &[f64], sm: &UnivariateSmoother) -> Result<Vec<f64>> {
    sm.smooth(y).map(|(v, _)| v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AltMethod {
    Ssvd,
    SSmooth,
    /// Plain SVD without smoothing.
    Raw,
}

#[derive(Debug, Clone)]
pub struct AltFit {
    pub method: AltMethod,
    /// `J x r`, unit-norm columns (orthogonal only for S-Smooth and raw).
    pub eigvecs: Mat<f64>,
    pub eigvals_matrix: Vec<f64>,
    pub eigvals_function: Vec<f64>,
    /// `N` from the 95% rule on the reported eigenvalues.
    pub n_selected: usize,
    pub mean: Vec<f64>,
}

impl AltFit {
    pub fn rank(&self) -> usize {
        self.eigvals_matrix.len()
    }
}

fn prepare(y: &DataMatrix, center: bool) -> (Vec<f64>, Mat<f64>) {
    if center {
        center_columns(y.values())
    } else {
        (vec![0.0; y.grid_len()], y.values().to_owned())
    }
}

fn numerical_rank(values: &[f64]) -> usize {
    let top = values.first().copied().unwrap_or(0.0);
    values.iter().take_while(|&&v| v > RANK_REL_TOL * top && v > 0.0).count()
}

fn finish(method: AltMethod, eigvecs: Mat<f64>, eigvals_matrix: Vec<f64>, j: usize, mean: Vec<f64>) -> AltFit {
    let eigvals_function = eigvals_matrix.iter().map(|v| v / j as f64).collect();
    let n_selected = select_n_components(&eigvals_matrix);
    AltFit {
        method,
        eigvecs,
        eigvals_matrix,
        eigvals_function,
        n_selected,
        mean,
    }
}

/// Number of components kept by default: the 95% rule on `D^2 / I`.
fn default_keep(svals: &[f64], n: usize) -> usize {
    let ev: Vec<f64> = svals.iter().map(|s| s * s / n as f64).collect();
    select_n_components(&ev).max(1)
}

/// Unsmoothed SVD of the data, `keep` leading components (95% rule if `None`).
pub fn raw_svd_fit(y: &DataMatrix, keep: Option<usize>, center: bool) -> Result<AltFit> {
    let (mean, centered) = prepare(y, center);
    let (j, n) = (y.grid_len(), y.n_curves());
    let svd = thin_svd(centered.as_ref())?;
    let keep = resolve_keep(keep, &svd.singular_values, n, j)?;
    let eigvecs = svd.left.as_ref().subcols(0, keep).to_owned();
    let eigvals = svd.singular_values[..keep].iter().map(|s| s * s / n as f64).collect();
    Ok(finish(AltMethod::Raw, eigvecs, eigvals, j, mean))
}

fn resolve_keep(keep: Option<usize>, svals: &[f64], n: usize, j: usize) -> Result<usize> {
    if svals.first().is_none_or(|s| *s == 0.0) {
        return Err(FaceError::NoSignal("data matrix is zero after centering".into()));
    }
    match keep {
        Some(0) => Err(FaceError::InvalidInput("keep must be at least 1".into())),
        Some(k) if k > n.min(j) => Err(FaceError::InvalidInput(format!(
            "keep = {k} exceeds min(I, J) = {}",
            n.min(j)
        ))),
        Some(k) => Ok(k),
        None => Ok(default_keep(svals, n)),
    }
}

/// SSVD: thin SVD of `Y`, smooth the leading `keep` left singular vectors and
/// rescale them to unit length. Eigenvalues are `D^2 / I`, untouched by the
/// smoothing.
pub fn ssvd_fit(y: &DataMatrix, keep: Option<usize>, sm: &UnivariateSmoother, center: bool) -> Result<AltFit> {
    let (mean, centered) = prepare(y, center);
    let (j, n) = (y.grid_len(), y.n_curves());
    let svd = thin_svd(centered.as_ref())?;
    let keep = resolve_keep(keep, &svd.singular_values, n, j)?;
    let smoothed: Vec<Vec<f64>> = (0..keep)
        .into_par_iter()
        .map(|k| {
            let u: Vec<f64> = svd.left.col(k).iter().copied().collect();
            let mut v = smooth_curve(&u, sm)?;
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                v.iter_mut().for_each(|x| *x /= norm);
            }
            Ok(v)
        })
        .collect::<Result<_>>()?;
    let eigvecs = Mat::from_fn(j, keep, |r, k| smoothed[k][r]);
    let eigvals = svd.singular_values[..keep].iter().map(|s| s * s / n as f64).collect();
    Ok(finish(AltMethod::Ssvd, eigvecs, eigvals, j, mean))
}

/// S-Smooth: smooth each curve, then take the SVD of the smoothed matrix.
pub fn s_smooth_fit(y: &DataMatrix, sm: &UnivariateSmoother, center: bool) -> Result<AltFit> {
    let (j, n) = (y.grid_len(), y.n_curves());
    let columns: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let col: Vec<f64> = y.values().col(i).iter().copied().collect();
            smooth_curve(&col, sm)
        })
        .collect::<Result<_>>()?;
    let smoothed = Mat::from_fn(j, n, |r, i| columns[i][r]);
    let (mean, centered) = if center {
        center_columns(smoothed.as_ref())
    } else {
        (vec![0.0; j], smoothed)
    };
    if frob2(centered.as_ref()) == 0.0 {
        return Err(FaceError::NoSignal("smoothed data are zero after centering".into()));
    }
    let svd = thin_svd(centered.as_ref())?;
    let values: Vec<f64> = svd.singular_values.iter().map(|s| s * s / n as f64).collect();
    let r = numerical_rank(&values).min(n.min(j));
    let eigvecs = svd.left.as_ref().subcols(0, r).to_owned();
    Ok(finish(AltMethod::SSmooth, eigvecs, values[..r].to_vec(), j, mean))
}
