//! FACE for covariances of the form `Y H Y^T`.
//!
//! With `H_1 H_1^T = H_+` (the positive part of `H`), smoothing `Y H_+ Y^T`
//! is plain FACE on the transformed curves `Z = Y H_1` with unit divisor.

use faer::Mat;

use crate::basis::SmootherFactor;
use crate::error::{FaceError, Result};
use crate::face::{center_columns, fit_centered, DataMatrix, FaceConfig, FaceFit};
use crate::linalg::{check_finite, check_symmetric, sym_eig};

/// Eigenvalues at or below this fraction of the largest are dropped from `H`.
pub const POSITIVE_PART_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct StructuredDesign {
    h: Mat<f64>,
    pub label: String,
}

impl StructuredDesign {
    pub fn new(h: Mat<f64>, label: impl Into<String>) -> Result<Self> {
        if h.nrows() != h.ncols() || h.nrows() == 0 {
            return Err(FaceError::Dimension(format!(
                "design matrix must be square and nonempty, got {}x{}",
                h.nrows(),
                h.ncols()
            )));
        }
        check_finite(h.as_ref())?;
        check_symmetric(h.as_ref())?;
        Ok(Self { h, label: label.into() })
    }

    pub fn h(&self) -> &Mat<f64> {
        &self.h
    }

    pub fn dim(&self) -> usize {
        self.h.nrows()
    }
}

/// `H_1 = V_+ diag(sqrt(d_+))` over the eigenvalues above
/// [`POSITIVE_PART_TOL`] times the largest.
pub fn psd_factor(design: &StructuredDesign) -> Result<Mat<f64>> {
    let eig = sym_eig(design.h.as_ref())?;
    let top = eig.values[0];
    if top <= 0.0 {
        return Err(FaceError::NoSignal(format!(
            "design '{}' has no positive eigenvalues",
            design.label
        )));
    }
    let r = eig.values.iter().take_while(|&&v| v > POSITIVE_PART_TOL * top).count();
    let v = eig.vectors.as_ref();
    Ok(Mat::from_fn(design.dim(), r, |i, k| v[(i, k)] * eig.values[k].sqrt()))
}

/// `H_X` and `H_U` for `I` paired curves with columns ordered `[Y_A | Y_C]`:
/// `H_X = (1/2I) [[0, I], [I, 0]]`, `H_U = (1/2I) [[I, -I], [-I, I]]`.
pub fn build_pair_designs(n_pairs: usize) -> Result<(StructuredDesign, StructuredDesign)> {
    if n_pairs == 0 {
        return Err(FaceError::InvalidInput("need at least one pair".into()));
    }
    let n = 2 * n_pairs;
    let w = 1.0 / n as f64;
    let hx = Mat::from_fn(n, n, |i, j| if i.abs_diff(j) == n_pairs { w } else { 0.0 });
    let hu = Mat::from_fn(n, n, |i, j| {
        if i == j {
            w
        } else if i.abs_diff(j) == n_pairs {
            -w
        } else {
            0.0
        }
    });
    Ok((StructuredDesign::new(hx, "K_X")?, StructuredDesign::new(hu, "K_U")?))
}

/// FACE targeting `S (Y H Y^T)_+ S`. When `cfg.center` is set the columns of
/// `Y` are centered before the transform.
pub fn face_fit_structured(
    y: &DataMatrix,
    design: &StructuredDesign,
    factor: &SmootherFactor,
    cfg: &FaceConfig,
) -> Result<FaceFit> {
    if y.n_curves() != design.dim() {
        return Err(FaceError::Dimension(format!(
            "data has {} curves but design '{}' is {}x{}",
            y.n_curves(),
            design.label,
            design.dim(),
            design.dim()
        )));
    }
    let (mean, centered) = if cfg.center {
        center_columns(y.values())
    } else {
        (vec![0.0; y.grid_len()], y.values().to_owned())
    };
    let h1 = psd_factor(design)?;
    let z = centered.as_ref() * h1.as_ref();
    fit_centered(z.as_ref(), mean, factor, cfg, 1.0)
}
