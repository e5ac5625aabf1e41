//! Dense linear-algebra kernels.
//!
//! Thin contracts over `faer`: eigenvalues and singular values always come
//! back sorted in descending order, and inputs are validated for finiteness
//! (and symmetry, where required) before they reach the factorizations.
//! No sign convention is imposed on eigen/singular vectors.

use faer::{Mat, MatRef, Side};

use crate::error::{FaceError, Result};

/// Relative symmetry tolerance accepted by [`sym_eig`] and [`inv_sqrt_sym`].
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Scale-invariant singularity cutoff for [`inv_sqrt_sym`], relative to the
/// largest eigenvalue.
pub const RANK_TOL: f64 = 1e-12;

/// Symmetric eigendecomposition `M = V diag(values) V^T`.
#[derive(Debug, Clone)]
pub struct SymEig {
    /// Orthonormal eigenvectors, one per column.
    pub vectors: Mat<f64>,
    /// Eigenvalues, descending.
    pub values: Vec<f64>,
}

/// Thin singular value decomposition `M = L diag(singular_values) R^T`.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub left: Mat<f64>,
    /// Nonnegative, descending.
    pub singular_values: Vec<f64>,
    pub right: Mat<f64>,
}

pub fn check_finite(m: MatRef<'_, f64>) -> Result<()> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if !m[(i, j)].is_finite() {
                return Err(FaceError::NonFinite { row: i, col: j });
            }
        }
    }
    Ok(())
}

fn check_nonempty(m: MatRef<'_, f64>) -> Result<()> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(FaceError::InvalidInput(format!(
            "matrix must be at least 1x1, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

/// Largest absolute entry.
pub fn max_abs(m: MatRef<'_, f64>) -> f64 {
    let mut out = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            out = out.max(m[(i, j)].abs());
        }
    }
    out
}

/// Squared Frobenius norm.
pub fn frob2(m: MatRef<'_, f64>) -> f64 {
    let mut acc = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let v = m[(i, j)];
            acc += v * v;
        }
    }
    acc
}

pub(crate) fn check_symmetric(m: MatRef<'_, f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(FaceError::Dimension(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let n = m.nrows();
    let mut asym = 0.0f64;
    for j in 0..n {
        for i in (j + 1)..n {
            asym = asym.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    let tolerance = SYMMETRY_TOL * max_abs(m).max(f64::MIN_POSITIVE);
    if asym > tolerance {
        return Err(FaceError::NotSymmetric {
            asymmetry: asym,
            tolerance,
        });
    }
    Ok(())
}

/// Eigendecomposition of a symmetric matrix, eigenvalues descending.
pub fn sym_eig(m: MatRef<'_, f64>) -> Result<SymEig> {
    check_nonempty(m)?;
    check_finite(m)?;
    check_symmetric(m)?;
    let n = m.nrows();
    // symmetrize so both triangles contribute equally
    let sym = Mat::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]));
    let evd = sym
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| FaceError::Decomposition(format!("{e:?}")))?;
    let s = evd.S().column_vector();
    let u = evd.U();
    // faer returns ascending order
    let values: Vec<f64> = (0..n).rev().map(|k| s[k]).collect();
    let vectors = Mat::from_fn(n, n, |i, k| u[(i, n - 1 - k)]);
    Ok(SymEig { vectors, values })
}

/// Thin SVD of an arbitrary finite matrix.
pub fn thin_svd(m: MatRef<'_, f64>) -> Result<ThinSvd> {
    check_nonempty(m)?;
    check_finite(m)?;
    let svd = m
        .thin_svd()
        .map_err(|e| FaceError::Decomposition(format!("{e:?}")))?;
    let sv = svd.S().column_vector();
    let singular_values = (0..sv.nrows()).map(|k| sv[k].max(0.0)).collect();
    Ok(ThinSvd {
        left: svd.U().to_owned(),
        singular_values,
        right: svd.V().to_owned(),
    })
}

/// Symmetric inverse square root `W` of an SPD matrix, so that `W M W = I`.
pub fn inv_sqrt_sym(m: MatRef<'_, f64>) -> Result<Mat<f64>> {
    let eig = sym_eig(m)?;
    let n = eig.values.len();
    let largest = eig.values[0];
    let tolerance = RANK_TOL * largest.abs().max(f64::MIN_POSITIVE);
    if let Some(index) = eig.values.iter().position(|&v| v <= tolerance) {
        return Err(FaceError::Singular {
            index,
            value: eig.values[index],
            tolerance,
        });
    }
    let scale: Vec<f64> = eig.values.iter().map(|v| v.sqrt().recip()).collect();
    let v = eig.vectors.as_ref();
    let scaled = Mat::from_fn(n, n, |i, k| v[(i, k)] * scale[k]);
    Ok(scaled.as_ref() * v.transpose())
}

/// `a^T b`.
pub fn t_mul(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Mat<f64> {
    a.transpose() * b
}

/// Solve the SPD system `m x = rhs`, adding diagonal jitter when the
/// Cholesky factorization fails. Returns the solution and whether jitter
/// was needed.
pub fn solve_spd(m: MatRef<'_, f64>, rhs: MatRef<'_, f64>, jitter: f64) -> Result<(Mat<f64>, bool)> {
    use faer::linalg::solvers::Solve;
    if let Ok(llt) = m.llt(Side::Lower) {
        return Ok((llt.solve(rhs), false));
    }
    let n = m.nrows();
    let scale = (0..n).map(|i| m[(i, i)].abs()).fold(0.0f64, f64::max).max(1.0);
    let mut shifted = m.to_owned();
    for i in 0..n {
        shifted[(i, i)] += jitter * scale;
    }
    let llt = shifted
        .llt(Side::Lower)
        .map_err(|e| FaceError::Decomposition(format!("Cholesky failed after jitter: {e:?}")))?;
    Ok((llt.solve(rhs), true))
}
