//! Error measures for covariance, eigenfunction and eigenvalue estimates.

use faer::MatRef;

use super::models::GridTruth;
use crate::error::{FaceError, Result};
use crate::linalg::t_mul;

/// `J^{-2} sum_{j,l} (Khat(t_j, t_l) - K(t_j, t_l))^2` for the low-rank
/// estimate `Khat = J V diag(eigvals_function) V^T`.
///
/// Expanded through `K = F F^T` so that only `r x r` and `T x r` products
/// are formed; the columns of `V` need not be orthogonal.
pub fn mise_covariance(eigvecs: MatRef<'_, f64>, eigvals_function: &[f64], truth: &GridTruth) -> Result<f64> {
    let j = truth.grid_len();
    if eigvecs.nrows() != j || eigvecs.ncols() != eigvals_function.len() {
        return Err(FaceError::Dimension(format!(
            "estimate is {}x{} with {} eigenvalues, truth has {j} grid points",
            eigvecs.nrows(),
            eigvecs.ncols(),
            eigvals_function.len()
        )));
    }
    let jf = j as f64;
    let mu: Vec<f64> = eigvals_function.iter().map(|l| l * jf).collect();
    let r = mu.len();
    let gram = t_mul(eigvecs, eigvecs);
    let mut est2 = 0.0;
    for a in 0..r {
        for b in 0..r {
            est2 += mu[a] * mu[b] * gram[(a, b)].powi(2);
        }
    }
    let ftv = t_mul(truth.factor().as_ref(), eigvecs);
    let mut cross = 0.0;
    for (k, m) in mu.iter().enumerate() {
        cross += m * ftv.col(k).iter().map(|x| x * x).sum::<f64>();
    }
    Ok(((est2 - 2.0 * cross + truth.k_frob2()) / (jf * jf)).max(0.0))
}

/// `J^{-1} sum_j (sqrt(J) v(t_j) s - psi_k(t_j))^2` minimized over the sign
/// `s`, for the `k`-th (1-based) true eigenfunction.
pub fn mise_eigenfunction(est_vec: &[f64], truth: &GridTruth, k: usize) -> Result<f64> {
    let j = truth.grid_len();
    if k == 0 || k > truth.eigfuncs.ncols() {
        return Err(FaceError::InvalidInput(format!(
            "eigenfunction index {k} outside 1..={}",
            truth.eigfuncs.ncols()
        )));
    }
    if est_vec.len() != j {
        return Err(FaceError::Dimension(format!("vector has {} entries, grid has {j}", est_vec.len())));
    }
    let scale = (j as f64).sqrt();
    let psi = truth.eigfuncs.col(k - 1);
    let (mut plus, mut minus) = (0.0, 0.0);
    for (v, p) in est_vec.iter().zip(psi.iter()) {
        let e = scale * v;
        plus += (e - p).powi(2);
        minus += (-e - p).powi(2);
    }
    Ok(plus.min(minus) / j as f64)
}

/// `(est / truth - 1)^2`.
pub fn amse_eigenvalue(est: f64, truth: f64) -> f64 {
    (est / truth - 1.0).powi(2)
}
