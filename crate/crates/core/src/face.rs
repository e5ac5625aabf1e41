//! The FACE estimator.
//!
//! Given a factored smoother (steps 1-2, see [`crate::basis`]) the pipeline is
//!
//! 3. project the centered data, `Ytilde = A_S^T Y`;
//! 4. choose `lambda` by minimizing the pooled GCV, evaluated in `O(c)` per
//!    candidate from `diag(Ytilde Ytilde^T)` and two Frobenius norms;
//! 5. form the shrinkage `Sigma_S = (I + lambda diag(s))^{-1}`;
//! 6. eigendecompose the `c x c` matrix `Sigma_S Ytilde Ytilde^T Sigma_S / I`;
//! 7. map the eigenvectors back through `A_S`.
//!
//! The smoothed covariance `S (Y Y^T / I) S` is never formed.

use std::time::{Duration, Instant};

use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::basis::{SmootherFactor, EXPLICIT_THRESHOLD};
use crate::error::{FaceError, Result};
use crate::linalg::{check_finite, frob2, sym_eig, t_mul};

/// Fraction of the total eigenvalue mass retained when choosing `N`.
pub const VARIANCE_EXPLAINED: f64 = 0.95;

/// Eigenvalues below this fraction of the largest are treated as zero.
pub const RANK_REL_TOL: f64 = 1e-10;

/// A complete `J x I` data matrix, one curve per column.
#[derive(Debug, Clone)]
pub struct DataMatrix {
    values: Mat<f64>,
}

impl DataMatrix {
    pub fn new(values: Mat<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(FaceError::InvalidInput("data matrix must be at least 1x1".into()));
        }
        check_finite(values.as_ref())?;
        Ok(Self { values })
    }

    pub fn values(&self) -> MatRef<'_, f64> {
        self.values.as_ref()
    }

    pub fn into_inner(self) -> Mat<f64> {
        self.values
    }

    /// `J`.
    pub fn grid_len(&self) -> usize {
        self.values.nrows()
    }

    /// `I`.
    pub fn n_curves(&self) -> usize {
        self.values.ncols()
    }
}

/// Mean across subjects (row means) and the centered copy of `y`.
pub fn center_columns(y: MatRef<'_, f64>) -> (Vec<f64>, Mat<f64>) {
    let (j, i) = (y.nrows(), y.ncols());
    let mean: Vec<f64> = (0..j)
        .map(|r| (0..i).map(|c| y[(r, c)]).sum::<f64>() / i as f64)
        .collect();
    let centered = Mat::from_fn(j, i, |r, c| y[(r, c)] - mean[r]);
    (mean, centered)
}

/// How the smoothing parameter is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SearchSpec {
    /// Grid scan over `log10(lambda)` followed by golden-section refinement
    /// around the best grid point.
    Optimize {
        log10_min: f64,
        log10_max: f64,
        grid_points: usize,
        tol: f64,
    },
    Fixed(f64),
}

impl Default for SearchSpec {
    fn default() -> Self {
        SearchSpec::Optimize {
            log10_min: -6.0,
            log10_max: 8.0,
            grid_points: 21,
            tol: 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceConfig {
    /// Trace inflation of the modified PGCV; 1 gives the plain criterion.
    pub alpha: f64,
    pub search: SearchSpec,
    /// Subtract the mean curve before fitting.
    pub center: bool,
}

impl Default for FaceConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            search: SearchSpec::default(),
            center: true,
        }
    }
}

/// `Ytilde = A_S^T Y`.
pub fn project_data(y: &DataMatrix, factor: &SmootherFactor) -> Result<Mat<f64>> {
    project(y.values(), factor)
}

pub(crate) fn project(y: MatRef<'_, f64>, factor: &SmootherFactor) -> Result<Mat<f64>> {
    if y.nrows() != factor.grid_len() {
        return Err(FaceError::Dimension(format!(
            "data has {} grid points but the smoother was built for {}",
            y.nrows(),
            factor.grid_len()
        )));
    }
    Ok(t_mul(factor.a_s(), y))
}

/// Sufficient statistics for evaluating the pooled GCV at any `lambda`.
#[derive(Debug, Clone)]
pub struct PgcvStats {
    /// Diagonal of `Ytilde Ytilde^T`.
    pub diag_c: Vec<f64>,
    pub ytilde_frob2: f64,
    pub y_frob2: f64,
    /// `||Y||_F^2 - ||Ytilde||_F^2`, i.e. the energy outside the span of `A_S`.
    pub resid_frob2: f64,
    /// Number of grid points `J`.
    pub grid_len: usize,
}

impl PgcvStats {
    /// Statistics from the projection, with the out-of-span energy taken as
    /// the difference of the two norms (clamped at zero).
    pub fn new(ytilde: MatRef<'_, f64>, y_frob2: f64, grid_len: usize) -> Self {
        let diag_c: Vec<f64> = (0..ytilde.nrows())
            .map(|k| (0..ytilde.ncols()).map(|i| ytilde[(k, i)].powi(2)).sum())
            .collect();
        let ytilde_frob2: f64 = diag_c.iter().sum();
        Self {
            resid_frob2: (y_frob2 - ytilde_frob2).max(0.0),
            diag_c,
            ytilde_frob2,
            y_frob2,
            grid_len,
        }
    }

    /// Like [`PgcvStats::new`] but computes the out-of-span energy directly as
    /// `||Y - A_S Ytilde||_F^2`, avoiding cancellation when `Y` lies (almost)
    /// inside the spline space.
    pub fn with_residual(y: MatRef<'_, f64>, ytilde: MatRef<'_, f64>, factor: &SmootherFactor) -> Self {
        const BLOCK: usize = 16;
        let mut stats = Self::new(ytilde, frob2(y), y.nrows());
        let mut resid = 0.0;
        let mut start = 0;
        while start < y.ncols() {
            let width = BLOCK.min(y.ncols() - start);
            let fitted = factor.a_s() * ytilde.subcols(start, width);
            resid += frob2((y.subcols(start, width) - fitted).as_ref());
            start += width;
        }
        stats.resid_frob2 = resid;
        stats
    }
}

/// Pooled GCV
/// `[sum_k C_kk (lambda s_k)^2 / (1 + lambda s_k)^2 + ||Y||^2 - ||Ytilde||^2]
///  / (1 - alpha tr(S) / J)^2`.
pub fn pgcv(lambda: f64, stats: &PgcvStats, s: &[f64], alpha: f64) -> Result<f64> {
    if lambda < 0.0 || !lambda.is_finite() {
        return Err(FaceError::InvalidInput(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    if alpha < 1.0 {
        return Err(FaceError::InvalidInput(format!("alpha must be >= 1, got {alpha}")));
    }
    let mut fit_loss = 0.0;
    let mut trace = 0.0;
    for (c, &sk) in stats.diag_c.iter().zip(s) {
        let ls = lambda * sk;
        let shrink = 1.0 / (1.0 + ls);
        trace += shrink;
        fit_loss += c * (ls * shrink).powi(2);
    }
    let denominator = 1.0 - alpha * trace / stats.grid_len as f64;
    if denominator <= 0.0 {
        return Err(FaceError::DegenerateSmoother { denominator });
    }
    Ok((fit_loss + stats.resid_frob2) / (denominator * denominator))
}

/// Outcome of the smoothing-parameter search.
#[derive(Debug, Clone)]
pub struct LambdaSelection {
    pub lambda: f64,
    pub score: f64,
    /// `(lambda, pgcv)` at every grid point that produced a finite score.
    pub scan: Vec<(f64, f64)>,
}

/// Minimizes [`pgcv`] according to `search`.
pub fn select_lambda(stats: &PgcvStats, s: &[f64], alpha: f64, search: &SearchSpec) -> Result<LambdaSelection> {
    match *search {
        SearchSpec::Fixed(lambda) => {
            let score = pgcv(lambda, stats, s, alpha)?;
            Ok(LambdaSelection {
                lambda,
                score,
                scan: vec![(lambda, score)],
            })
        }
        SearchSpec::Optimize {
            log10_min,
            log10_max,
            grid_points,
            tol,
        } => {
            if log10_max.is_nan() || log10_min.is_nan() || log10_max <= log10_min || grid_points < 2 {
                return Err(FaceError::Config(format!(
                    "invalid lambda search range [{log10_min}, {log10_max}] with {grid_points} points"
                )));
            }
            let eval = |x: f64| pgcv(10f64.powf(x), stats, s, alpha);
            let xs: Vec<f64> = (0..grid_points)
                .map(|i| log10_min + (log10_max - log10_min) * i as f64 / (grid_points - 1) as f64)
                .collect();
            let mut scan = Vec::with_capacity(grid_points);
            let mut best: Option<(usize, f64)> = None;
            let mut first_err = None;
            for (idx, &x) in xs.iter().enumerate() {
                match eval(x) {
                    Ok(v) => {
                        scan.push((10f64.powf(x), v));
                        if best.is_none_or(|(_, b)| v < b) {
                            best = Some((idx, v));
                        }
                    }
                    Err(e) => {
                        first_err.get_or_insert(e);
                    }
                }
            }
            let Some((idx, grid_score)) = best else {
                return Err(first_err.expect("every grid point failed"));
            };
            let lo = xs[idx.saturating_sub(1)];
            let hi = xs[(idx + 1).min(grid_points - 1)];
            let (x, v) = golden_section(|x| eval(x).unwrap_or(f64::INFINITY), lo, hi, tol);
            let (x, score) = if v < grid_score { (x, v) } else { (xs[idx], grid_score) };
            Ok(LambdaSelection {
                lambda: 10f64.powf(x),
                score,
                scan,
            })
        }
    }
}

/// Golden-section minimization of `f` on `[a, b]`; the endpoints are
/// evaluated too so a boundary minimum is found.
pub(crate) fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (fa_end, fb_end) = (f(a), f(b));
    let (a0, b0) = (a, b);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let mid = if fc <= fd { (c, fc) } else { (d, fd) };
    [mid, (a0, fa_end), (b0, fb_end)]
        .into_iter()
        .fold(mid, |acc, cand| if cand.1 < acc.1 { cand } else { acc })
}

/// Index `N` of the 95% variance rule: smallest `k` whose cumulative share
/// reaches [`VARIANCE_EXPLAINED`]. Returns 0 for an all-zero spectrum.
pub fn select_n_components(eigvals: &[f64]) -> usize {
    let total: f64 = eigvals.iter().filter(|v| **v > 0.0).sum();
    if total <= 0.0 {
        return 0;
    }
    let mut acc = 0.0;
    for (k, v) in eigvals.iter().enumerate() {
        acc += v.max(0.0);
        if acc / total >= VARIANCE_EXPLAINED {
            return k + 1;
        }
    }
    eigvals.len()
}

/// A fitted FACE model.
#[derive(Debug, Clone)]
pub struct FaceFit {
    pub lambda: f64,
    pub alpha: f64,
    /// PGCV at the selected `lambda`.
    pub pgcv: f64,
    /// `J x r` orthonormal eigenvectors of the smoothed covariance.
    pub eigvecs: Mat<f64>,
    /// Eigenvalues of the smoothed covariance matrix, descending.
    pub eigvals_matrix: Vec<f64>,
    /// Eigenvalues of the covariance function, `eigvals_matrix / J`.
    pub eigvals_function: Vec<f64>,
    /// Noise variance estimate.
    pub sigma2: f64,
    /// `c x I` projected (centered) data.
    pub ytilde: Mat<f64>,
    /// `c x r` eigenvectors of the inner `c x c` problem.
    pub inner_vectors: Mat<f64>,
    /// Diagonal of `Sigma_S` at the selected `lambda`.
    pub shrinkage: Vec<f64>,
    /// `N` from the 95% rule.
    pub n_selected: usize,
    /// Mean curve that was subtracted (zeros when centering is off).
    pub mean: Vec<f64>,
    /// Normalizer of the raw covariance (`I` for plain fits).
    pub divisor: f64,
    /// Wall time of steps 1-7.
    pub step_timings: [Duration; 7],
    pub warnings: Vec<String>,
}

impl FaceFit {
    pub fn grid_len(&self) -> usize {
        self.eigvecs.nrows()
    }

    pub fn rank(&self) -> usize {
        self.eigvals_matrix.len()
    }

    /// Share of the total eigenvalue mass carried by each component.
    pub fn variance_explained(&self) -> Vec<f64> {
        let total: f64 = self.eigvals_matrix.iter().sum();
        if total <= 0.0 {
            return vec![0.0; self.eigvals_matrix.len()];
        }
        self.eigvals_matrix.iter().map(|v| v / total).collect()
    }

    /// Estimated eigenfunctions `psi_k(t_j) = sqrt(J) v_k(t_j)` for the first `n`.
    pub fn eigenfunctions(&self, n: usize) -> Mat<f64> {
        let scale = (self.grid_len() as f64).sqrt();
        let n = n.min(self.rank());
        Mat::from_fn(self.grid_len(), n, |j, k| self.eigvecs[(j, k)] * scale)
    }

    /// Dense smoothed covariance `V diag(eigvals_matrix) V^T`; refused above
    /// [`EXPLICIT_THRESHOLD`] grid points.
    pub fn smoothed_covariance(&self) -> Result<Mat<f64>> {
        let j = self.grid_len();
        if j > EXPLICIT_THRESHOLD {
            return Err(FaceError::TooLarge(format!(
                "dense covariance requested for J = {j} > {EXPLICIT_THRESHOLD}; use the eigendecomposition instead"
            )));
        }
        let v = self.eigvecs.as_ref();
        let scaled = Mat::from_fn(j, self.rank(), |r, k| v[(r, k)] * self.eigvals_matrix[k]);
        Ok(scaled.as_ref() * v.transpose())
    }

    /// Scores of new curves (`J x m`), centered with the fitted mean.
    pub fn scores_for(&self, y: MatRef<'_, f64>, method: ScoreMethod) -> Result<Scores> {
        let j = self.grid_len();
        if y.nrows() != j {
            return Err(FaceError::Dimension(format!(
                "curves have {} grid points, fit has {j}",
                y.nrows()
            )));
        }
        check_finite(y)?;
        let n = self.n_selected;
        let centered = Mat::from_fn(j, y.ncols(), |r, c| y[(r, c)] - self.mean[r]);
        let proj = t_mul(self.eigvecs.as_ref().subcols(0, n), centered.as_ref());
        Ok(self.scale_scores(proj, method))
    }

    /// `proj` holds `A_N^T Ytilde` (`N x m`); returns the `m x N` score matrix.
    fn scale_scores(&self, proj: Mat<f64>, method: ScoreMethod) -> Scores {
        let inv_sqrt_j = (self.grid_len() as f64).sqrt().recip();
        let weights: Vec<f64> = match method {
            ScoreMethod::NumericIntegration => vec![inv_sqrt_j; self.n_selected],
            ScoreMethod::Blup => {
                let noise = self.sigma2 / self.grid_len() as f64;
                self.eigvals_matrix[..self.n_selected]
                    .iter()
                    .map(|&ev| {
                        let denom = ev + noise;
                        if ev <= 0.0 || denom <= 0.0 {
                            0.0
                        } else {
                            inv_sqrt_j * ev / denom
                        }
                    })
                    .collect()
            }
        };
        let xi = Mat::from_fn(proj.ncols(), proj.nrows(), |i, k| proj[(k, i)] * weights[k]);
        Scores { xi, method }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMethod {
    NumericIntegration,
    Blup,
}

/// Principal scores, one row per curve and one column per component.
#[derive(Debug, Clone)]
pub struct Scores {
    pub xi: Mat<f64>,
    pub method: ScoreMethod,
}

fn inner_projection(fit: &FaceFit) -> Mat<f64> {
    t_mul(fit.inner_vectors.as_ref().subcols(0, fit.n_selected), fit.ytilde.as_ref())
}

/// Scores by numerical integration, `J^{-1/2} A_N^T Ytilde_i`.
pub fn scores_numeric(fit: &FaceFit) -> Scores {
    fit.scale_scores(inner_projection(fit), ScoreMethod::NumericIntegration)
}

/// BLUP scores, `J^{-1/2} Sigma_N (Sigma_N + sigma2 / J)^{-1} A_N^T Ytilde_i`.
pub fn scores_blup(fit: &FaceFit) -> Scores {
    fit.scale_scores(inner_projection(fit), ScoreMethod::Blup)
}

/// Fits FACE to a complete data matrix.
pub fn face_fit(y: &DataMatrix, factor: &SmootherFactor, cfg: &FaceConfig) -> Result<FaceFit> {
    fit_matrix(y.values(), factor, cfg)
}

pub(crate) fn fit_matrix(y: MatRef<'_, f64>, factor: &SmootherFactor, cfg: &FaceConfig) -> Result<FaceFit> {
    let (mean, centered) = if cfg.center {
        center_columns(y)
    } else {
        (vec![0.0; y.nrows()], y.to_owned())
    };
    let divisor = y.ncols() as f64;
    fit_centered(centered.as_ref(), mean, factor, cfg, divisor)
}

/// FACE on already-centered columns, with `Y Y^T / divisor` as the raw covariance.
pub(crate) fn fit_centered(
    y: MatRef<'_, f64>,
    mean: Vec<f64>,
    factor: &SmootherFactor,
    cfg: &FaceConfig,
    divisor: f64,
) -> Result<FaceFit> {
    if cfg.alpha < 1.0 {
        return Err(FaceError::InvalidInput(format!("alpha must be >= 1, got {}", cfg.alpha)));
    }
    let j = y.nrows();
    let n_curves = y.ncols();
    let mut warnings = Vec::new();

    let t3 = Instant::now();
    let ytilde = project(y, factor)?;
    let stats = PgcvStats::with_residual(y, ytilde.as_ref(), factor);
    if stats.y_frob2 == 0.0 {
        return Err(FaceError::NoSignal(
            "data are identically zero after centering; the covariance is undefined".into(),
        ));
    }

    let t4 = Instant::now();
    let selection = select_lambda(&stats, factor.s(), cfg.alpha, &cfg.search)?;
    let lambda = selection.lambda;

    let t5 = Instant::now();
    let shrinkage = factor.shrinkage(lambda);

    let t6 = Instant::now();
    let c = factor.num_basis();
    let shrunk = Mat::from_fn(c, n_curves, |k, i| ytilde[(k, i)] * shrinkage[k]);
    let inner = (shrunk.as_ref() * shrunk.transpose()) * (1.0 / divisor);
    let eig = sym_eig(inner.as_ref())?;
    let top = eig.values[0].max(0.0);
    if let Some(&neg) = eig.values.iter().rfind(|v| **v < -RANK_REL_TOL * top) {
        warnings.push(format!("clamped negative inner eigenvalue {neg:e} to zero"));
    }
    let clamped: Vec<f64> = eig.values.iter().map(|v| v.max(0.0)).collect();
    let rank = clamped
        .iter()
        .take_while(|&&v| v > RANK_REL_TOL * top && v > 0.0)
        .count()
        .min(c.min(n_curves));

    let t7 = Instant::now();
    let inner_vectors = eig.vectors.as_ref().subcols(0, rank).to_owned();
    let eigvecs = factor.a_s() * inner_vectors.as_ref();
    let eigvals_matrix: Vec<f64> = clamped[..rank].to_vec();
    let eigvals_function: Vec<f64> = eigvals_matrix.iter().map(|v| v / j as f64).collect();

    let total: f64 = clamped.iter().sum();
    let raw_sigma2 = stats.y_frob2 / (divisor * j as f64) - total / j as f64;
    let sigma2 = if raw_sigma2 < 0.0 {
        warnings.push(format!("noise variance estimate {raw_sigma2:e} was negative; clamped to 0"));
        0.0
    } else {
        raw_sigma2
    };
    let n_selected = select_n_components(&eigvals_matrix);
    let done = Instant::now();

    let [s1, s2] = factor.timings();
    Ok(FaceFit {
        lambda,
        alpha: cfg.alpha,
        pgcv: selection.score,
        eigvecs,
        eigvals_matrix,
        eigvals_function,
        sigma2,
        ytilde,
        inner_vectors,
        shrinkage,
        n_selected,
        mean,
        divisor,
        step_timings: [s1, s2, t4 - t3, t5 - t4, t6 - t5, t7 - t6, done - t7],
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{factorize_smoother, BasisSpec};
    use crate::linalg::max_abs;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn noise(j: usize, i: usize, seed: u64) -> Mat<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Mat::from_fn(j, i, |_, _| StandardNormal.sample(&mut rng))
    }

    fn smooth_data(j: usize, i: usize, seed: u64) -> Mat<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut y = Mat::<f64>::zeros(j, i);
        for c in 0..i {
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            for r in 0..j {
                let t = (r + 1) as f64 / j as f64;
                let e: f64 = StandardNormal.sample(&mut rng);
                y[(r, c)] = a * (2.0 * std::f64::consts::PI * t).sin() + b * t * t + 0.1 * e;
            }
        }
        y
    }

    #[test]
    fn projection_basics() {
        let f = factorize_smoother(&BasisSpec::equispaced(60, 4)).unwrap();
        let zero = DataMatrix::new(Mat::zeros(60, 5)).unwrap();
        assert_eq!(max_abs(project_data(&zero, &f).unwrap().as_ref()), 0.0);

        let coef = noise(8, 4, 1);
        let y = f.a_s() * coef.as_ref();
        let yt = project_data(&DataMatrix::new(y.clone()).unwrap(), &f).unwrap();
        let back = f.a_s() * yt.as_ref();
        assert!(frob2((back - &y).as_ref()).sqrt() < 1e-8 * frob2(y.as_ref()).sqrt());

        let y = noise(60, 7, 2);
        let yt = project_data(&DataMatrix::new(y.clone()).unwrap(), &f).unwrap();
        assert!(frob2(yt.as_ref()) <= frob2(y.as_ref()));

        let wrong = DataMatrix::new(Mat::zeros(59, 2)).unwrap();
        assert!(matches!(project_data(&wrong, &f), Err(FaceError::Dimension(_))));
    }

    #[test]
    fn data_matrix_rejects_nan() {
        let mut m = Mat::<f64>::zeros(3, 2);
        m[(2, 1)] = f64::NAN;
        assert!(matches!(DataMatrix::new(m), Err(FaceError::NonFinite { row: 2, col: 1 })));
    }

    #[test]
    fn pgcv_at_zero_lambda() {
        let f = factorize_smoother(&BasisSpec::equispaced(50, 4)).unwrap();
        let y = noise(50, 6, 3);
        let yt = project(y.as_ref(), &f).unwrap();
        let stats = PgcvStats::new(yt.as_ref(), frob2(y.as_ref()), 50);
        let v = pgcv(0.0, &stats, f.s(), 1.0).unwrap();
        let expected = (frob2(y.as_ref()) - frob2(yt.as_ref())) / (1.0 - 8.0 / 50.0f64).powi(2);
        assert!((v - expected).abs() < 1e-10 * expected);
    }

    #[test]
    fn pgcv_degenerate_denominator() {
        let f = factorize_smoother(&BasisSpec::equispaced(20, 6)).unwrap();
        let y = noise(20, 3, 4);
        let yt = project(y.as_ref(), &f).unwrap();
        let stats = PgcvStats::new(yt.as_ref(), frob2(y.as_ref()), 20);
        // alpha * tr(S) = 2 * 10 = J
        assert!(matches!(pgcv(0.0, &stats, f.s(), 2.0), Err(FaceError::DegenerateSmoother { .. })));
        assert!(pgcv(0.0, &stats, f.s(), 0.5).is_err());
        assert!(pgcv(-1.0, &stats, f.s(), 1.0).is_err());
    }

    #[test]
    fn selection_is_deterministic_and_in_range() {
        let f = factorize_smoother(&BasisSpec::equispaced(200, 20)).unwrap();
        let y = smooth_data(200, 12, 5);
        let yt = project(y.as_ref(), &f).unwrap();
        let stats = PgcvStats::with_residual(y.as_ref(), yt.as_ref(), &f);
        let a = select_lambda(&stats, f.s(), 1.0, &SearchSpec::default()).unwrap();
        let b = select_lambda(&stats, f.s(), 1.0, &SearchSpec::default()).unwrap();
        assert_eq!(a.lambda.to_bits(), b.lambda.to_bits());
        assert!((1e-6..=1e8).contains(&a.lambda));
        for (_, v) in &a.scan {
            assert!(a.score <= *v + 1e-12 * v.abs());
        }
    }

    #[test]
    fn golden_section_finds_boundary_and_interior() {
        let (x, _) = golden_section(|x| (x - 0.3).powi(2), 0.0, 1.0, 1e-9);
        assert!((x - 0.3).abs() < 1e-6);
        let (x, _) = golden_section(|x| -x, 0.0, 1.0, 1e-9);
        assert_eq!(x, 1.0);
    }

    #[test]
    fn n_components_rule() {
        assert_eq!(select_n_components(&[1.0, 0.0]), 1);
        assert_eq!(select_n_components(&[0.5, 0.3, 0.15, 0.05]), 3);
        assert_eq!(select_n_components(&[0.5, 0.45, 0.05]), 2);
        assert_eq!(select_n_components(&[]), 0);
    }

    #[test]
    fn zero_data_is_rejected() {
        let f = factorize_smoother(&BasisSpec::equispaced(40, 5)).unwrap();
        let mut y = Mat::<f64>::zeros(40, 4);
        for c in 0..4 {
            for r in 0..40 {
                y[(r, c)] = r as f64;
            }
        }
        // identical columns vanish after centering
        let err = face_fit(&DataMatrix::new(y).unwrap(), &f, &FaceConfig::default()).unwrap_err();
        assert!(matches!(err, FaceError::NoSignal(_)));
    }

    #[test]
    fn fit_invariants() {
        let f = factorize_smoother(&BasisSpec::equispaced(120, 15)).unwrap();
        let y = smooth_data(120, 9, 6);
        let fit = face_fit(&DataMatrix::new(y).unwrap(), &f, &FaceConfig::default()).unwrap();
        assert!(fit.rank() <= 9.min(f.num_basis()));
        let g = t_mul(fit.eigvecs.as_ref(), fit.eigvecs.as_ref());
        assert!(max_abs((g - Mat::<f64>::identity(fit.rank(), fit.rank())).as_ref()) < 1e-8);
        assert!(fit.eigvals_matrix.windows(2).all(|w| w[0] >= w[1]));
        assert!(fit.eigvals_matrix.iter().all(|v| *v >= 0.0));
        for (m, fcn) in fit.eigvals_matrix.iter().zip(&fit.eigvals_function) {
            assert_eq!(*fcn, m / 120.0);
        }
        assert!(fit.sigma2 >= 0.0);
        assert!(fit.n_selected >= 1 && fit.n_selected <= fit.rank());
        let cum: f64 = fit.variance_explained()[..fit.n_selected].iter().sum();
        assert!(cum >= VARIANCE_EXPLAINED - 1e-12);
    }

    #[test]
    fn blup_without_noise_equals_numeric() {
        let f = factorize_smoother(&BasisSpec::equispaced(80, 10)).unwrap();
        let y = smooth_data(80, 10, 7);
        let mut fit = face_fit(&DataMatrix::new(y).unwrap(), &f, &FaceConfig::default()).unwrap();
        fit.sigma2 = 0.0;
        let a = scores_numeric(&fit);
        let b = scores_blup(&fit);
        assert_eq!(max_abs((a.xi - b.xi).as_ref()), 0.0);
        fit.sigma2 = 1e300;
        assert!(max_abs(scores_blup(&fit).xi.as_ref()) < 1e-200);
    }

    #[test]
    fn scores_of_mean_curve_are_zero() {
        let f = factorize_smoother(&BasisSpec::equispaced(80, 10)).unwrap();
        let y = smooth_data(80, 10, 8);
        let fit = face_fit(&DataMatrix::new(y).unwrap(), &f, &FaceConfig::default()).unwrap();
        let mean = Mat::from_fn(80, 1, |r, _| fit.mean[r]);
        let s = fit.scores_for(mean.as_ref(), ScoreMethod::NumericIntegration).unwrap();
        assert!(max_abs(s.xi.as_ref()) < 1e-12);
    }

    #[test]
    fn dense_covariance_refused_for_large_grids() {
        let f = factorize_smoother(&BasisSpec::equispaced(2100, 10)).unwrap();
        let y = smooth_data(2100, 5, 9);
        let fit = face_fit(&DataMatrix::new(y).unwrap(), &f, &FaceConfig::default()).unwrap();
        assert!(matches!(fit.smoothed_covariance(), Err(FaceError::TooLarge(_))));
    }
}
