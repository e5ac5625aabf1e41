//! Wall-clock comparison of FACE, the baselines and an explicit sandwich
//! smoother.

use std::time::{Duration, Instant};

use faer::{Mat, MatRef};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::models::{CovModel, GridTruth};
use crate::alt::{s_smooth_fit, ssvd_fit, UnivariateSmoother};
use crate::basis::{factorize_smoother, BasisSpec, SmootherFactor};
use crate::error::{FaceError, Result};
use crate::face::{center_columns, face_fit, select_lambda, DataMatrix, FaceConfig, PgcvStats, SearchSpec};
use crate::linalg::{sym_eig, t_mul, SymEig};

/// Largest grid accepted by [`naive_sandwich`].
pub const NAIVE_MAX_GRID: usize = 5000;

/// The sandwich smoother computed literally: dense `S`, dense
/// `Khat = Y Y^T / I`, dense `S Khat S` and its full eigendecomposition.
pub fn naive_sandwich(y: MatRef<'_, f64>, factor: &SmootherFactor, lambda: f64) -> Result<SymEig> {
    let j = y.nrows();
    if j > NAIVE_MAX_GRID {
        return Err(FaceError::TooLarge(format!(
            "the explicit sandwich smoother needs several {j}x{j} matrices; refusing above J = {NAIVE_MAX_GRID}"
        )));
    }
    let shrink = factor.shrinkage(lambda);
    let a = factor.a_s();
    let scaled = Mat::from_fn(j, shrink.len(), |r, k| a[(r, k)] * shrink[k]);
    let s = scaled.as_ref() * a.transpose();
    let khat = (y * y.transpose()) * (1.0 / y.ncols() as f64);
    let smoothed = s.as_ref() * khat.as_ref() * s.as_ref();
    sym_eig(smoothed.as_ref())
}

/// Median of `reps` timings of `f`.
pub fn median_time<T>(reps: usize, mut f: impl FnMut() -> Result<T>) -> Result<Duration> {
    let mut times = Vec::with_capacity(reps.max(1));
    for _ in 0..reps.max(1) {
        let start = Instant::now();
        f()?;
        times.push(start.elapsed());
    }
    times.sort();
    Ok(times[times.len() / 2])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchMethod {
    Face,
    Ssvd,
    SSmooth,
    Sandwich,
}

impl BenchMethod {
    pub fn name(self) -> &'static str {
        match self {
            BenchMethod::Face => "face",
            BenchMethod::Ssvd => "ssvd",
            BenchMethod::SSmooth => "s_smooth",
            BenchMethod::Sandwich => "sandwich",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "face" => Ok(BenchMethod::Face),
            "ssvd" => Ok(BenchMethod::Ssvd),
            "s_smooth" | "ssmooth" => Ok(BenchMethod::SSmooth),
            "sandwich" | "naive" => Ok(BenchMethod::Sandwich),
            other => Err(FaceError::Config(format!(
                "unknown bench method '{other}'; valid methods are: face, ssvd, s_smooth, sandwich"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub method: BenchMethod,
    #[serde(rename = "J")]
    pub grid_len: usize,
    #[serde(rename = "I")]
    pub n_curves: usize,
    /// Interior knots; `None` for methods with their own basis.
    pub knots: Option<usize>,
    /// Median wall time, `None` when the size was refused.
    pub seconds: Option<f64>,
    pub note: Option<String>,
}

/// Times the FACE fit alone (smoother factorization included).
pub fn time_face(y: &DataMatrix, knots: usize, reps: usize) -> Result<Duration> {
    let spec = BasisSpec::equispaced(y.grid_len(), knots);
    median_time(reps, || {
        let factor = factorize_smoother(&spec)?;
        face_fit(y, &factor, &FaceConfig::default())
    })
}

/// Benchmark over every `(J, I)` size; FACE and the sandwich run once per
/// knot count. Data come from the first simulation model.
pub fn run_bench(
    sizes: &[(usize, usize)],
    knots: &[usize],
    methods: &[BenchMethod],
    reps: usize,
    seed: u64,
) -> Result<Vec<BenchRow>> {
    let model = CovModel::case(1)?;
    let mut rows = Vec::new();
    for &(j, n) in sizes {
        let truth = GridTruth::equispaced(&model, j)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y = DataMatrix::new(truth.sample(n, &mut rng))?;
        for &method in methods {
            let row = |knots: Option<usize>, seconds: Option<f64>, note: Option<String>| BenchRow {
                method,
                grid_len: j,
                n_curves: n,
                knots,
                seconds,
                note,
            };
            match method {
                BenchMethod::Face => {
                    for &k in knots {
                        let t = time_face(&y, k, reps)?;
                        rows.push(row(Some(k), Some(t.as_secs_f64()), None));
                    }
                }
                BenchMethod::Ssvd | BenchMethod::SSmooth => {
                    let t = median_time(reps, || {
                        let sm = UnivariateSmoother::for_grid_len(j)?;
                        if method == BenchMethod::Ssvd {
                            ssvd_fit(&y, None, &sm, true)
                        } else {
                            s_smooth_fit(&y, &sm, true)
                        }
                    })?;
                    rows.push(row(None, Some(t.as_secs_f64()), None));
                }
                BenchMethod::Sandwich => {
                    for &k in knots {
                        if j > NAIVE_MAX_GRID {
                            rows.push(row(
                                Some(k),
                                None,
                                Some(format!("skipped: explicit J x J smoother refused above J = {NAIVE_MAX_GRID}")),
                            ));
                            continue;
                        }
                        let t = median_time(reps, || {
                            let factor = factorize_smoother(&BasisSpec::equispaced(j, k))?;
                            let (_, centered) = center_columns(y.values());
                            let ytilde = t_mul(factor.a_s(), centered.as_ref());
                            let stats = PgcvStats::with_residual(centered.as_ref(), ytilde.as_ref(), &factor);
                            let lambda = select_lambda(&stats, factor.s(), 1.0, &SearchSpec::default())?.lambda;
                            naive_sandwich(centered.as_ref(), &factor, lambda)
                        })?;
                        rows.push(row(Some(k), Some(t.as_secs_f64()), None));
                    }
                }
            }
        }
    }
    Ok(rows)
}
