//! Covariance models of the simulation study and sampling on a grid.

use std::f64::consts::{PI, SQRT_2};

use faer::Mat;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::bessel::matern_cov;
use crate::basis::{equispaced_grid, EXPLICIT_THRESHOLD};
use crate::error::{FaceError, Result};
use crate::face::DataMatrix;
use crate::linalg::{frob2, sym_eig, t_mul};

/// Terms kept from the Brownian motion and bridge expansions.
pub const DEFAULT_TRUNCATION: usize = 500;

/// Largest grid on which the Matérn kernel is eigendecomposed.
pub const MATERN_MAX_GRID: usize = 3000;

/// Matérn eigenpairs below this fraction of the largest are dropped.
const MATERN_EIG_TOL: f64 = 1e-10;

/// Number of leading eigenpairs tracked for metrics.
pub const TRACKED_COMPONENTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisFamily {
    /// `sqrt2 sin(2 pi t)`, `sqrt2 cos(4 pi t)`, `sqrt2 sin(4 pi t)`.
    Trigonometric,
    /// Shifted Legendre polynomials of degree 1 to 3, normalized on `[0, 1]`.
    Legendre,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CovModel {
    FiniteBasis { family: BasisFamily, eigvals: Vec<f64> },
    BrownianMotion { truncation: usize },
    BrownianBridge { truncation: usize },
    Matern { phi: f64, nu: f64 },
}

impl CovModel {
    /// The five cases of the simulation study, numbered 1 to 5.
    pub fn case(n: u8) -> Result<Self> {
        let eigvals = vec![1.0, 0.5, 0.25];
        Ok(match n {
            1 => CovModel::FiniteBasis {
                family: BasisFamily::Trigonometric,
                eigvals,
            },
            2 => CovModel::FiniteBasis {
                family: BasisFamily::Legendre,
                eigvals,
            },
            3 => CovModel::BrownianMotion {
                truncation: DEFAULT_TRUNCATION,
            },
            4 => CovModel::BrownianBridge {
                truncation: DEFAULT_TRUNCATION,
            },
            // range 0.07 on the d/phi scale of the kernel argument
            5 => CovModel::Matern {
                phi: 0.07 * SQRT_2,
                nu: 1.0,
            },
            _ => {
                return Err(FaceError::Config(format!(
                    "unknown simulation case {n}; valid cases are 1, 2, 3, 4, 5"
                )))
            }
        })
    }

    fn validate(&self) -> Result<()> {
        match self {
            CovModel::FiniteBasis { eigvals, .. } => {
                if eigvals.is_empty() || eigvals.len() > 3 {
                    return Err(FaceError::Config("finite basis models carry 1 to 3 eigenvalues".into()));
                }
                if eigvals.windows(2).any(|w| w[0] < w[1]) || eigvals.iter().any(|v| v.is_nan() || *v <= 0.0) {
                    return Err(FaceError::Config("eigenvalues must be positive and descending".into()));
                }
            }
            CovModel::BrownianMotion { truncation } | CovModel::BrownianBridge { truncation } => {
                if *truncation < TRACKED_COMPONENTS {
                    return Err(FaceError::Config(format!(
                        "truncation must be at least {TRACKED_COMPONENTS}"
                    )));
                }
            }
            CovModel::Matern { phi, nu } => {
                if phi.is_nan() || nu.is_nan() || *phi <= 0.0 || *nu <= 0.0 {
                    return Err(FaceError::Config("Matérn phi and nu must be positive".into()));
                }
            }
        }
        Ok(())
    }

    /// Eigenvalue `l` (1-based) of an expansion model.
    fn expansion_eigval(&self, l: usize) -> f64 {
        let lf = l as f64;
        match self {
            CovModel::FiniteBasis { eigvals, .. } => eigvals[l - 1],
            CovModel::BrownianMotion { .. } => 1.0 / ((lf - 0.5).powi(2) * PI * PI),
            CovModel::BrownianBridge { .. } => 1.0 / (lf * lf * PI * PI),
            CovModel::Matern { .. } => unreachable!("Matérn has no closed-form expansion"),
        }
    }

    /// Eigenfunction `l` (1-based) of an expansion model at `t`.
    fn expansion_eigfn(&self, l: usize, t: f64) -> f64 {
        let lf = l as f64;
        match self {
            CovModel::FiniteBasis { family, .. } => match (family, l) {
                (BasisFamily::Trigonometric, 1) => SQRT_2 * (2.0 * PI * t).sin(),
                (BasisFamily::Trigonometric, 2) => SQRT_2 * (4.0 * PI * t).cos(),
                (BasisFamily::Trigonometric, _) => SQRT_2 * (4.0 * PI * t).sin(),
                (BasisFamily::Legendre, 1) => 3f64.sqrt() * (2.0 * t - 1.0),
                (BasisFamily::Legendre, 2) => 5f64.sqrt() * (6.0 * t * t - 6.0 * t + 1.0),
                (BasisFamily::Legendre, _) => 7f64.sqrt() * (((20.0 * t - 30.0) * t + 12.0) * t - 1.0),
            },
            CovModel::BrownianMotion { .. } => SQRT_2 * ((lf - 0.5) * PI * t).sin(),
            CovModel::BrownianBridge { .. } => SQRT_2 * (lf * PI * t).sin(),
            CovModel::Matern { .. } => unreachable!("Matérn has no closed-form expansion"),
        }
    }

    fn n_terms(&self) -> usize {
        match self {
            CovModel::FiniteBasis { eigvals, .. } => eigvals.len(),
            CovModel::BrownianMotion { truncation } | CovModel::BrownianBridge { truncation } => *truncation,
            CovModel::Matern { .. } => 0,
        }
    }

    /// `int K(t, t) dt = sum_l lambda_l`, the noise variance giving unit
    /// signal-to-noise ratio. Infinite series are summed in closed form.
    pub fn noise_variance(&self) -> f64 {
        match self {
            CovModel::FiniteBasis { eigvals, .. } => eigvals.iter().sum(),
            CovModel::BrownianMotion { .. } => 0.5,
            CovModel::BrownianBridge { .. } => 1.0 / 6.0,
            CovModel::Matern { .. } => 1.0,
        }
    }

    /// `K(s, t)`, from the (truncated) expansion or the Matérn formula.
    pub fn kernel(&self, s: f64, t: f64) -> Result<f64> {
        match self {
            CovModel::Matern { phi, nu } => matern_cov((s - t).abs(), *phi, *nu),
            _ => Ok((1..=self.n_terms())
                .map(|l| self.expansion_eigval(l) * self.expansion_eigfn(l, s) * self.expansion_eigfn(l, t))
                .sum()),
        }
    }
}

/// Dense `K(t_j, t_l)`; refused above the dense-matrix threshold.
pub fn true_cov_matrix(model: &CovModel, grid: &[f64]) -> Result<Mat<f64>> {
    let j = grid.len();
    if j > EXPLICIT_THRESHOLD {
        return Err(FaceError::TooLarge(format!(
            "true covariance requested on {j} grid points (limit {EXPLICIT_THRESHOLD})"
        )));
    }
    model.validate()?;
    if let CovModel::Matern { phi, nu } = model {
        matern_cov(0.0, *phi, *nu)?;
    }
    let mut k = Mat::<f64>::zeros(j, j);
    for c in 0..j {
        for r in c..j {
            let v = model.kernel(grid[r], grid[c])?;
            k[(r, c)] = v;
            k[(c, r)] = v;
        }
    }
    Ok(k)
}

/// A model discretized on a grid: `K = F F^T` plus the leading eigenpairs.
#[derive(Debug, Clone)]
pub struct GridTruth {
    pub model: CovModel,
    pub grid: Vec<f64>,
    factor: Mat<f64>,
    /// Leading function-scale eigenvalues.
    pub eigvals: Vec<f64>,
    /// Leading eigenfunctions evaluated on the grid, one per column.
    pub eigfuncs: Mat<f64>,
    k_frob2: f64,
    pub noise_variance: f64,
}

impl GridTruth {
    pub fn new(model: &CovModel, grid: &[f64]) -> Result<Self> {
        model.validate()?;
        let j = grid.len();
        if j == 0 {
            return Err(FaceError::InvalidInput("empty grid".into()));
        }
        match model {
            CovModel::Matern { phi, nu } => {
                if j > MATERN_MAX_GRID {
                    return Err(FaceError::TooLarge(format!(
                        "Matérn truth needs a dense eigendecomposition; J = {j} exceeds {MATERN_MAX_GRID}"
                    )));
                }
                let mut k = Mat::<f64>::zeros(j, j);
                let step = if j > 1 { grid[1] - grid[0] } else { 0.0 };
                let equispaced = grid.windows(2).all(|w| ((w[1] - w[0]) - step).abs() <= 1e-12);
                if equispaced {
                    let by_lag = (0..j)
                        .map(|lag| matern_cov(lag as f64 * step, *phi, *nu))
                        .collect::<Result<Vec<f64>>>()?;
                    for c in 0..j {
                        for r in 0..j {
                            k[(r, c)] = by_lag[r.abs_diff(c)];
                        }
                    }
                } else {
                    for c in 0..j {
                        for r in c..j {
                            let v = matern_cov((grid[r] - grid[c]).abs(), *phi, *nu)?;
                            k[(r, c)] = v;
                            k[(c, r)] = v;
                        }
                    }
                }
                let eig = sym_eig(k.as_ref())?;
                drop(k);
                let top = eig.values[0];
                let t = eig.values.iter().take_while(|&&v| v > MATERN_EIG_TOL * top).count();
                let v = eig.vectors.as_ref();
                let factor = Mat::from_fn(j, t, |r, l| v[(r, l)] * eig.values[l].sqrt());
                let n = TRACKED_COMPONENTS.min(t);
                let jf = j as f64;
                Ok(Self {
                    model: model.clone(),
                    grid: grid.to_vec(),
                    factor,
                    eigvals: eig.values[..n].iter().map(|d| d / jf).collect(),
                    eigfuncs: Mat::from_fn(j, n, |r, l| v[(r, l)] * jf.sqrt()),
                    k_frob2: eig.values[..t].iter().map(|d| d * d).sum(),
                    noise_variance: model.noise_variance(),
                })
            }
            _ => {
                let t = model.n_terms();
                let factor = Mat::from_fn(j, t, |r, l| {
                    model.expansion_eigval(l + 1).sqrt() * model.expansion_eigfn(l + 1, grid[r])
                });
                let gram = t_mul(factor.as_ref(), factor.as_ref());
                let n = TRACKED_COMPONENTS.min(t);
                Ok(Self {
                    model: model.clone(),
                    grid: grid.to_vec(),
                    k_frob2: frob2(gram.as_ref()),
                    factor,
                    eigvals: (1..=n).map(|l| model.expansion_eigval(l)).collect(),
                    eigfuncs: Mat::from_fn(j, n, |r, l| model.expansion_eigfn(l + 1, grid[r])),
                    noise_variance: model.noise_variance(),
                })
            }
        }
    }

    /// Truth on the grid `{1/J, ..., 1}`.
    pub fn equispaced(model: &CovModel, j: usize) -> Result<Self> {
        Self::new(model, &equispaced_grid(j))
    }

    pub fn grid_len(&self) -> usize {
        self.grid.len()
    }

    /// `F` with `K = F F^T` on the grid.
    pub fn factor(&self) -> &Mat<f64> {
        &self.factor
    }

    /// `||K||_F^2` of the gridded covariance.
    pub fn k_frob2(&self) -> f64 {
        self.k_frob2
    }

    /// `n` noise-free curves `F z_i`.
    pub fn sample_curves<R: Rng>(&self, n: usize, rng: &mut R) -> Mat<f64> {
        let t = self.factor.ncols();
        let z = Mat::<f64>::from_fn(t, n, |_, _| StandardNormal.sample(rng));
        self.factor.as_ref() * z.as_ref()
    }

    /// `n` curves with i.i.d. `N(0, noise_variance)` errors.
    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> Mat<f64> {
        let mut y = self.sample_curves(n, rng);
        let sd = self.noise_variance.sqrt();
        for c in 0..n {
            for r in 0..self.grid_len() {
                let e: f64 = StandardNormal.sample(rng);
                y[(r, c)] += sd * e;
            }
        }
        y
    }
}

/// `I` noisy curves from `model` on `{1/J, ..., 1}`, reproducible from `seed`.
pub fn generate_sample(model: &CovModel, j: usize, i: usize, seed: u64) -> Result<DataMatrix> {
    let truth = GridTruth::equispaced(model, j)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DataMatrix::new(truth.sample(i, &mut rng))
}
