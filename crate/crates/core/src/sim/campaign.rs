//! Monte Carlo campaigns: replicate datasets, fit every requested method and
//! collect error measures.

use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use faer::MatRef;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{amse_eigenvalue, mise_covariance, mise_eigenfunction};
use super::missing::mcar_mask;
use super::models::{CovModel, GridTruth, TRACKED_COMPONENTS};
use crate::alt::{raw_svd_fit, s_smooth_fit, ssvd_fit, UnivariateSmoother};
use crate::basis::{factorize_smoother, BasisSpec, SmootherFactor};
use crate::error::{FaceError, Result};
use crate::face::{face_fit, DataMatrix, FaceConfig, SearchSpec};
use crate::incomplete::{face_fit_incomplete, MaskedData};

/// Offset separating the mask seed stream from the data seed stream.
const MASK_SEED_OFFSET: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimMethod {
    Raw,
    Ssvd,
    SSmooth,
    Face,
    FaceIncomplete,
}

impl SimMethod {
    pub const ALL: [SimMethod; 5] = [
        SimMethod::Raw,
        SimMethod::Ssvd,
        SimMethod::SSmooth,
        SimMethod::Face,
        SimMethod::FaceIncomplete,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SimMethod::Raw => "raw",
            SimMethod::Ssvd => "ssvd",
            SimMethod::SSmooth => "s_smooth",
            SimMethod::Face => "face",
            SimMethod::FaceIncomplete => "face_incomplete",
        }
    }
}

impl FromStr for SimMethod {
    type Err = FaceError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "raw" | "no_smoothing" => Ok(SimMethod::Raw),
            "ssvd" => Ok(SimMethod::Ssvd),
            "s_smooth" | "ssmooth" => Ok(SimMethod::SSmooth),
            "face" => Ok(SimMethod::Face),
            "face_incomplete" => Ok(SimMethod::FaceIncomplete),
            "all" => Err(FaceError::Config("'all' must be expanded by the caller".into())),
            other => Err(FaceError::Config(format!(
                "unknown method '{other}'; valid methods are: {}",
                SimMethod::ALL.map(|m| m.name()).join(", ")
            ))),
        }
    }
}

fn default_knots() -> usize {
    100
}
fn default_alpha() -> f64 {
    1.0
}
fn default_max_iter() -> usize {
    50
}
fn default_tol() -> f64 {
    1e-4
}

/// Campaign description, read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub case: u8,
    #[serde(rename = "J")]
    pub grid_len: usize,
    #[serde(rename = "I")]
    pub n_curves: usize,
    pub replicates: usize,
    /// Method names; `"all"` expands to every method.
    pub methods: Vec<String>,
    #[serde(default = "default_knots")]
    pub knots: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Draw MCAR block masks and run the incomplete-data fit.
    #[serde(default)]
    pub missing: bool,
    pub seed: u64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

impl CampaignConfig {
    pub fn parsed_methods(&self) -> Result<Vec<SimMethod>> {
        let mut out = Vec::new();
        for name in &self.methods {
            if name.eq_ignore_ascii_case("all") {
                out.extend(SimMethod::ALL);
            } else {
                out.push(name.parse()?);
            }
        }
        out.sort();
        out.dedup();
        if out.is_empty() {
            return Err(FaceError::Config("no methods requested".into()));
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        CovModel::case(self.case)?;
        self.parsed_methods()?;
        if self.replicates == 0 || self.n_curves < 2 {
            return Err(FaceError::Config("need at least one replicate and two curves".into()));
        }
        if self.alpha < 1.0 {
            return Err(FaceError::Config(format!("alpha must be >= 1, got {}", self.alpha)));
        }
        BasisSpec::equispaced(self.grid_len, self.knots).validate()
    }
}

/// Metric names, in output order.
pub const METRICS: [&str; 11] = [
    "cov_mise",
    "eigfn_mise_1",
    "eigfn_mise_2",
    "eigfn_mise_3",
    "eigval_sqerr_1",
    "eigval_sqerr_2",
    "eigval_sqerr_3",
    "rank",
    "n_selected",
    "iterations",
    "seconds",
];

/// One replicate x method x metric cell; `None` marks "not applicable".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub replicate: usize,
    pub seed: u64,
    pub method: SimMethod,
    pub metric: &'static str,
    pub value: Option<f64>,
}

/// Per method and metric replicate average.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryCell {
    pub method: SimMethod,
    pub metric: &'static str,
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    pub count: usize,
}

#[derive(Debug, Clone)]
pub struct CampaignResult {
    pub config: CampaignConfig,
    pub methods: Vec<SimMethod>,
    pub rows: Vec<ResultRow>,
    /// Replicates whose FACE fit had rank above `min(c, I)`.
    pub rank_violations: usize,
    /// Incomplete-data fits that stopped at `max_iter`.
    pub non_converged: usize,
}

struct Shared {
    truth: GridTruth,
    factor: SmootherFactor,
    smoother: Option<UnivariateSmoother>,
    cfg: FaceConfig,
}

struct Estimate<'a> {
    eigvecs: MatRef<'a, f64>,
    eigvals_function: &'a [f64],
    n_selected: usize,
    iterations: Option<usize>,
}

fn metrics_for(est: &Estimate<'_>, truth: &GridTruth, seconds: f64) -> Result<Vec<(&'static str, Option<f64>)>> {
    let r = est.eigvals_function.len();
    let mut out = vec![("cov_mise", Some(mise_covariance(est.eigvecs, est.eigvals_function, truth)?))];
    for (k, name) in (1..=TRACKED_COMPONENTS).zip(&METRICS[1..]) {
        let v = if k <= r && k <= truth.eigfuncs.ncols() {
            let col: Vec<f64> = est.eigvecs.col(k - 1).iter().copied().collect();
            Some(mise_eigenfunction(&col, truth, k)?)
        } else {
            None
        };
        out.push((*name, v));
    }
    for k in 1..=TRACKED_COMPONENTS {
        let v = (k <= r && k <= truth.eigvals.len())
            .then(|| amse_eigenvalue(est.eigvals_function[k - 1], truth.eigvals[k - 1]));
        out.push((METRICS[3 + k], v));
    }
    out.push(("rank", Some(r as f64)));
    out.push(("n_selected", Some(est.n_selected as f64)));
    out.push(("iterations", est.iterations.map(|i| i as f64)));
    out.push(("seconds", Some(seconds)));
    Ok(out)
}

fn not_applicable() -> Vec<(&'static str, Option<f64>)> {
    METRICS.iter().map(|m| (*m, None)).collect()
}

struct ReplicateOutcome {
    rows: Vec<ResultRow>,
    rank_violation: bool,
    non_converged: bool,
}

fn run_replicate(
    rep: usize,
    config: &CampaignConfig,
    methods: &[SimMethod],
    shared: &Shared,
) -> Result<ReplicateOutcome> {
    let seed = config.seed.wrapping_add(rep as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y = DataMatrix::new(shared.truth.sample(config.n_curves, &mut rng))?;
    let max_rank = shared.factor.num_basis().min(config.n_curves);
    let mut rows = Vec::new();
    let mut rank_violation = false;
    let mut non_converged = false;
    for &method in methods {
        let start = Instant::now();
        let cells = match method {
            SimMethod::Face => {
                let fit = face_fit(&y, &shared.factor, &shared.cfg)?;
                rank_violation |= fit.rank() > max_rank;
                let est = Estimate {
                    eigvecs: fit.eigvecs.as_ref(),
                    eigvals_function: &fit.eigvals_function,
                    n_selected: fit.n_selected,
                    iterations: None,
                };
                metrics_for(&est, &shared.truth, start.elapsed().as_secs_f64())?
            }
            SimMethod::FaceIncomplete if config.missing => {
                let mask = mcar_mask(config.grid_len, config.n_curves, seed.wrapping_add(MASK_SEED_OFFSET))?;
                let d = MaskedData::new(y.values().to_owned(), mask)?;
                let (fit, trace) = face_fit_incomplete(&d, &shared.factor, &shared.cfg, config.max_iter, config.tol)?;
                rank_violation |= fit.rank() > max_rank;
                non_converged |= !trace.converged;
                let est = Estimate {
                    eigvecs: fit.eigvecs.as_ref(),
                    eigvals_function: &fit.eigvals_function,
                    n_selected: fit.n_selected,
                    iterations: Some(trace.iterations),
                };
                metrics_for(&est, &shared.truth, start.elapsed().as_secs_f64())?
            }
            SimMethod::FaceIncomplete => not_applicable(),
            SimMethod::Ssvd | SimMethod::SSmooth | SimMethod::Raw => {
                let fit = match method {
                    SimMethod::Raw => raw_svd_fit(&y, None, true)?,
                    SimMethod::Ssvd => ssvd_fit(&y, None, shared.smoother.as_ref().expect("smoother built"), true)?,
                    _ => s_smooth_fit(&y, shared.smoother.as_ref().expect("smoother built"), true)?,
                };
                let est = Estimate {
                    eigvecs: fit.eigvecs.as_ref(),
                    eigvals_function: &fit.eigvals_function,
                    n_selected: fit.n_selected,
                    iterations: None,
                };
                metrics_for(&est, &shared.truth, start.elapsed().as_secs_f64())?
            }
        };
        rows.extend(cells.into_iter().map(|(metric, value)| ResultRow {
            replicate: rep,
            seed,
            method,
            metric,
            value,
        }));
    }
    Ok(ReplicateOutcome {
        rows,
        rank_violation,
        non_converged,
    })
}

/// Runs every replicate (in parallel) and gathers the rows in replicate order.
pub fn run_campaign(config: &CampaignConfig) -> Result<CampaignResult> {
    config.validate()?;
    let methods = config.parsed_methods()?;
    let model = CovModel::case(config.case)?;
    let truth = GridTruth::equispaced(&model, config.grid_len)?;
    let factor = factorize_smoother(&BasisSpec::equispaced(config.grid_len, config.knots))?;
    let needs_smoother = methods.iter().any(|m| matches!(m, SimMethod::Ssvd | SimMethod::SSmooth));
    let smoother = if needs_smoother {
        Some(UnivariateSmoother::for_grid_len(config.grid_len)?)
    } else {
        None
    };
    let shared = Shared {
        truth,
        factor,
        smoother,
        cfg: FaceConfig {
            alpha: config.alpha,
            search: SearchSpec::default(),
            center: true,
        },
    };
    let outcomes: Vec<ReplicateOutcome> = (0..config.replicates)
        .into_par_iter()
        .map(|rep| run_replicate(rep, config, &methods, &shared))
        .collect::<Result<_>>()?;
    let rank_violations = outcomes.iter().filter(|o| o.rank_violation).count();
    let non_converged = outcomes.iter().filter(|o| o.non_converged).count();
    Ok(CampaignResult {
        config: config.clone(),
        methods,
        rows: outcomes.into_iter().flat_map(|o| o.rows).collect(),
        rank_violations,
        non_converged,
    })
}

impl CampaignResult {
    /// Replicate values of one method and metric, skipping "not applicable".
    pub fn values(&self, method: SimMethod, metric: &str) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.method == method && r.metric == metric)
            .filter_map(|r| r.value)
            .collect()
    }

    /// Replicate mean, `None` when no replicate produced a value.
    pub fn mean(&self, method: SimMethod, metric: &str) -> Option<f64> {
        let v = self.values(method, metric);
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn summary(&self) -> Vec<SummaryCell> {
        let mut out = Vec::new();
        for &method in &self.methods {
            for metric in METRICS {
                let v = self.values(method, metric);
                let n = v.len();
                let mean = (n > 0).then(|| v.iter().sum::<f64>() / n as f64);
                let sd = (n > 1).then(|| {
                    let m = mean.unwrap_or(0.0);
                    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
                });
                out.push(SummaryCell {
                    method,
                    metric,
                    mean,
                    sd,
                    count: n,
                });
            }
        }
        out
    }

    /// Per-replicate rows as CSV text, wall times excluded so the output
    /// depends only on the config.
    pub fn rows_csv(&self) -> String {
        self.csv_where(|metric| metric != "seconds")
    }

    /// Per-replicate wall times as CSV text.
    pub fn timings_csv(&self) -> String {
        self.csv_where(|metric| metric == "seconds")
    }

    fn csv_where(&self, keep: impl Fn(&str) -> bool) -> String {
        let mut s = String::from("replicate,seed,method,metric,value\n");
        for r in self.rows.iter().filter(|r| keep(r.metric)) {
            let value = r.value.map_or_else(|| "NA".to_string(), |v| format!("{v:e}"));
            let _ = writeln!(s, "{},{},{},{},{}", r.replicate, r.seed, r.method.name(), r.metric, value);
        }
        s
    }

    /// Replicate means in the layout of the paper-style tables: MISE and
    /// squared eigenvalue errors multiplied by 100.
    pub fn summary_table(&self) -> String {
        let c = &self.config;
        let mut s = format!(
            "Case {} (J = {}, I = {}, {} replicates, {} knots, alpha = {}, seed = {})\n",
            c.case, c.grid_len, c.n_curves, c.replicates, c.knots, c.alpha, c.seed
        );
        let _ = write!(s, "{:<24}", "");
        for m in &self.methods {
            let _ = write!(s, "{:>16}", m.name());
        }
        s.push('\n');
        let rows: [(&str, &str, f64); 8] = [
            ("100 x MISE eigfn 1", "eigfn_mise_1", 100.0),
            ("100 x MISE eigfn 2", "eigfn_mise_2", 100.0),
            ("100 x MISE eigfn 3", "eigfn_mise_3", 100.0),
            ("100 x MISE covariance", "cov_mise", 100.0),
            ("100 x AMSE eigval 1", "eigval_sqerr_1", 100.0),
            ("100 x AMSE eigval 2", "eigval_sqerr_2", 100.0),
            ("100 x AMSE eigval 3", "eigval_sqerr_3", 100.0),
            ("mean seconds", "seconds", 1.0),
        ];
        for (label, metric, scale) in rows {
            let _ = write!(s, "{label:<24}");
            for &m in &self.methods {
                match self.mean(m, metric) {
                    Some(v) => {
                        let _ = write!(s, "{:>16.4}", v * scale);
                    }
                    None => {
                        let _ = write!(s, "{:>16}", "n/a");
                    }
                }
            }
            s.push('\n');
        }
        if self.rank_violations > 0 {
            let _ = writeln!(s, "rank bound violated in {} replicates", self.rank_violations);
        }
        if self.non_converged > 0 {
            let _ = writeln!(s, "incomplete-data fit did not converge in {} replicates", self.non_converged);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(methods: &[&str], missing: bool) -> CampaignConfig {
        CampaignConfig {
            case: 1,
            grid_len: 200,
            n_curves: 20,
            replicates: 2,
            methods: methods.iter().map(|m| m.to_string()).collect(),
            knots: 20,
            alpha: 1.0,
            missing,
            seed: 7,
            max_iter: 50,
            tol: 1e-4,
        }
    }

    #[test]
    fn unknown_method_lists_valid_names() {
        let err = small(&["face", "magic"], false).validate().unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("magic") && msg.contains("s_smooth"), "{msg}");
        let mut cfg = small(&["face"], false);
        cfg.case = 9;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn config_json_round_trip() {
        let json = r#"{"case": 4, "J": 300, "I": 30, "replicates": 3, "methods": ["all"], "seed": 1}"#;
        let cfg: CampaignConfig = serde_json::from_str(json).unwrap();
        assert_eq!(cfg.knots, 100);
        assert_eq!(cfg.parsed_methods().unwrap().len(), 5);
        let back: CampaignConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn campaign_is_reproducible_and_marks_na() {
        let cfg = small(&["all"], false);
        let a = run_campaign(&cfg).unwrap();
        let b = run_campaign(&cfg).unwrap();
        let strip = |r: &CampaignResult| -> Vec<Option<u64>> {
            r.rows
                .iter()
                .filter(|x| x.metric != "seconds")
                .map(|x| x.value.map(f64::to_bits))
                .collect()
        };
        assert_eq!(strip(&a), strip(&b));
        assert!(a.values(SimMethod::FaceIncomplete, "cov_mise").is_empty());
        assert!(a.summary_table().contains("n/a"));
        assert_eq!(a.rank_violations, 0);
    }

    #[test]
    fn missing_campaign_fills_incomplete_column() {
        let cfg = small(&["face", "face_incomplete"], true);
        let r = run_campaign(&cfg).unwrap();
        assert_eq!(r.values(SimMethod::FaceIncomplete, "cov_mise").len(), 2);
        assert!(r.values(SimMethod::FaceIncomplete, "iterations").iter().all(|i| *i >= 2.0));
    }
}
