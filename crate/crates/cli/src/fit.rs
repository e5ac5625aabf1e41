//! `face fit`: estimate eigenfunctions of a data file and write them out.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use face_core::linalg::t_mul;
use face_core::{
    build_pair_designs, face_fit, face_fit_incomplete, face_fit_structured, factorize_smoother, s_smooth_fit,
    ssvd_fit, AltFit, BasisSpec, DataMatrix, FaceConfig, FaceFit, Mat, MatRef, MaskedData, ScoreMethod, SearchSpec,
    StructuredDesign, UnivariateSmoother,
};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::matrix_io::{read_matrix, write_csv};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Face,
    Ssvd,
    Ssmooth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Center {
    /// Subtract the mean curve.
    Auto,
    /// Use the data as given.
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreChoice {
    None,
    Numeric,
    Blup,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    /// Data matrix (CSV or packed binary); rows are grid points, columns are curves.
    pub input: PathBuf,
    /// Directory for the output files.
    #[arg(short, long, default_value = "face_out")]
    pub out_dir: PathBuf,
    /// Interior knots of the P-spline basis.
    #[arg(long, default_value_t = 100)]
    pub knots: usize,
    /// PGCV inflation factor (>= 1).
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value_t = Method::Face)]
    pub method: Method,
    #[arg(long, value_enum, default_value_t = Center::Auto)]
    pub center: Center,
    /// Paired design: the first half of the columns are the A curves and the
    /// second half the matching C curves. Fits the shared and the
    /// within-pair covariance separately.
    #[arg(long)]
    pub pairs: bool,
    #[arg(long, value_enum, default_value_t = ScoreChoice::None)]
    pub scores: ScoreChoice,
    /// The CSV input starts with a header row.
    #[arg(long)]
    pub header: bool,
    /// Iteration cap for curves with missing values.
    #[arg(long, default_value_t = 50)]
    pub max_iter: usize,
    /// Convergence tolerance for curves with missing values.
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Outputs {
    pub eigenvectors: String,
    pub eigenvalues: String,
    pub scores: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub version: &'static str,
    pub config_sha256: String,
    pub input_sha256: String,
    pub method: Method,
    /// `plain`, `incomplete`, `structured:K_X` or `structured:K_U`.
    pub mode: String,
    pub grid_points: usize,
    pub curves: usize,
    pub knots: usize,
    pub alpha: f64,
    pub lambda: Option<f64>,
    pub n_components: usize,
    pub sigma2: Option<f64>,
    /// Eigenvalues of the covariance function.
    pub eigenvalues: Vec<f64>,
    pub variance_explained: Vec<f64>,
    pub cumulative_variance: Vec<f64>,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
    pub missing_fraction: f64,
    pub outputs: Outputs,
    /// Wall time of FACE steps 1-7 in seconds.
    pub step_seconds: Option<[f64; 7]>,
    pub warnings: Vec<String>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn cumulative(v: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    v.iter()
        .map(|x| {
            acc += x;
            acc.min(1.0)
        })
        .collect()
}

/// Fits and writes all outputs; returns one report per fitted operator.
pub fn run(args: &FitArgs) -> Result<Vec<FitReport>> {
    if args.alpha < 1.0 {
        bail!("--alpha must be >= 1, got {}", args.alpha);
    }
    let y = read_matrix(&args.input, args.header)?;
    let bytes = fs::read(&args.input)?;
    let input_sha256 = sha256_hex(&bytes);
    let config_sha256 = sha256_hex(serde_json::to_string(args)?.as_bytes());
    let (j, n) = (y.nrows(), y.ncols());
    let n_missing = (0..n).flat_map(|c| (0..j).map(move |r| (r, c))).filter(|&(r, c)| y[(r, c)].is_nan()).count();
    let missing_fraction = n_missing as f64 / (j * n) as f64;
    if n_missing > 0 && args.method != Method::Face {
        bail!("the data contain missing values; only --method face supports them");
    }
    if n_missing > 0 && args.pairs {
        bail!("--pairs requires complete data");
    }
    fs::create_dir_all(&args.out_dir).with_context(|| format!("cannot create {}", args.out_dir.display()))?;

    let base = ReportBase {
        config_sha256,
        input_sha256,
        missing_fraction,
        args: args.clone(),
    };
    let cfg = FaceConfig {
        alpha: args.alpha,
        search: SearchSpec::default(),
        center: args.center == Center::Auto,
    };

    let mut reports = Vec::new();
    if args.pairs {
        if args.method != Method::Face {
            bail!("--pairs is only available with --method face");
        }
        if n % 2 != 0 {
            bail!("--pairs needs an even number of columns, got {n}");
        }
        let factor = factorize_smoother(&BasisSpec::equispaced(j, args.knots))?;
        let (hx, hu) = build_pair_designs(n / 2)?;
        let data = DataMatrix::new(y)?;
        for (design, prefix) in [(&hx, "kx_"), (&hu, "ku_")] {
            let fit = face_fit_structured(&data, design, &factor, &cfg)?;
            reports.push(write_face(&base, &fit, data.values(), prefix, &structured_mode(design), None)?);
        }
    } else if args.method == Method::Face {
        let factor = factorize_smoother(&BasisSpec::equispaced(j, args.knots))?;
        if n_missing > 0 {
            let d = MaskedData::from_nan(y)?;
            let (fit, trace) = face_fit_incomplete(&d, &factor, &cfg, args.max_iter, args.tol)?;
            let mut report = write_face(
                &base,
                &fit,
                trace.completed.as_ref(),
                "",
                "incomplete",
                Some((trace.iterations, trace.converged)),
            )?;
            report.warnings.extend(trace.warnings);
            reports.push(report);
        } else {
            let data = DataMatrix::new(y)?;
            let fit = face_fit(&data, &factor, &cfg)?;
            reports.push(write_face(&base, &fit, data.values(), "", "plain", None)?);
        }
    } else {
        let data = DataMatrix::new(y)?;
        let sm = UnivariateSmoother::for_grid_len(j)?;
        let center = args.center == Center::Auto;
        let fit = match args.method {
            Method::Ssvd => ssvd_fit(&data, None, &sm, center)?,
            _ => s_smooth_fit(&data, &sm, center)?,
        };
        reports.push(write_alt(&base, &fit, data.values(), sm.factor().basis().num_interior_knots)?);
    }
    for (report, prefix) in reports.iter().zip(report_prefixes(args.pairs)) {
        let path = args.out_dir.join(format!("{prefix}report.json"));
        fs::write(&path, serde_json::to_string_pretty(report)? + "\n")?;
    }
    Ok(reports)
}

fn report_prefixes(pairs: bool) -> Vec<&'static str> {
    if pairs {
        vec!["kx_", "ku_"]
    } else {
        vec![""]
    }
}

fn structured_mode(design: &StructuredDesign) -> String {
    format!("structured:{}", design.label)
}

struct ReportBase {
    config_sha256: String,
    input_sha256: String,
    missing_fraction: f64,
    args: FitArgs,
}

fn eigen_files(
    out_dir: &Path,
    prefix: &str,
    vectors: Mat<f64>,
    eigvals_function: &[f64],
    explained: &[f64],
) -> Result<(String, String)> {
    let vec_name = format!("{prefix}eigenvectors.csv");
    let header: Vec<String> = (1..=vectors.ncols()).map(|k| format!("psi{k}")).collect();
    write_csv(&out_dir.join(&vec_name), vectors.as_ref(), Some(&header))?;

    let val_name = format!("{prefix}eigenvalues.csv");
    let cum = cumulative(explained);
    let table = Mat::from_fn(eigvals_function.len(), 4, |k, c| match c {
        0 => (k + 1) as f64,
        1 => eigvals_function[k],
        2 => explained[k],
        _ => cum[k],
    });
    let header: Vec<String> = ["component", "eigenvalue", "variance_explained", "cumulative"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    write_csv(&out_dir.join(&val_name), table.as_ref(), Some(&header))?;
    Ok((vec_name, val_name))
}

fn score_file(out_dir: &Path, prefix: &str, xi: &Mat<f64>) -> Result<String> {
    let name = format!("{prefix}scores.csv");
    let header: Vec<String> = (1..=xi.ncols()).map(|k| format!("xi{k}")).collect();
    write_csv(&out_dir.join(&name), xi.as_ref(), Some(&header))?;
    Ok(name)
}

fn write_face(
    base: &ReportBase,
    fit: &FaceFit,
    curves: MatRef<'_, f64>,
    prefix: &str,
    mode: &str,
    iterations: Option<(usize, bool)>,
) -> Result<FitReport> {
    let args = &base.args;
    let n = fit.n_selected;
    let explained = fit.variance_explained();
    let (vectors, values) = eigen_files(
        &args.out_dir,
        prefix,
        fit.eigenfunctions(n),
        &fit.eigvals_function[..n],
        &explained[..n],
    )?;
    let scores = match args.scores {
        ScoreChoice::None => None,
        choice => {
            let method = if choice == ScoreChoice::Blup {
                ScoreMethod::Blup
            } else {
                ScoreMethod::NumericIntegration
            };
            let s = fit.scores_for(curves, method)?;
            Some(score_file(&args.out_dir, prefix, &s.xi)?)
        }
    };
    Ok(FitReport {
        version: face_core::VERSION,
        config_sha256: base.config_sha256.clone(),
        input_sha256: base.input_sha256.clone(),
        method: Method::Face,
        mode: mode.to_string(),
        grid_points: fit.grid_len(),
        curves: curves.ncols(),
        knots: args.knots,
        alpha: fit.alpha,
        lambda: Some(fit.lambda),
        n_components: n,
        sigma2: Some(fit.sigma2),
        eigenvalues: fit.eigvals_function[..n].to_vec(),
        cumulative_variance: cumulative(&explained[..n]),
        variance_explained: explained[..n].to_vec(),
        iterations: iterations.map(|i| i.0),
        converged: iterations.map(|i| i.1),
        missing_fraction: base.missing_fraction,
        outputs: Outputs {
            eigenvectors: vectors,
            eigenvalues: values,
            scores,
        },
        step_seconds: Some(fit.step_timings.map(|d| d.as_secs_f64())),
        warnings: fit.warnings.clone(),
    })
}

fn write_alt(base: &ReportBase, fit: &AltFit, curves: MatRef<'_, f64>, knots: usize) -> Result<FitReport> {
    let args = &base.args;
    let n = fit.n_selected;
    let j = curves.nrows();
    let total: f64 = fit.eigvals_matrix.iter().sum();
    let explained: Vec<f64> = fit
        .eigvals_matrix
        .iter()
        .map(|v| if total > 0.0 { v / total } else { 0.0 })
        .collect();
    let sj = (j as f64).sqrt();
    let psi = Mat::from_fn(j, n, |r, k| fit.eigvecs[(r, k)] * sj);
    let (vectors, values) = eigen_files(&args.out_dir, "", psi, &fit.eigvals_function[..n], &explained[..n])?;
    let scores = match args.scores {
        ScoreChoice::None => None,
        ScoreChoice::Blup => bail!("--scores blup needs a noise variance estimate; use --method face"),
        ScoreChoice::Numeric => {
            let centered = Mat::from_fn(j, curves.ncols(), |r, c| curves[(r, c)] - fit.mean[r]);
            let proj = t_mul(fit.eigvecs.as_ref().subcols(0, n), centered.as_ref());
            let xi = Mat::from_fn(curves.ncols(), n, |i, k| proj[(k, i)] / sj);
            Some(score_file(&args.out_dir, "", &xi)?)
        }
    };
    Ok(FitReport {
        version: face_core::VERSION,
        config_sha256: base.config_sha256.clone(),
        input_sha256: base.input_sha256.clone(),
        method: args.method,
        mode: "plain".to_string(),
        grid_points: j,
        curves: curves.ncols(),
        knots,
        alpha: args.alpha,
        lambda: None,
        n_components: n,
        sigma2: None,
        eigenvalues: fit.eigvals_function[..n].to_vec(),
        cumulative_variance: cumulative(&explained[..n]),
        variance_explained: explained[..n].to_vec(),
        iterations: None,
        converged: None,
        missing_fraction: base.missing_fraction,
        outputs: Outputs {
            eigenvectors: vectors,
            eigenvalues: values,
            scores,
        },
        step_seconds: None,
        warnings: Vec::new(),
    })
}
