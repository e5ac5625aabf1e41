//! Fast covariance estimation for high-dimensional functional data.
//!
//! Curves are stored as the columns of a `J x I` matrix (`J` grid points,
//! `I` subjects). The covariance of the curves is smoothed with a symmetric
//! P-spline sandwich `S K S` whose eigendecomposition is obtained through a
//! `c x c` problem, so no `J x J` matrix is ever formed. Around that core the
//! crate provides smoothing-parameter selection by pooled GCV, principal
//! scores, structured (`Y H Y^T`) covariances, an iterative scheme for curves
//! with missing stretches, two simpler baselines and a simulation harness.
//!
//! All matrices are [`faer::Mat<f64>`] in column-major storage.

pub mod alt;
pub mod basis;
mod error;
pub mod face;
pub mod incomplete;
pub mod linalg;
pub mod sim;
pub mod structured;

pub use faer::{Mat, MatRef};

pub use alt::{raw_svd_fit, s_smooth_fit, smooth_curve, ssvd_fit, AltFit, AltMethod, UnivariateSmoother};
pub use basis::{bspline_design, difference_penalty, factorize_smoother, BasisSpec, SmootherFactor};
pub use error::{FaceError, Result};
pub use face::{
    face_fit, pgcv, project_data, scores_blup, scores_numeric, select_lambda, DataMatrix, FaceConfig, FaceFit,
    LambdaSelection, PgcvStats, ScoreMethod, Scores, SearchSpec,
};
pub use incomplete::{face_fit_incomplete, impute_step, initialize_missing, ImputeTrace, Imputation, Mask, MaskedData};
pub use linalg::{inv_sqrt_sym, sym_eig, thin_svd, SymEig, ThinSvd};
pub use structured::{build_pair_designs, face_fit_structured, psd_factor, StructuredDesign};

/// Library version, embedded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
