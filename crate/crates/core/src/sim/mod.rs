//! Simulation harness: covariance models, noisy samples, block-missing
//! masks, error metrics, Monte Carlo campaigns and timing.

pub mod bessel;
pub mod campaign;
pub mod metrics;
pub mod missing;
pub mod models;
pub mod timing;

pub use bessel::{bessel_k1, matern_cov};
pub use campaign::{run_campaign, CampaignConfig, CampaignResult, ResultRow, SimMethod, SummaryCell, METRICS};
pub use metrics::{amse_eigenvalue, mise_covariance, mise_eigenfunction};
pub use missing::{block_len, mcar_blocks, mcar_mask};
pub use models::{generate_sample, true_cov_matrix, BasisFamily, CovModel, GridTruth};
pub use timing::{median_time, naive_sandwich, run_bench, BenchMethod, BenchRow};
