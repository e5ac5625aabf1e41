//! `face simulate`: Monte Carlo campaign from a JSON config.

use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use face_core::sim::{run_campaign, CampaignConfig, CampaignResult};

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Campaign config, e.g.
    /// {"case": 1, "J": 3000, "I": 50, "replicates": 200, "methods": ["all"], "seed": 1}.
    pub config: PathBuf,
    #[arg(short, long, default_value = "face_sim")]
    pub out_dir: PathBuf,
    /// Overrides the seed in the config file.
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn load_config(args: &SimulateArgs) -> Result<CampaignConfig> {
    let text = fs::read_to_string(&args.config).with_context(|| format!("cannot read {}", args.config.display()))?;
    let mut cfg: CampaignConfig =
        serde_json::from_str(&text).with_context(|| format!("invalid campaign config {}", args.config.display()))?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Writes `results.csv` (one row per replicate, method and metric),
/// `timings.csv` and `summary.txt`.
pub fn run(args: &SimulateArgs) -> Result<CampaignResult> {
    let cfg = load_config(args)?;
    let result = run_campaign(&cfg)?;
    fs::create_dir_all(&args.out_dir).with_context(|| format!("cannot create {}", args.out_dir.display()))?;
    fs::write(args.out_dir.join("results.csv"), result.rows_csv())?;
    fs::write(args.out_dir.join("timings.csv"), result.timings_csv())?;
    fs::write(args.out_dir.join("summary.txt"), result.summary_table())?;
    Ok(result)
}
