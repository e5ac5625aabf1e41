//! `face bench`: wall-time study over grid sizes and knot counts.

use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use face_core::sim::{run_bench, BenchMethod, BenchRow};

use crate::plot::runtime_svg;

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// Comma-separated JxI sizes.
    #[arg(long, value_delimiter = ',', default_value = "1000x500,3000x500,5000x500,10000x500")]
    pub sizes: Vec<String>,
    /// Comma-separated knot counts for FACE.
    #[arg(long, value_delimiter = ',', default_value = "100,500")]
    pub knots: Vec<usize>,
    /// Comma-separated methods: face, ssvd, ssmooth, sandwich.
    #[arg(long, value_delimiter = ',', default_value = "face,ssvd,ssmooth,sandwich")]
    pub methods: Vec<String>,
    /// Timed runs per cell (the median is reported).
    #[arg(long, default_value_t = 3)]
    pub reps: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(short, long, default_value = "face_bench")]
    pub out_dir: PathBuf,
}

pub fn parse_size(s: &str) -> Result<(usize, usize)> {
    let Some((j, i)) = s.trim().split_once(['x', 'X']) else {
        bail!("size {s:?} is not of the form JxI");
    };
    let j: usize = j.parse().with_context(|| format!("bad J in {s:?}"))?;
    let i: usize = i.parse().with_context(|| format!("bad I in {s:?}"))?;
    if j == 0 || i == 0 {
        bail!("size {s:?} must be positive");
    }
    Ok((j, i))
}

pub fn rows_csv(rows: &[BenchRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["method", "J", "I", "knots", "seconds", "note"])?;
    for r in rows {
        w.write_record([
            r.method.name().to_string(),
            r.grid_len.to_string(),
            r.n_curves.to_string(),
            r.knots.map(|k| k.to_string()).unwrap_or_default(),
            r.seconds.map(|s| format!("{s:.6}")).unwrap_or_else(|| "NA".into()),
            r.note.clone().unwrap_or_default(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

/// Writes `bench.csv` and `bench.svg`.
pub fn run(args: &BenchArgs) -> Result<Vec<BenchRow>> {
    if args.reps == 0 {
        bail!("--reps must be at least 1");
    }
    let sizes = args.sizes.iter().map(|s| parse_size(s)).collect::<Result<Vec<_>>>()?;
    let methods = args
        .methods
        .iter()
        .map(|m| BenchMethod::parse(m))
        .collect::<face_core::Result<Vec<_>>>()?;
    let rows = run_bench(&sizes, &args.knots, &methods, args.reps, args.seed)?;
    for r in &rows {
        if let Some(note) = &r.note {
            eprintln!("{} at J = {}: {note}", r.method.name(), r.grid_len);
        }
    }
    fs::create_dir_all(&args.out_dir).with_context(|| format!("cannot create {}", args.out_dir.display()))?;
    fs::write(args.out_dir.join("bench.csv"), rows_csv(&rows)?)?;
    fs::write(args.out_dir.join("bench.svg"), runtime_svg(&rows))?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_parse() {
        assert_eq!(parse_size("3000x500").unwrap(), (3000, 500));
        assert_eq!(parse_size(" 10X2 ").unwrap(), (10, 2));
        assert!(parse_size("3000").is_err());
        assert!(parse_size("0x5").is_err());
    }
}
