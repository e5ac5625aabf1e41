//! Matrix files: CSV (rows = grid points, columns = subjects) and a packed
//! binary layout `"FACE0001"`, `u64` rows, `u64` cols, column-major `f64`,
//! all little-endian. Missing values are `NA`/`NaN`/empty in CSV and NaN
//! in binary.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use face_core::{Mat, MatRef};

pub const MAGIC: &[u8; 8] = b"FACE0001";

const NA_TOKENS: [&str; 3] = ["NA", "NaN", ""];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Csv,
    Binary,
}

impl MatrixFormat {
    /// `.bin` and `.face` mean binary, anything else CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin" | "face") => MatrixFormat::Binary,
            _ => MatrixFormat::Csv,
        }
    }
}

/// Reads a matrix, recognizing the binary layout by its magic bytes.
pub fn read_matrix(path: &Path, csv_header: bool) -> Result<Mat<f64>> {
    let mut file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let mut head = [0u8; 8];
    let n = read_up_to(&mut file, &mut head)?;
    drop(file);
    if n == 8 && &head == MAGIC {
        read_binary(path)
    } else {
        read_csv(path, csv_header)
    }
}

fn read_up_to(r: &mut impl Read, buf: &mut [u8]) -> Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        let k = r.read(&mut buf[filled..])?;
        if k == 0 {
            break;
        }
        filled += k;
    }
    Ok(filled)
}

pub fn read_csv(path: &Path, header: bool) -> Result<Mat<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot open {}", path.display()))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record.with_context(|| format!("{}: malformed CSV", path.display()))?;
        let line = idx + 1 + usize::from(header);
        let row = record
            .iter()
            .enumerate()
            .map(|(col, field)| parse_field(field).with_context(|| format!("line {line}, column {}", col + 1)))
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                bail!("line {line} has {} fields, expected {}", row.len(), first.len());
            }
        }
        rows.push(row);
    }
    if rows.is_empty() || rows[0].is_empty() {
        bail!("{} contains no data", path.display());
    }
    Ok(Mat::from_fn(rows.len(), rows[0].len(), |r, c| rows[r][c]))
}

fn parse_field(field: &str) -> Result<f64> {
    if NA_TOKENS.contains(&field) {
        return Ok(f64::NAN);
    }
    let v: f64 = field.parse().with_context(|| format!("not a number: {field:?}"))?;
    if v.is_infinite() {
        bail!("infinite value {field:?}");
    }
    Ok(v)
}

pub fn read_binary(path: &Path) -> Result<Mat<f64>> {
    let mut r = BufReader::new(File::open(path).with_context(|| format!("cannot open {}", path.display()))?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).context("truncated header")?;
    if &magic != MAGIC {
        bail!("{} is not a packed FACE matrix (bad magic bytes)", path.display());
    }
    let mut word = [0u8; 8];
    r.read_exact(&mut word).context("truncated header")?;
    let rows = u64::from_le_bytes(word) as usize;
    r.read_exact(&mut word).context("truncated header")?;
    let cols = u64::from_le_bytes(word) as usize;
    let expected = rows.checked_mul(cols).context("matrix dimensions overflow")?;
    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;
    if payload.len() != expected * 8 {
        bail!(
            "{} declares {rows} x {cols} values but holds {} bytes of payload",
            path.display(),
            payload.len()
        );
    }
    let values: Vec<f64> = payload
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
        .collect();
    Ok(Mat::from_fn(rows, cols, |i, j| values[j * rows + i]))
}

pub fn write_matrix(path: &Path, m: MatRef<'_, f64>) -> Result<()> {
    match MatrixFormat::from_path(path) {
        MatrixFormat::Binary => write_binary(path, m),
        MatrixFormat::Csv => write_csv(path, m, None),
    }
}

pub fn write_binary(path: &Path, m: MatRef<'_, f64>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("cannot create {}", path.display()))?);
    w.write_all(MAGIC)?;
    w.write_all(&(m.nrows() as u64).to_le_bytes())?;
    w.write_all(&(m.ncols() as u64).to_le_bytes())?;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            w.write_all(&m[(i, j)].to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes shortest round-trip decimal representations; NaN becomes `NA`.
pub fn write_csv(path: &Path, m: MatRef<'_, f64>, header: Option<&[String]>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot create {}", path.display()))?;
    if let Some(h) = header {
        w.write_record(h)?;
    }
    for i in 0..m.nrows() {
        w.write_record((0..m.ncols()).map(|j| format_value(m[(i, j)])))?;
    }
    w.flush()?;
    Ok(())
}

pub fn format_value(v: f64) -> String {
    if v.is_nan() {
        "NA".to_string()
    } else {
        v.to_string()
    }
}
