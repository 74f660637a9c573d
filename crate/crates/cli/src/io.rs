//! Matrix files.
//!
//! Two formats are accepted. CSV starts with a `rows,cols` header line
//! followed by one line per row. Binary (`.bin`) is raw little-endian f64 in
//! row-major order, described by a JSON sidecar with the same stem.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use decompose::DataMatrix;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Sidecar {
    rows: usize,
    cols: usize,
    dtype: String,
    order: String,
}

pub fn is_binary(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "bin")
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Shortest representation that parses back to the same bits.
pub fn format_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub fn read_matrix(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    if is_binary(path) {
        read_binary(path)
    } else {
        read_csv(path)
    }
}

/// Reads a matrix and checks it is a valid data matrix.
pub fn read_data(path: &Path) -> Result<DataMatrix> {
    let (rows, cols, values) = read_matrix(path)?;
    DataMatrix::from_row_major(rows, cols, values).with_context(|| format!("{}", path.display()))
}

fn read_csv(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut records = reader.records();
    let where_ = |rec: &csv::StringRecord| {
        let line = rec.position().map_or(0, |p| p.line());
        format!("{}:{line}", path.display())
    };

    let header = match records.next() {
        Some(r) => r.with_context(|| format!("{}: malformed header", path.display()))?,
        None => bail!("{}: empty file, expected a 'rows,cols' header", path.display()),
    };
    ensure!(
        header.len() == 2,
        "{}: header must be 'rows,cols', got {} fields",
        where_(&header),
        header.len()
    );
    let dim = |i: usize| -> Result<usize> {
        header[i].parse().with_context(|| {
            format!(
                "{}, column {}: invalid dimension '{}'",
                where_(&header),
                i + 1,
                &header[i]
            )
        })
    };
    let (rows, cols) = (dim(0)?, dim(1)?);

    let mut values = Vec::with_capacity(rows * cols);
    let mut seen = 0;
    for rec in records {
        let rec = rec.with_context(|| format!("{}: malformed row", path.display()))?;
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        seen += 1;
        ensure!(seen <= rows, "{}: more than {rows} data rows", where_(&rec));
        ensure!(
            rec.len() == cols,
            "{}: expected {cols} values, got {}",
            where_(&rec),
            rec.len()
        );
        for (j, field) in rec.iter().enumerate() {
            let v: f64 = field
                .parse()
                .with_context(|| format!("{}, column {}: invalid number '{field}'", where_(&rec), j + 1))?;
            values.push(v);
        }
    }
    ensure!(
        seen == rows,
        "{}: expected {rows} data rows, got {seen}",
        path.display()
    );
    Ok((rows, cols, values))
}

fn read_binary(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let side = sidecar_path(path);
    let meta: Sidecar =
        serde_json::from_slice(&fs::read(&side).with_context(|| format!("cannot read sidecar {}", side.display()))?)
            .with_context(|| format!("{}: invalid sidecar", side.display()))?;
    ensure!(
        meta.dtype == "f64",
        "{}: unsupported dtype '{}'",
        side.display(),
        meta.dtype
    );
    ensure!(
        meta.order == "row-major",
        "{}: unsupported order '{}'",
        side.display(),
        meta.order
    );
    let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    let expected = meta.rows * meta.cols * 8;
    ensure!(
        bytes.len() == expected,
        "{}: {} bytes, expected {expected} for {}x{} f64",
        path.display(),
        bytes.len(),
        meta.rows,
        meta.cols
    );
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok((meta.rows, meta.cols, values))
}

/// Writes a row-major matrix in the format chosen by the extension.
pub fn write_matrix(path: &Path, rows: usize, cols: usize, values: &[f64]) -> Result<()> {
    assert_eq!(values.len(), rows * cols);
    if is_binary(path) {
        let mut out = BufWriter::new(File::create(path).with_context(|| format!("cannot create {}", path.display()))?);
        for v in values {
            out.write_all(&v.to_le_bytes())?;
        }
        out.flush()?;
        let meta = Sidecar {
            rows,
            cols,
            dtype: "f64".into(),
            order: "row-major".into(),
        };
        fs::write(sidecar_path(path), serde_json::to_string_pretty(&meta)? + "\n")?;
        return Ok(());
    }
    let mut out = BufWriter::new(File::create(path).with_context(|| format!("cannot create {}", path.display()))?);
    writeln!(out, "{rows},{cols}")?;
    for row in values.chunks(cols.max(1)) {
        let line: Vec<String> = row.iter().map(|&v| format_f64(v)).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a vector stored as an n×1 matrix.
pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let (_, cols, values) = read_matrix(path)?;
    ensure!(cols == 1, "{}: expected a single column, got {cols}", path.display());
    Ok(values)
}

pub fn write_vector(path: &Path, values: &[f64]) -> Result<()> {
    write_matrix(path, values.len(), 1, values)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("cannot write {}", path.display()))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_slice(&bytes).with_context(|| format!("{}: invalid JSON", path.display()))
}
