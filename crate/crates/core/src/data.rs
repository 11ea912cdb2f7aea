//! Reading, writing and rescaling time series matrices.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::TimeSeriesMatrix;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    #[default]
    Csv,
    Tsv,
}

impl TableFormat {
    pub fn delimiter(self) -> u8 {
        match self {
            TableFormat::Csv => b',',
            TableFormat::Tsv => b'\t',
        }
    }

    /// Guess from a file extension, defaulting to CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("tsv") || e.eq_ignore_ascii_case("tab") => TableFormat::Tsv,
            _ => TableFormat::Csv,
        }
    }
}

impl std::str::FromStr for TableFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(TableFormat::Csv),
            "tsv" => Ok(TableFormat::Tsv),
            other => Err(Error::parameter("format", format!("expected csv or tsv, got `{other}`"))),
        }
    }
}

/// Parse a numeric table into raw values plus optional column labels.
/// Line numbers in errors are 1-based file lines.
pub fn read_table(path: &Path, format: TableFormat, has_header: bool) -> Result<(Array2<f64>, Option<Vec<String>>)> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(format.delimiter())
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let parse_err = |line: usize, col: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        col,
        msg,
    };

    let labels = if has_header {
        Some(reader.headers()?.iter().map(str::to_owned).collect::<Vec<_>>())
    } else {
        None
    };

    let mut values = Vec::new();
    let mut width = labels.as_ref().map(Vec::len);
    let mut rows = 0;
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.iter().all(str::is_empty) {
            continue;
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(parse_err(line, record.len().min(w) + 1, format!("expected {w} fields, found {}", record.len())));
            }
            _ => {}
        }
        for (col, cell) in record.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_err(line, col + 1, format!("`{cell}` is not a number")))?;
            if !v.is_finite() {
                return Err(parse_err(line, col + 1, format!("`{cell}` is not finite")));
            }
            values.push(v);
        }
        rows += 1;
    }
    let cols = width.unwrap_or(0);
    let array = Array2::from_shape_vec((rows, cols), values)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    Ok((array, labels))
}

/// Load a time series: rows are time points, columns are variables. Every
/// entry must be finite and strictly positive.
pub fn load_matrix(path: &Path, format: TableFormat, has_header: bool) -> Result<TimeSeriesMatrix> {
    let (values, labels) = read_table(path, format, has_header)?;
    let offset = usize::from(has_header) + 1;
    if let Some(((row, col), &v)) = values.indexed_iter().find(|(_, &v)| v <= 0.0) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: row + offset,
            col: col + 1,
            msg: format!("value {v} is not strictly positive"),
        });
    }
    let m = TimeSeriesMatrix::new(values)?;
    match labels {
        Some(l) => m.with_labels(l),
        None => Ok(m),
    }
}

/// Write a matrix with an optional header row.
pub fn write_table(path: &Path, values: ArrayView2<'_, f64>, format: TableFormat, header: Option<&[String]>) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .delimiter(format.delimiter())
        .from_path(path)?;
    if let Some(h) = header {
        writer.write_record(h)?;
    }
    for row in values.rows() {
        // `{}` on f64 prints the shortest representation that round-trips.
        writer.write_record(row.iter().map(|v| format!("{v}")))?;
    }
    writer.flush()?;
    Ok(())
}

pub fn save_matrix(path: &Path, m: &TimeSeriesMatrix, format: TableFormat) -> Result<()> {
    write_table(path, m.values(), format, m.labels())
}

/// Write a 0/1 matrix as integers, without a header.
pub fn write_binary_matrix(path: &Path, values: ArrayView2<'_, u8>) -> Result<()> {
    let mut out = std::io::BufWriter::new(File::create(path)?);
    for row in values.rows() {
        let line: Vec<String> = row.iter().map(u8::to_string).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    out.flush()?;
    Ok(())
}

/// Read a square 0/1 matrix written by [`write_binary_matrix`].
pub fn read_binary_matrix(path: &Path) -> Result<Array2<u8>> {
    let (values, _) = read_table(path, TableFormat::from_path(path), false)?;
    let (n, m) = values.dim();
    if n != m {
        return Err(Error::Dimension(format!("adjacency matrix is {n}x{m}, expected square")));
    }
    for ((row, col), &v) in values.indexed_iter() {
        if v != 0.0 && v != 1.0 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: row + 1,
                col: col + 1,
                msg: format!("adjacency entries must be 0 or 1, found {v}"),
            });
        }
    }
    Ok(values.mapv(|v| v as u8))
}

fn column_sd(values: ArrayView2<'_, f64>) -> Vec<f64> {
    let n = values.nrows() as f64;
    values
        .axis_iter(Axis(1))
        .map(|c| {
            let mean = c.sum() / n;
            (c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        })
        .collect()
}

/// Make mean-zero data suitable for NMF: multiply every entry by one global
/// factor so the smallest column standard deviation is at least `min_sd`,
/// then add `target_mean`.
///
/// Data that is already positive, with every column sd at least `min_sd` and
/// overall mean within 5% of `target_mean`, is returned unchanged.
pub fn rescale(raw: Array2<f64>, target_mean: f64, min_sd: f64) -> Result<TimeSeriesMatrix> {
    let (t, p) = raw.dim();
    if t < 2 || p < 2 {
        return Err(Error::Data(format!("cannot rescale a {t}x{p} matrix")));
    }
    if let Some(((row, col), _)) = raw.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite { row, col });
    }
    let sds = column_sd(raw.view());
    let min_col_sd = sds.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = raw.mean().unwrap_or(0.0);
    let positive = raw.iter().all(|&v| v > 0.0);
    if positive && min_col_sd >= min_sd && (mean - target_mean).abs() <= 0.05 * target_mean.abs() {
        return TimeSeriesMatrix::new(raw);
    }
    let factor = if min_col_sd > 0.0 && min_col_sd < min_sd {
        min_sd / min_col_sd
    } else {
        1.0
    };
    let scaled = raw.mapv(|v| v * factor + target_mean);
    if let Some(((row, col), &value)) = scaled.indexed_iter().find(|(_, &v)| v <= 0.0) {
        return Err(Error::Rescale { row, col, value });
    }
    TimeSeriesMatrix::new(scaled)
}
