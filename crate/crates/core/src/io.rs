//! File ingestion for matrices, vectors and IMRT region partitions.
//!
//! Supported inputs:
//! - dense CSV: one matrix row per line, comma separated, no header;
//! - Matrix Market `coordinate real general|symmetric` files, densified on load;
//! - vectors as CSV, either one value per line or a single comma-separated row;
//! - region files with columns `voxel_index,region_id,is_target[,dose_bound]`.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_f64(path: &Path, line: usize, field: &str) -> Result<f64> {
    let t = field.trim();
    let value = match t.to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" => f64::INFINITY,
        "-inf" | "-infinity" => f64::NEG_INFINITY,
        _ => t
            .parse::<f64>()
            .map_err(|e| parse_err(path, line, format!("invalid number {t:?}: {e}")))?,
    };
    if value.is_nan() {
        return Err(parse_err(path, line, "NaN entries are not allowed"));
    }
    Ok(value)
}

/// Loads a matrix, choosing the format from the extension (`.mtx` is
/// Matrix Market, anything else dense CSV).
pub fn load_matrix(path: &Path) -> Result<Matrix> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("mtx") => load_matrix_market(path),
        _ => load_csv_matrix(path),
    }
}

pub fn load_csv_matrix(path: &Path) -> Result<Matrix> {
    parse_csv_matrix(&read(path)?, path)
}

pub fn parse_csv_matrix(text: &str, path: &Path) -> Result<Matrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| parse_f64(path, i + 1, f))
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(parse_err(
                    path,
                    i + 1,
                    format!("expected {} columns, found {}", first.len(), row.len()),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_err(path, 0, "matrix file is empty"));
    }
    let cols = rows[0].len();
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    if flat.iter().any(|v| !v.is_finite()) {
        return Err(parse_err(path, 0, "matrix entries must be finite"));
    }
    Ok(Matrix::from_row_slice(rows.len(), cols, &flat))
}

pub fn load_matrix_market(path: &Path) -> Result<Matrix> {
    parse_matrix_market(&read(path)?, path)
}

pub fn parse_matrix_market(text: &str, path: &Path) -> Result<Matrix> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "missing Matrix Market header"))?;
    let tokens: Vec<String> = header.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if tokens.len() < 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(parse_err(path, 1, "expected '%%MatrixMarket matrix ...' header"));
    }
    if tokens[2] != "coordinate" {
        return Err(parse_err(path, 1, "only the coordinate format is supported"));
    }
    if tokens[3] != "real" && tokens[3] != "integer" {
        return Err(parse_err(path, 1, format!("unsupported field type {}", tokens[3])));
    }
    let symmetric = match tokens[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(parse_err(path, 1, format!("unsupported symmetry {other}"))),
    };

    let mut dims: Option<(usize, usize, usize)> = None;
    let mut matrix = Matrix::zeros(0, 0);
    let mut seen = 0usize;
    for (i, line) in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        match dims {
            None => {
                if fields.len() != 3 {
                    return Err(parse_err(path, i + 1, "size line must hold rows, cols, entries"));
                }
                let parse = |s: &str| {
                    s.parse::<usize>()
                        .map_err(|e| parse_err(path, i + 1, format!("invalid size {s:?}: {e}")))
                };
                let (r, c, nnz) = (parse(fields[0])?, parse(fields[1])?, parse(fields[2])?);
                matrix = Matrix::zeros(r, c);
                dims = Some((r, c, nnz));
            }
            Some((r, c, _)) => {
                if fields.len() != 3 {
                    return Err(parse_err(path, i + 1, "entry line must hold row, col, value"));
                }
                let idx = |s: &str, bound: usize| -> Result<usize> {
                    let k = s
                        .parse::<usize>()
                        .map_err(|e| parse_err(path, i + 1, format!("invalid index {s:?}: {e}")))?;
                    if k == 0 || k > bound {
                        return Err(parse_err(path, i + 1, format!("index {k} out of range 1..={bound}")));
                    }
                    Ok(k - 1)
                };
                let (row, col) = (idx(fields[0], r)?, idx(fields[1], c)?);
                let value = parse_f64(path, i + 1, fields[2])?;
                matrix[(row, col)] += value;
                if symmetric && row != col {
                    matrix[(col, row)] += value;
                }
                seen += 1;
            }
        }
    }
    let (_, _, nnz) = dims.ok_or_else(|| parse_err(path, 0, "missing size line"))?;
    if seen != nnz {
        return Err(parse_err(path, 0, format!("expected {nnz} entries, found {seen}")));
    }
    Ok(matrix)
}

/// Loads a vector stored one value per line or as one comma-separated row.
pub fn load_vector(path: &Path) -> Result<Vector> {
    parse_vector(&read(path)?, path)
}

pub fn parse_vector(text: &str, path: &Path) -> Result<Vector> {
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        for field in line.split(',') {
            values.push(parse_f64(path, i + 1, field)?);
        }
    }
    Ok(Vector::from_vec(values))
}

/// One row of a region file.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionEntry {
    pub voxel: usize,
    pub region: usize,
    pub is_target: bool,
    pub dose_bound: Option<f64>,
}

pub fn load_regions(path: &Path) -> Result<Vec<RegionEntry>> {
    parse_regions(&read(path)?, path)
}

pub fn parse_regions(text: &str, path: &Path) -> Result<Vec<RegionEntry>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            parse_err(path, line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.get(0) == Some("voxel_index") {
            continue;
        }
        if record.len() != 3 && record.len() != 4 {
            return Err(parse_err(path, line, format!("expected 3 or 4 columns, found {}", record.len())));
        }
        let int = |s: &str| {
            s.parse::<usize>()
                .map_err(|e| parse_err(path, line, format!("invalid index {s:?}: {e}")))
        };
        let is_target = match record[2].to_ascii_lowercase().as_str() {
            "1" | "true" | "t" | "yes" => true,
            "0" | "false" | "f" | "no" => false,
            other => return Err(parse_err(path, line, format!("invalid target flag {other:?}"))),
        };
        let dose_bound = match record.get(3) {
            Some(s) if !s.is_empty() => Some(parse_f64(path, line, s)?),
            _ => None,
        };
        out.push(RegionEntry {
            voxel: int(&record[0])?,
            region: int(&record[1])?,
            is_target,
            dose_bound,
        });
    }
    Ok(out)
}

pub fn write_csv_matrix(path: &Path, m: &Matrix) -> Result<()> {
    let mut text = String::new();
    for row in m.row_iter() {
        let fields: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        text.push_str(&fields.join(","));
        text.push('\n');
    }
    write_text(path, &text)
}

pub fn write_vector(path: &Path, v: &Vector) -> Result<()> {
    let text: String = v.iter().map(|x| format!("{x:?}\n")).collect();
    write_text(path, &text)
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
