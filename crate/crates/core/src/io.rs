//! CSV and manifest files. Floats are written with 17 significant digits.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use crate::linalg::{c, CMatrix, C64};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path}: expected header {expected}, found {found}")]
    Header { path: String, expected: String, found: String },
    #[error("{path}, record {record}: {message}")]
    Parse { path: String, record: usize, message: String },
}

/// Fixed 17-significant-digit rendering; bit-exact for a given value.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv<I>(path: &Path, header: &[&str], rows: I) -> Result<(), IoError>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let csv_err = |source| IoError::Csv { path: path.display().to_string(), source };
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|source| IoError::File { path: path.display().to_string(), source })
}

/// Nonzero entries as `i,j,re,im` with 0-based indices.
pub fn write_matrix_csv(path: &Path, m: &CMatrix) -> Result<(), IoError> {
    let mut rows = Vec::new();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let v = m[(i, j)];
            if v != c(0.0, 0.0) {
                rows.push(vec![i.to_string(), j.to_string(), fmt_f64(v.re), fmt_f64(v.im)]);
            }
        }
    }
    write_csv(path, &["i", "j", "re", "im"], rows)
}

fn read_records(path: &Path, expected: &[&str]) -> Result<Vec<csv::StringRecord>, IoError> {
    let name = path.display().to_string();
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|source| IoError::Csv { path: name.clone(), source })?;
    let header = r.headers().map_err(|source| IoError::Csv { path: name.clone(), source })?.clone();
    if header.iter().collect::<Vec<_>>() != expected {
        return Err(IoError::Header {
            path: name,
            expected: expected.join(","),
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }
    r.records().collect::<Result<Vec<_>, _>>().map_err(|source| IoError::Csv { path: name, source })
}

fn parse_field<T: std::str::FromStr>(path: &Path, record: usize, text: &str) -> Result<T, IoError> {
    text.parse().map_err(|_| IoError::Parse {
        path: path.display().to_string(),
        record,
        message: format!("cannot parse {text:?}"),
    })
}

/// Reads an `i,j,re,im` file into a dense `rows x cols` matrix.
pub fn read_matrix_csv(path: &Path, rows: usize, cols: usize) -> Result<CMatrix, IoError> {
    let mut m = CMatrix::zeros(rows, cols);
    for (k, rec) in read_records(path, &["i", "j", "re", "im"])?.iter().enumerate() {
        let i: usize = parse_field(path, k, &rec[0])?;
        let j: usize = parse_field(path, k, &rec[1])?;
        if i >= rows || j >= cols {
            return Err(IoError::Parse {
                path: path.display().to_string(),
                record: k,
                message: format!("index ({i}, {j}) outside {rows}x{cols}"),
            });
        }
        m[(i, j)] = c(parse_field(path, k, &rec[2])?, parse_field(path, k, &rec[3])?);
    }
    Ok(m)
}

/// Coefficient table with header `x,re,im`, sorted by `x`.
pub fn read_coefficient_table(path: &Path) -> Result<Vec<(f64, C64)>, IoError> {
    let mut out = Vec::new();
    for (k, rec) in read_records(path, &["x", "re", "im"])?.iter().enumerate() {
        let x: f64 = parse_field(path, k, &rec[0])?;
        out.push((x, c(parse_field(path, k, &rec[1])?, parse_field(path, k, &rec[2])?)));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(out)
}

/// Ordered `key = value` run record.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    pub entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) {
        self.entries.push((key.into(), value.to_string()));
    }

    pub fn push_f64(&mut self, key: impl Into<String>, value: f64) {
        self.push(key, fmt_f64(value));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn write(&self, path: &Path) -> Result<(), IoError> {
        let file_err = |source| IoError::File { path: path.display().to_string(), source };
        let mut w = BufWriter::new(File::create(path).map_err(file_err)?);
        for (k, v) in &self.entries {
            writeln!(w, "{k} = {v}").map_err(file_err)?;
        }
        w.flush().map_err(file_err)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let m = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.1), c(0.0, 0.0), c(-3.25, 1e-300), c(1.0 / 3.0, 0.0)]);
        write_matrix_csv(&path, &m).unwrap();
        assert_eq!(read_matrix_csv(&path, 2, 2).unwrap(), m);
    }

    #[test]
    fn coefficient_table_header_is_checked() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        std::fs::write(&path, "x,re,im\n0.5,2,0\n0,1,0\n").unwrap();
        let t = read_coefficient_table(&path).unwrap();
        assert_eq!(t[0], (0.0, c(1.0, 0.0)));
        std::fs::write(&path, "x,value\n0,1\n").unwrap();
        assert!(matches!(read_coefficient_table(&path), Err(IoError::Header { .. })));
    }
}
