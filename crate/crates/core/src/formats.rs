//! Plain-text formats.
//!
//! * Matrix files: first line `m n`, then `m` lines of `n` space-separated
//!   values written with 17 significant digits (`{:.16e}`), which round-trips
//!   every `f64` exactly.
//! * Metadata and run manifests: `key=value` lines.
//! * CSV: header row, comma separators, no quoting. Fields never contain
//!   commas.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

pub fn matrix_to_string(matrix: &DenseMatrix) -> String {
    let (m, n) = (matrix.nrows(), matrix.ncols());
    let mut out = format!("{m} {n}\n");
    for i in 0..m {
        let row: Vec<String> = (0..n).map(|j| format!("{:.16e}", matrix.get(i, j))).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn matrix_from_str(text: &str, origin: &Path) -> Result<DenseMatrix> {
    let parse_err = |message: String| Error::Parse {
        path: origin.to_path_buf(),
        message,
    };
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| parse_err("empty file".into()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| parse_err(format!("bad header `{header}`: {e}")))?;
    if dims.len() != 2 {
        return Err(parse_err(format!("header must be `m n`, got `{header}`")));
    }
    let (m, n) = (dims[0], dims[1]);
    let mut data = DMatrix::zeros(m, n);
    for i in 0..m {
        let line = lines
            .next()
            .ok_or_else(|| parse_err(format!("expected {m} rows, found {i}")))?;
        let values: Vec<&str> = line.split_whitespace().collect();
        if values.len() != n {
            return Err(parse_err(format!(
                "row {i} has {} values, expected {n}",
                values.len()
            )));
        }
        for (j, v) in values.iter().enumerate() {
            data[(i, j)] = v
                .parse::<f64>()
                .map_err(|e| parse_err(format!("row {i}, column {j}: {e}")))?;
        }
    }
    if lines.any(|l| !l.trim().is_empty()) {
        return Err(parse_err(format!("trailing data after {m} rows")));
    }
    DenseMatrix::new(data).map_err(|e| parse_err(e.to_string()))
}

pub fn write_matrix(path: &Path, matrix: &DenseMatrix) -> Result<()> {
    write_text(path, &matrix_to_string(matrix))
}

pub fn read_matrix(path: &Path) -> Result<DenseMatrix> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    matrix_from_str(&text, path)
}

/// Ordered `key=value` pairs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues(Vec<(String, String)>);

impl KeyValues {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.0.push((key.to_string(), value.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0
            .iter()
            .rev()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Parses a required key, naming `origin` in errors.
    pub fn parse<T: std::str::FromStr>(&self, key: &str, origin: &Path) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.get(key).ok_or_else(|| Error::Parse {
            path: origin.to_path_buf(),
            message: format!("missing key `{key}`"),
        })?;
        raw.parse().map_err(|e: T::Err| Error::Parse {
            path: origin.to_path_buf(),
            message: format!("key `{key}`: {e}"),
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn to_text(&self) -> String {
        self.0.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn from_text(text: &str, origin: &Path) -> Result<Self> {
        let mut kv = KeyValues::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: origin.to_path_buf(),
                message: format!("line {}: expected key=value", lineno + 1),
            })?;
            kv.push(k.trim(), v.trim());
        }
        Ok(kv)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_text(path, &self.to_text())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, path)
    }
}

/// In-memory CSV table.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        CsvTable {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    /// Appends a row; fields must not contain commas or newlines, nor start
    /// with a quote.
    pub fn push(&mut self, row: Vec<String>) -> Result<()> {
        if row.len() != self.header.len() {
            return Err(Error::DimensionMismatch {
                expected: self.header.len(),
                found: row.len(),
            });
        }
        if let Some(bad) = row
            .iter()
            .find(|f| f.contains([',', '\n', '\r']) || f.starts_with('"'))
        {
            return Err(Error::invalid(format!("CSV field `{bad}` contains a separator")));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_text(path, &self.to_csv())
    }
}

/// Shortest round-tripping decimal form of a float.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn matrix_text_round_trips(
            m in 1usize..5,
            n in 0usize..5,
            seed in proptest::collection::vec(-1e300f64..1e300, 25),
        ) {
            let data = DMatrix::from_fn(m, n, |i, j| seed[i * 5 + j] * 1e-150);
            let original = DenseMatrix::new(data).unwrap();
            let text = matrix_to_string(&original);
            let back = matrix_from_str(&text, Path::new("mem")).unwrap();
            prop_assert_eq!(back, original);
        }
    }

    #[test]
    fn matrix_values_carry_seventeen_digits() {
        let m = DenseMatrix::new(DMatrix::from_element(1, 1, 0.1)).unwrap();
        assert_eq!(matrix_to_string(&m), "1 1\n1.0000000000000001e-1\n");
    }

    #[test]
    fn matrix_parse_errors_are_reported() {
        let p = Path::new("x.mat");
        assert!(matrix_from_str("", p).is_err());
        assert!(matrix_from_str("2 2\n1 2\n", p).is_err());
        assert!(matrix_from_str("1 2\n1\n", p).is_err());
        assert!(matrix_from_str("1 1\nabc\n", p).is_err());
        assert!(matrix_from_str("1 1\nNaN\n", p).is_err());
    }

    #[test]
    fn key_values_round_trip() {
        let mut kv = KeyValues::new();
        kv.push("m", 60).push("epsilon", 0.0).push("mode", "sphere");
        let back = KeyValues::from_text(&kv.to_text(), Path::new("meta")).unwrap();
        assert_eq!(back, kv);
        assert_eq!(back.parse::<usize>("m", Path::new("meta")).unwrap(), 60);
        assert!(back.parse::<usize>("n", Path::new("meta")).is_err());
    }

    #[test]
    fn csv_rejects_embedded_commas() {
        let mut t = CsvTable::new(&["a", "b"]);
        t.push(vec!["1".into(), "2".into()]).unwrap();
        assert!(t.push(vec!["1,2".into(), "3".into()]).is_err());
        assert!(t.push(vec!["1".into()]).is_err());
        assert!(t.push(vec!["\"q\"".into(), "3".into()]).is_err());
        t.push(vec!["{\"a\":1}".into(), "3".into()]).unwrap();
        assert_eq!(t.to_csv(), "a,b\n1,2\n{\"a\":1},3\n");
    }
}
