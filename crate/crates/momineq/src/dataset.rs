//! Tabular sample storage and CSV round-tripping.
//!
//! A [`Dataset`] is an n-by-q matrix of finite values with unique named
//! columns. Moment models address columns by name, so column order in a
//! file never matters beyond presentation.

use std::collections::HashSet;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Immutable observation table: one row per observation, named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    columns: Vec<String>,
    values: DMatrix<f64>,
}

impl Dataset {
    /// Builds a dataset from a column-name list and an n-by-q matrix.
    ///
    /// Rejects empty tables, duplicate or empty column names, column
    /// count mismatches, and non-finite entries.
    pub fn new(columns: Vec<String>, values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() == 0 {
            return Err(Error::Dataset("dataset must contain at least one row".into()));
        }
        if columns.len() != values.ncols() {
            return Err(Error::Dataset(format!(
                "{} column names for {} columns",
                columns.len(),
                values.ncols()
            )));
        }
        let mut seen = HashSet::new();
        for name in &columns {
            if name.is_empty() {
                return Err(Error::Dataset("empty column name".into()));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::Dataset(format!("duplicate column name '{name}'")));
            }
        }
        for col in 0..values.ncols() {
            for row in 0..values.nrows() {
                let v = values[(row, col)];
                if !v.is_finite() {
                    return Err(Error::Dataset(format!(
                        "non-finite value {v} at row {}, column '{}'",
                        row + 1,
                        columns[col]
                    )));
                }
            }
        }
        Ok(Self { columns, values })
    }

    /// Builds a dataset from named columns of equal length.
    pub fn from_columns(named: &[(&str, Vec<f64>)]) -> Result<Self> {
        if named.is_empty() {
            return Err(Error::Dataset("no columns given".into()));
        }
        let n = named[0].1.len();
        for (name, col) in named {
            if col.len() != n {
                return Err(Error::Dataset(format!(
                    "column '{name}' has {} rows, expected {n}",
                    col.len()
                )));
            }
        }
        let values = DMatrix::from_fn(n, named.len(), |r, c| named[c].1[r]);
        Self::new(named.iter().map(|(name, _)| name.to_string()).collect(), values)
    }

    /// Number of observations.
    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    /// Number of columns.
    pub fn num_columns(&self) -> usize {
        self.values.ncols()
    }

    /// Column names in storage order.
    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    /// Index of a named column.
    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Dataset(format!("missing column '{name}'")))
    }

    /// Value at (row, column index).
    #[inline]
    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values[(row, col)]
    }

    /// The full value matrix, rows as observations.
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// One named column as an owned vector.
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self.column_index(name)?;
        Ok(self.values.column(idx).iter().copied().collect())
    }

    /// Sample mean of one named column.
    pub fn column_mean(&self, name: &str) -> Result<f64> {
        let idx = self.column_index(name)?;
        Ok(self.values.column(idx).mean())
    }

    /// Writes the table as CSV with a header row.
    ///
    /// Floats use shortest round-trip formatting, so a write/read cycle
    /// reproduces the dataset exactly and reruns are byte-identical.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)
            .map_err(|e| Error::Dataset(format!("cannot create {}: {e}", path.display())))?;
        w.write_record(&self.columns)
            .map_err(|e| Error::Dataset(e.to_string()))?;
        let mut record = Vec::with_capacity(self.columns.len());
        for row in 0..self.n() {
            record.clear();
            for col in 0..self.num_columns() {
                record.push(format!("{}", self.values[(row, col)]));
            }
            w.write_record(&record).map_err(|e| Error::Dataset(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Loads a CSV file whose header must carry exactly `expected_columns`
/// (any order). Every cell must parse as a finite float; parse and
/// finiteness failures name the offending row and column.
pub fn load_dataset(path: &Path, expected_columns: &[&str]) -> Result<Dataset> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::Dataset(format!("cannot open {}: {e}", path.display())))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Dataset(format!("bad header in {}: {e}", path.display())))?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();

    let expected: HashSet<&str> = expected_columns.iter().copied().collect();
    let found: HashSet<&str> = header.iter().map(|s| s.as_str()).collect();
    if found.len() != header.len() {
        return Err(Error::Dataset(format!("duplicate column in header of {}", path.display())));
    }
    if expected != found {
        let mut missing: Vec<&str> = expected.difference(&found).copied().collect();
        let mut extra: Vec<&str> = found.difference(&expected).copied().collect();
        missing.sort_unstable();
        extra.sort_unstable();
        return Err(Error::Dataset(format!(
            "header mismatch in {}: missing {missing:?}, unexpected {extra:?}",
            path.display()
        )));
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            Error::Dataset(format!("bad record at data row {} of {}: {e}", i + 1, path.display()))
        })?;
        let mut row = Vec::with_capacity(header.len());
        for (j, cell) in record.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| {
                Error::Dataset(format!(
                    "non-numeric cell '{cell}' at data row {}, column '{}'",
                    i + 1,
                    header[j]
                ))
            })?;
            if !v.is_finite() {
                return Err(Error::Dataset(format!(
                    "non-finite cell '{cell}' at data row {}, column '{}'",
                    i + 1,
                    header[j]
                )));
            }
            row.push(v);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Dataset(format!("{} contains no data rows", path.display())));
    }
    let values = DMatrix::from_fn(rows.len(), header.len(), |r, c| rows[r][c]);
    Dataset::new(header, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_well_formed_csv() {
        let f = write_tmp("y1,y2\n0.5,4.5\n-0.25,5.25\n");
        let d = load_dataset(f.path(), &["y1", "y2"]).unwrap();
        assert_eq!(d.n(), 2);
        assert_eq!(d.column("y2").unwrap(), vec![4.5, 5.25]);
        assert_eq!(d.column_mean("y1").unwrap(), 0.125);
    }

    #[test]
    fn header_mismatch_is_reported() {
        let f = write_tmp("y1,z\n0.5,4.5\n");
        let err = load_dataset(f.path(), &["y1", "y2"]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("y2") && msg.contains("z"), "{msg}");
    }

    #[test]
    fn non_numeric_cell_names_row_and_column() {
        let f = write_tmp("y1,y2\n0.5,oops\n");
        let msg = load_dataset(f.path(), &["y1", "y2"]).unwrap_err().to_string();
        assert!(msg.contains("row 1") && msg.contains("'y2'"), "{msg}");
    }

    #[test]
    fn nan_cell_is_rejected_with_location() {
        let f = write_tmp("y1,y2\n0.5,4.5\nNaN,5.0\n");
        let msg = load_dataset(f.path(), &["y1", "y2"]).unwrap_err().to_string();
        assert!(msg.contains("row 2") && msg.contains("'y1'"), "{msg}");
    }

    #[test]
    fn missing_file_is_an_error() {
        let err = load_dataset(Path::new("/nonexistent/x.csv"), &["a"]);
        assert!(err.is_err());
    }

    #[test]
    fn duplicate_column_names_rejected() {
        let err = Dataset::from_columns(&[("a", vec![1.0]), ("a", vec![2.0])]);
        assert!(err.is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let d = Dataset::from_columns(&[
            ("y1", vec![0.1, -1.0 / 3.0, 1e-17]),
            ("y2", vec![5.0, 5.000000001, 123.456]),
        ])
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        d.write_csv(&path).unwrap();
        let back = load_dataset(&path, &["y1", "y2"]).unwrap();
        assert_eq!(d, back);
    }
}
