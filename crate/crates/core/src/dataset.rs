//! In-memory dataset: a dense design matrix plus a response vector.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Column of a CSV file holding the response variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ResponseColumn {
    /// 0-based column index.
    Index(usize),
    /// Header name; requires `has_header`.
    Name(String),
}

/// Immutable regression dataset. Rows are observations; the design matrix is
/// stored row-major. Every entry is finite by construction, and the struct
/// offers no mutation, so shared references are safe across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Vec<f64>,
    y: Vec<f64>,
    n_rows: usize,
    n_cols: usize,
}

impl Dataset {
    /// Build a dataset from a flat row-major design matrix and a response.
    pub fn new(x: Vec<f64>, y: Vec<f64>, n_cols: usize) -> Result<Self> {
        let n_rows = y.len();
        if n_rows == 0 {
            return Err(Error::Shape("dataset must have at least one row".into()));
        }
        if n_cols == 0 {
            return Err(Error::Shape("dataset must have at least one column".into()));
        }
        if x.len() != n_rows * n_cols {
            return Err(Error::Shape(format!(
                "design matrix has {} entries, expected {} rows x {} cols",
                x.len(),
                n_rows,
                n_cols
            )));
        }
        if let Some(bad) = x.iter().chain(y.iter()).find(|v| !v.is_finite()) {
            return Err(Error::Shape(format!("non-finite entry {bad} in dataset")));
        }
        Ok(Self { x, y, n_rows, n_cols })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Flat row-major design matrix.
    pub fn x(&self) -> &[f64] {
        &self.x
    }

    /// Load a numeric CSV file. The response is taken from `response`; all
    /// remaining columns become the design matrix in file order, with an
    /// intercept column of ones prepended when `add_intercept` is set.
    pub fn load_csv(
        path: impl AsRef<Path>,
        has_header: bool,
        response: &ResponseColumn,
        add_intercept: bool,
    ) -> Result<Self> {
        let path = path.as_ref();
        let display = path.display().to_string();
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(has_header)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| match e.into_kind() {
                csv::ErrorKind::Io(io) => Error::io(&display, io),
                other => Error::Shape(format!("{display}: {other:?}")),
            })?;

        let response_idx = match response {
            ResponseColumn::Index(i) => *i,
            ResponseColumn::Name(name) => {
                if !has_header {
                    return Err(Error::Shape(format!(
                        "response column given by name {name:?} but file has no header"
                    )));
                }
                let headers = reader
                    .headers()
                    .map_err(|e| Error::Shape(format!("{display}: {e}")))?;
                headers
                    .iter()
                    .position(|h| h == name)
                    .ok_or_else(|| Error::Shape(format!("no column named {name:?} in header")))?
            }
        };

        let mut x = Vec::new();
        let mut y = Vec::new();
        let mut width = None;
        // 1-based file line numbers; the header, when present, is line 1.
        let mut line = if has_header { 1 } else { 0 };
        for record in reader.records() {
            let record = record.map_err(|e| Error::Shape(format!("{display}: {e}")))?;
            line += 1;
            let w = record.len();
            if record.is_empty() || (w == 1 && record.get(0) == Some("")) {
                continue; // blank line
            }
            match width {
                None => {
                    if response_idx >= w {
                        return Err(Error::Shape(format!(
                            "response column index {response_idx} out of range for {w} columns"
                        )));
                    }
                    width = Some(w);
                }
                Some(expected) if expected != w => {
                    return Err(Error::Shape(format!(
                        "ragged row at line {line}: {w} fields, expected {expected}"
                    )));
                }
                _ => {}
            }
            if add_intercept {
                x.push(1.0);
            }
            for (col, field) in record.iter().enumerate() {
                let value: f64 = field.parse().map_err(|_| Error::Parse {
                    row: line,
                    col: col + 1,
                    message: format!("{field:?} is not a number"),
                })?;
                if !value.is_finite() {
                    return Err(Error::Parse {
                        row: line,
                        col: col + 1,
                        message: format!("non-finite value {field:?}"),
                    });
                }
                if col == response_idx {
                    y.push(value);
                } else {
                    x.push(value);
                }
            }
        }
        let width = width.ok_or_else(|| Error::Shape(format!("{display}: empty file")))?;
        let n_cols = width - 1 + usize::from(add_intercept);
        if n_cols == 0 {
            return Err(Error::Shape(
                "file has only the response column and no intercept was requested".into(),
            ));
        }
        Dataset::new(x, y, n_cols)
    }

    /// Write the dataset as CSV with header `x1,..,xp,y`. Values carry 17
    /// significant digits so that a load of the written file reproduces the
    /// dataset exactly.
    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let display = path.display().to_string();
        let mut out = String::new();
        for j in 0..self.n_cols {
            let _ = write!(out, "x{},", j + 1);
        }
        out.push_str("y\n");
        for i in 0..self.n_rows {
            for v in self.row(i) {
                let _ = write!(out, "{v:.16e},");
            }
            let _ = writeln!(out, "{:.16e}", self.y[i]);
        }
        std::fs::write(path, out).map_err(|e| Error::io(&display, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    #[test]
    fn loads_plain_file_with_response_column() {
        let f = write_temp("1,2\n3,4\n5,6\n");
        let d = Dataset::load_csv(f.path(), false, &ResponseColumn::Index(1), false).unwrap();
        assert_eq!(d.n_rows(), 3);
        assert_eq!(d.n_cols(), 1);
        assert_eq!(d.x(), &[1.0, 3.0, 5.0]);
        assert_eq!(d.y(), &[2.0, 4.0, 6.0]);
    }

    #[test]
    fn prepends_intercept_when_requested() {
        let f = write_temp("1,2\n3,4\n5,6\n");
        let d = Dataset::load_csv(f.path(), false, &ResponseColumn::Index(1), true).unwrap();
        assert_eq!(d.n_cols(), 2);
        assert_eq!(d.row(0), &[1.0, 1.0]);
        assert_eq!(d.row(1), &[1.0, 3.0]);
        assert_eq!(d.row(2), &[1.0, 5.0]);
    }

    #[test]
    fn reports_parse_location() {
        let f = write_temp("1,2\nabc,4\n5,6\n");
        let err = Dataset::load_csv(f.path(), false, &ResponseColumn::Index(1), false)
            .unwrap_err();
        match err {
            Error::Parse { row, col, .. } => {
                assert_eq!(row, 2);
                assert_eq!(col, 1);
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_ragged_rows_and_empty_files() {
        let f = write_temp("1,2\n3\n");
        assert!(matches!(
            Dataset::load_csv(f.path(), false, &ResponseColumn::Index(1), false),
            Err(Error::Shape(_))
        ));
        let f = write_temp("");
        assert!(matches!(
            Dataset::load_csv(f.path(), false, &ResponseColumn::Index(0), false),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn rejects_non_finite_values() {
        let f = write_temp("1,inf\n");
        assert!(matches!(
            Dataset::load_csv(f.path(), false, &ResponseColumn::Index(1), false),
            Err(Error::Parse { .. })
        ));
        assert!(Dataset::new(vec![f64::NAN], vec![1.0], 1).is_err());
    }

    #[test]
    fn resolves_response_by_header_name() {
        let f = write_temp("a,b,c\n1,2,3\n4,5,6\n");
        let d = Dataset::load_csv(f.path(), true, &ResponseColumn::Name("b".into()), false)
            .unwrap();
        assert_eq!(d.y(), &[2.0, 5.0]);
        assert_eq!(d.row(0), &[1.0, 3.0]);
    }

    #[test]
    fn save_then_load_is_identity() {
        use rand::Rng;
        let mut rng = crate::rng::Streams::new(11).probe(0);
        let n = 40;
        let p = 3;
        let x: Vec<f64> = (0..n * p).map(|_| rng.random::<f64>() * 2e3 - 1e3).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 1e-6).collect();
        let d = Dataset::new(x, y, p).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        d.save_csv(f.path()).unwrap();
        let back =
            Dataset::load_csv(f.path(), true, &ResponseColumn::Name("y".into()), false).unwrap();
        assert_eq!(d, back);
    }
}
