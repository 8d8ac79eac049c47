//! Dataset model, CSV ingestion and column standardization.
//!
//! Predictor files are comma-separated numeric matrices with an optional
//! single header row; response files hold one value per line. Standardized
//! predictors have zero-mean, unit Euclidean norm columns and the response is
//! centered only.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Predictor matrix (`n` observations by `p` predictors), response and labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
    labels: Vec<String>,
}

impl Dataset {
    /// Validates and builds a dataset. `labels` defaults to `V1..Vp`.
    pub fn new(x: DMatrix<f64>, y: DVector<f64>, labels: Option<Vec<String>>) -> Result<Self> {
        let (n, p) = x.shape();
        if n < 3 {
            return Err(Error::InvalidDataset(format!("need at least 3 observations, got {n}")));
        }
        if p < 1 {
            return Err(Error::InvalidDataset("need at least one predictor".into()));
        }
        if y.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "predictor matrix has {n} rows but response has {} values",
                y.len()
            )));
        }
        if let Some(idx) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!(
                "non-finite predictor at row {}, column {}",
                idx % n + 1,
                idx / n + 1
            )));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!("non-finite response at row {}", i + 1)));
        }
        let labels = match labels {
            Some(l) => {
                if l.len() != p {
                    return Err(Error::DimensionMismatch(format!(
                        "{} labels for {p} predictors",
                        l.len()
                    )));
                }
                let mut seen = HashSet::with_capacity(p);
                for name in &l {
                    if !seen.insert(name.as_str()) {
                        return Err(Error::InvalidDataset(format!("duplicate label {name:?}")));
                    }
                }
                l
            }
            None => default_labels(p),
        };
        Ok(Self { x, y, labels })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Returns a copy with the predictor columns reordered so that new column
    /// `i` is old column `perm[i]`.
    pub fn permute_columns(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.p() {
            return Err(Error::DimensionMismatch("permutation length differs from p".into()));
        }
        let x = DMatrix::from_fn(self.n(), self.p(), |i, j| self.x[(i, perm[j])]);
        let labels = perm.iter().map(|&j| self.labels[j].clone()).collect();
        Self::new(x, self.y.clone(), Some(labels))
    }
}

fn default_labels(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("V{j}")).collect()
}

/// Dataset with zero-mean unit-norm predictor columns and a centered response.
#[derive(Debug, Clone)]
pub struct StandardizedDataset {
    x_std: DMatrix<f64>,
    y_c: DVector<f64>,
    scale: Vec<f64>,
    mean: Vec<f64>,
    y_mean: f64,
    labels: Vec<String>,
}

impl StandardizedDataset {
    pub fn x(&self) -> &DMatrix<f64> {
        &self.x_std
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y_c
    }

    /// Euclidean norm of each original column after centering.
    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    /// Mean of each original column.
    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn y_mean(&self) -> f64 {
        self.y_mean
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn n(&self) -> usize {
        self.x_std.nrows()
    }

    pub fn p(&self) -> usize {
        self.x_std.ncols()
    }

    /// The standardized values viewed as a plain dataset.
    pub fn as_dataset(&self) -> Dataset {
        Dataset {
            x: self.x_std.clone(),
            y: self.y_c.clone(),
            labels: self.labels.clone(),
        }
    }

    /// Undoes the standardization.
    pub fn restore(&self) -> Dataset {
        let mut x = self.x_std.clone();
        for (j, mut col) in x.column_iter_mut().enumerate() {
            for v in col.iter_mut() {
                *v = *v * self.scale[j] + self.mean[j];
            }
        }
        let y = self.y_c.add_scalar(self.y_mean);
        Dataset {
            x,
            y,
            labels: self.labels.clone(),
        }
    }
}

/// Centers every column of `x` and scales it to unit Euclidean norm in place.
/// Returns `(means, norms)`; `Err(j)` names the first constant column.
pub(crate) fn standardize_columns(
    x: &mut DMatrix<f64>,
) -> std::result::Result<(Vec<f64>, Vec<f64>), usize> {
    let n = x.nrows();
    let mut means = Vec::with_capacity(x.ncols());
    let mut norms = Vec::with_capacity(x.ncols());
    for (j, mut col) in x.column_iter_mut().enumerate() {
        let mean = col.iter().sum::<f64>() / n as f64;
        let max_abs = col.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for v in col.iter_mut() {
            *v -= mean;
        }
        let norm = col.norm();
        if norm <= 16.0 * f64::EPSILON * (n as f64).sqrt() * max_abs || norm == 0.0 {
            return Err(j);
        }
        col.scale_mut(1.0 / norm);
        means.push(mean);
        norms.push(norm);
    }
    Ok((means, norms))
}

/// Centers and unit-norm scales every predictor column and centers `y`.
pub fn standardize(d: &Dataset) -> Result<StandardizedDataset> {
    let mut x_std = d.x.clone();
    let (mean, scale) = standardize_columns(&mut x_std).map_err(|j| Error::ZeroVariance {
        index: j,
        label: d.labels[j].clone(),
    })?;
    let y_mean = d.y.mean();
    let y_c = d.y.add_scalar(-y_mean);
    Ok(StandardizedDataset {
        x_std,
        y_c,
        scale,
        mean,
        y_mean,
        labels: d.labels.clone(),
    })
}

fn parse_cell(path: &Path, row: usize, column: usize, raw: &str) -> Result<f64> {
    let s = raw.trim();
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::NonNumeric {
            path: path.to_path_buf(),
            row,
            column,
            value: raw.to_string(),
        }),
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.kind() {
        csv::ErrorKind::UnequalLengths {
            pos,
            expected_len,
            len,
        } => Error::DimensionMismatch(format!(
            "{}: line {} has {len} fields, expected {expected_len}",
            path.display(),
            pos.as_ref().map_or(0, |p| p.line())
        )),
        _ => Error::Csv {
            path: path.to_path_buf(),
            message: e.to_string(),
        },
    }
}

/// Parsed rows plus the header names, if any.
type RawTable = (Vec<Vec<f64>>, Option<Vec<String>>);

/// Reads a numeric CSV row by row. Rows and columns in error messages are
/// 1-based data positions (header excluded).
fn read_matrix(path: &Path, header: bool) -> Result<RawTable> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(header)
        .trim(csv::Trim::All)
        .from_reader(file);
    let names = if header {
        let h = rdr.headers().map_err(|e| csv_error(path, e))?;
        Some(h.iter().map(str::to_string).collect::<Vec<_>>())
    } else {
        None
    };
    let mut rows = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        let row = rec
            .iter()
            .enumerate()
            .map(|(c, cell)| parse_cell(path, r + 1, c + 1, cell))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::EmptyFile {
            path: path.to_path_buf(),
        });
    }
    if let Some(names) = &names {
        if names.len() != rows[0].len() {
            return Err(Error::DimensionMismatch(format!(
                "{}: header has {} names but rows have {} fields",
                path.display(),
                names.len(),
                rows[0].len()
            )));
        }
    }
    Ok((rows, names))
}

/// Loads a predictor CSV and a single-column response CSV.
///
/// With `header` set, the first line of both files is treated as a header and
/// the predictor header supplies the labels.
pub fn load_csv(x_path: impl AsRef<Path>, y_path: impl AsRef<Path>, header: bool) -> Result<Dataset> {
    let x_path = x_path.as_ref();
    let y_path = y_path.as_ref();
    let (rows, names) = read_matrix(x_path, header)?;
    let (yrows, _) = read_matrix(y_path, header)?;
    if let Some(bad) = yrows.iter().position(|r| r.len() != 1) {
        return Err(Error::DimensionMismatch(format!(
            "{}: response row {} has {} fields, expected 1",
            y_path.display(),
            bad + 1,
            yrows[bad].len()
        )));
    }
    if yrows.len() != rows.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} has {} rows but {} has {} values",
            x_path.display(),
            rows.len(),
            y_path.display(),
            yrows.len()
        )));
    }
    let n = rows.len();
    let p = rows[0].len();
    let x = DMatrix::from_fn(n, p, |i, j| rows[i][j]);
    let y = DVector::from_iterator(n, yrows.into_iter().map(|r| r[0]));
    Dataset::new(x, y, names)
}

/// Writes a dataset in the format read by [`load_csv`]. Values use the
/// shortest representation that parses back to the same `f64`.
pub fn write_csv(
    d: &Dataset,
    x_path: impl AsRef<Path>,
    y_path: impl AsRef<Path>,
    header: bool,
) -> Result<()> {
    let x_path = x_path.as_ref();
    let y_path = y_path.as_ref();
    let mut w = BufWriter::new(File::create(x_path).map_err(|e| Error::io(x_path, e))?);
    let werr = |e| Error::io(x_path, e);
    if header {
        writeln!(w, "{}", d.labels.join(",")).map_err(werr)?;
    }
    for i in 0..d.n() {
        let line = d.x.row(i).iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",");
        writeln!(w, "{line}").map_err(werr)?;
    }
    w.flush().map_err(werr)?;

    let mut w = BufWriter::new(File::create(y_path).map_err(|e| Error::io(y_path, e))?);
    let werr = |e| Error::io(y_path, e);
    if header {
        writeln!(w, "y").map_err(werr)?;
    }
    for v in d.y.iter() {
        writeln!(w, "{v}").map_err(werr)?;
    }
    w.flush().map_err(werr)
}
