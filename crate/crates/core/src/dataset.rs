//! Labeled feature matrices and the shared CSV format.
//!
//! The CSV layout used by the CLI and the gene pipeline is a header row of
//! variable names plus a final `label` column, one example per row, labels
//! being integers in `1..=K`.

use std::io::Write;
use std::path::Path;

use crate::error::Error;
use crate::mat::Mat;
use crate::Result;

/// A labeled dataset: `n` examples, `d` variables, labels in `1..=k_classes`.
#[derive(Debug, Clone)]
pub struct Dataset {
    features: Mat,
    labels: Vec<usize>,
    k_classes: usize,
    names: Vec<String>,
}

impl Dataset {
    /// Validating constructor. `names` defaults to `x1..xd` when empty.
    pub fn new(features: Mat, labels: Vec<usize>, k_classes: usize, names: Vec<String>) -> Result<Self> {
        if features.rows() == 0 {
            return Err(Error::InvalidInput("dataset needs at least one row".into()));
        }
        if features.cols() == 0 {
            return Err(Error::InvalidInput("dataset needs at least one variable".into()));
        }
        if k_classes < 2 {
            return Err(Error::InvalidInput(format!(
                "k_classes must be at least 2, got {k_classes}"
            )));
        }
        if labels.len() != features.rows() {
            return Err(Error::DimensionMismatch {
                axis: "n_rows",
                expected: features.rows(),
                got: labels.len(),
            });
        }
        if !features.is_finite() {
            return Err(Error::NonFinite { what: "features" });
        }
        for (row, &y) in labels.iter().enumerate() {
            if y < 1 || y > k_classes {
                return Err(Error::InvalidLabel {
                    row,
                    label: y as i64,
                    k_classes,
                });
            }
        }
        let names = if names.is_empty() {
            default_names(features.cols())
        } else {
            if names.len() != features.cols() {
                return Err(Error::DimensionMismatch {
                    axis: "names",
                    expected: features.cols(),
                    got: names.len(),
                });
            }
            names
        };
        Ok(Dataset {
            features,
            labels,
            k_classes,
            names,
        })
    }

    pub fn n(&self) -> usize {
        self.features.rows()
    }

    pub fn d(&self) -> usize {
        self.features.cols()
    }

    pub fn k_classes(&self) -> usize {
        self.k_classes
    }

    pub fn features(&self) -> &Mat {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.features.row(i)
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    /// Subset of rows, same variables and class count.
    pub fn select_rows(&self, keep: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(keep),
            labels: keep.iter().map(|&i| self.labels[i]).collect(),
            k_classes: self.k_classes,
            names: self.names.clone(),
        }
    }

    /// All rows except `skip` (leave-one-out fold).
    pub fn drop_row(&self, skip: usize) -> Dataset {
        let keep: Vec<usize> = (0..self.n()).filter(|&i| i != skip).collect();
        self.select_rows(&keep)
    }

    /// Read the shared CSV format.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Dataset> {
        let path = path.as_ref();
        let pstr = path.display().to_string();
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| Error::csv(&pstr, 1, e.to_string()))?;

        let headers = rdr
            .headers()
            .map_err(|e| Error::csv(&pstr, 1, e.to_string()))?
            .clone();
        if headers.len() < 2 {
            return Err(Error::csv(&pstr, 1, "need at least one variable column and a label column"));
        }
        let last = headers.len() - 1;
        if headers[last].to_lowercase() != "label" {
            return Err(Error::csv(
                &pstr,
                1,
                format!("last column must be named 'label', got '{}'", &headers[last]),
            ));
        }
        let names: Vec<String> = headers.iter().take(last).map(|s| s.to_string()).collect();

        let mut data = Vec::new();
        let mut labels = Vec::new();
        for (idx, rec) in rdr.records().enumerate() {
            let line = idx + 2; // 1-based, after the header
            let rec = rec.map_err(|e| Error::csv(&pstr, line, e.to_string()))?;
            if rec.len() != headers.len() {
                return Err(Error::csv(
                    &pstr,
                    line,
                    format!("expected {} fields, got {}", headers.len(), rec.len()),
                ));
            }
            for field in rec.iter().take(last) {
                let v: f64 = field
                    .parse()
                    .map_err(|_| Error::csv(&pstr, line, format!("bad number '{field}'")))?;
                data.push(v);
            }
            let y: i64 = rec[last]
                .parse()
                .map_err(|_| Error::csv(&pstr, line, format!("bad label '{}'", &rec[last])))?;
            if y < 1 {
                return Err(Error::csv(&pstr, line, format!("label {y} below 1")));
            }
            labels.push(y as usize);
        }
        if labels.is_empty() {
            return Err(Error::csv(&pstr, 2, "no data rows"));
        }
        let n = labels.len();
        let k = *labels.iter().max().unwrap();
        let k = k.max(2);
        Dataset::new(Mat::from_rows(n, last, data), labels, k, names)
    }

    /// Write the shared CSV format.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let pstr = path.display().to_string();
        let mut out = std::fs::File::create(path).map_err(|e| Error::io(&pstr, e))?;
        let mut header = self.names.join(",");
        header.push_str(",label");
        writeln!(out, "{header}").map_err(|e| Error::io(&pstr, e))?;
        for i in 0..self.n() {
            let mut line = String::new();
            for v in self.row(i) {
                line.push_str(&format!("{v}"));
                line.push(',');
            }
            line.push_str(&self.labels[i].to_string());
            writeln!(out, "{line}").map_err(|e| Error::io(&pstr, e))?;
        }
        Ok(())
    }
}

pub(crate) fn default_names(d: usize) -> Vec<String> {
    (1..=d).map(|j| format!("x{j}")).collect()
}

/// Read a feature CSV that may or may not carry the trailing `label`
/// column. Returns the feature matrix and the labels when present.
pub fn read_feature_csv(path: impl AsRef<Path>) -> Result<(Mat, Option<Vec<usize>>)> {
    let path = path.as_ref();
    let pstr = path.display().to_string();
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::csv(&pstr, 1, e.to_string()))?;
    let headers = rdr
        .headers()
        .map_err(|e| Error::csv(&pstr, 1, e.to_string()))?
        .clone();
    if headers.is_empty() {
        return Err(Error::csv(&pstr, 1, "empty header"));
    }
    let labeled = headers[headers.len() - 1].to_lowercase() == "label";
    let d = if labeled {
        headers.len() - 1
    } else {
        headers.len()
    };
    if d == 0 {
        return Err(Error::csv(&pstr, 1, "no feature columns"));
    }

    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let line = idx + 2;
        let rec = rec.map_err(|e| Error::csv(&pstr, line, e.to_string()))?;
        if rec.len() != headers.len() {
            return Err(Error::csv(
                &pstr,
                line,
                format!("expected {} fields, got {}", headers.len(), rec.len()),
            ));
        }
        for field in rec.iter().take(d) {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::csv(&pstr, line, format!("bad number '{field}'")))?;
            data.push(v);
        }
        if labeled {
            let y: usize = rec[d]
                .parse()
                .map_err(|_| Error::csv(&pstr, line, format!("bad label '{}'", &rec[d])))?;
            labels.push(y);
        }
    }
    if data.is_empty() {
        return Err(Error::csv(&pstr, 2, "no data rows"));
    }
    let n = data.len() / d;
    Ok((
        Mat::from_rows(n, d, data),
        if labeled { Some(labels) } else { None },
    ))
}
