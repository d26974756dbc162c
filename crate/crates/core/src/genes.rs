//! Microarray screening pipeline: expression-matrix CSV ingestion,
//! training-based standardization, relevance ranking, top/bottom gene
//! screening, and conversion to the shared dataset layout for LOOCV-tuned
//! fits.
//!
//! Expression files are genes-as-rows CSVs: a header line (gene id column
//! plus one column per sample), then one row per gene. Labels travel in a
//! separate file with one integer per line (an optional `label` header is
//! tolerated).

use std::io::Write;
use std::path::Path;

use crate::dataset::Dataset;
use crate::error::Error;
use crate::mat::Mat;
use crate::Result;

/// genes × samples expression values with optional per-sample labels.
#[derive(Debug, Clone)]
pub struct ExpressionMatrix {
    pub values: Mat,
    pub gene_ids: Vec<String>,
    pub sample_labels: Option<Vec<usize>>,
}

impl ExpressionMatrix {
    pub fn n_genes(&self) -> usize {
        self.values.rows()
    }

    pub fn n_samples(&self) -> usize {
        self.values.cols()
    }

    pub fn new(values: Mat, gene_ids: Vec<String>, sample_labels: Option<Vec<usize>>) -> Result<Self> {
        if gene_ids.len() != values.rows() {
            return Err(Error::DimensionMismatch {
                axis: "gene_ids",
                expected: values.rows(),
                got: gene_ids.len(),
            });
        }
        if !values.is_finite() {
            return Err(Error::NonFinite { what: "expression values" });
        }
        let mut seen = std::collections::HashSet::new();
        for id in &gene_ids {
            if !seen.insert(id) {
                return Err(Error::InvalidInput(format!("duplicate gene id '{id}'")));
            }
        }
        if let Some(labels) = &sample_labels {
            if labels.len() != values.cols() {
                return Err(Error::DimensionMismatch {
                    axis: "sample_labels",
                    expected: values.cols(),
                    got: labels.len(),
                });
            }
        }
        Ok(ExpressionMatrix {
            values,
            gene_ids,
            sample_labels,
        })
    }

    /// Read a genes-as-rows expression CSV.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<ExpressionMatrix> {
        let path = path.as_ref();
        let pstr = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(&pstr, e))?;
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::csv(&pstr, 1, "empty file"))?;
        let n_samples = header.split(',').count().saturating_sub(1);
        if n_samples == 0 {
            return Err(Error::csv(&pstr, 1, "need at least one sample column"));
        }
        let mut gene_ids = Vec::new();
        let mut data = Vec::new();
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let id = parts
                .next()
                .ok_or_else(|| Error::csv(&pstr, idx + 1, "missing gene id"))?
                .trim();
            gene_ids.push(id.to_string());
            let mut count = 0;
            for field in parts {
                let v: f64 = field.trim().parse().map_err(|_| {
                    Error::csv(&pstr, idx + 1, format!("bad number '{}'", field.trim()))
                })?;
                data.push(v);
                count += 1;
            }
            if count != n_samples {
                return Err(Error::csv(
                    &pstr,
                    idx + 1,
                    format!("expected {n_samples} values, got {count}"),
                ));
            }
        }
        if gene_ids.is_empty() {
            return Err(Error::csv(&pstr, 2, "no gene rows"));
        }
        let n_genes = gene_ids.len();
        ExpressionMatrix::new(Mat::from_rows(n_genes, n_samples, data), gene_ids, None)
    }

    /// Attach labels loaded with [`read_labels`].
    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.n_samples() {
            return Err(Error::DimensionMismatch {
                axis: "sample_labels",
                expected: self.n_samples(),
                got: labels.len(),
            });
        }
        self.sample_labels = Some(labels);
        Ok(self)
    }

    /// Transpose into the shared samples × genes dataset, keeping only the
    /// genes in `keep` (in that order). Labels must be present.
    pub fn to_dataset(&self, keep: &[usize], k_classes: usize) -> Result<Dataset> {
        let labels = self
            .sample_labels
            .clone()
            .ok_or_else(|| Error::InvalidInput("expression matrix has no labels".into()))?;
        let n = self.n_samples();
        let mut feats = Vec::with_capacity(n * keep.len());
        for s in 0..n {
            for &g in keep {
                feats.push(self.values.get(g, s));
            }
        }
        let names = keep.iter().map(|&g| self.gene_ids[g].clone()).collect();
        Dataset::new(Mat::from_rows(n, keep.len(), feats), labels, k_classes, names)
    }
}

/// One integer label per line; an optional leading `label` header is
/// skipped.
pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    let pstr = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(&pstr, e))?;
    let mut labels = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || (idx == 0 && t.eq_ignore_ascii_case("label")) {
            continue;
        }
        let y: usize = t
            .parse()
            .map_err(|_| Error::csv(&pstr, idx + 1, format!("bad label '{t}'")))?;
        if y < 1 {
            return Err(Error::csv(&pstr, idx + 1, "labels start at 1"));
        }
        labels.push(y);
    }
    if labels.is_empty() {
        return Err(Error::csv(&pstr, 1, "no labels"));
    }
    Ok(labels)
}

/// Output of [`standardize`]: transformed matrices plus the genes dropped
/// for having zero training variance.
#[derive(Debug, Clone)]
pub struct Standardized {
    pub train: ExpressionMatrix,
    pub test: ExpressionMatrix,
    pub dropped_genes: Vec<String>,
}

/// Center and scale every gene by its training mean and (n-1)-denominator
/// standard deviation, applying the same transform to the test matrix.
/// Genes constant on the training set are dropped from both matrices.
pub fn standardize(train: &ExpressionMatrix, test: &ExpressionMatrix) -> Result<Standardized> {
    if train.gene_ids != test.gene_ids {
        return Err(Error::InvalidInput(
            "train and test expression matrices disagree on gene ids".into(),
        ));
    }
    let n = train.n_samples() as f64;
    if train.n_samples() < 2 {
        return Err(Error::InvalidInput(
            "standardization needs at least two training samples".into(),
        ));
    }

    let mut keep = Vec::new();
    let mut dropped = Vec::new();
    let mut params = Vec::new(); // (mean, sd) per kept gene
    for g in 0..train.n_genes() {
        let row = train.values.row(g);
        let mean = row.iter().sum::<f64>() / n;
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let sd = var.sqrt();
        if sd == 0.0 {
            dropped.push(train.gene_ids[g].clone());
        } else {
            keep.push(g);
            params.push((mean, sd));
        }
    }

    let transform = |m: &ExpressionMatrix| -> ExpressionMatrix {
        let mut out = Mat::zeros(keep.len(), m.n_samples());
        for (new_g, (&g, &(mean, sd))) in keep.iter().zip(&params).enumerate() {
            for s in 0..m.n_samples() {
                out.set(new_g, s, (m.values.get(g, s) - mean) / sd);
            }
        }
        ExpressionMatrix {
            values: out,
            gene_ids: keep.iter().map(|&g| m.gene_ids[g].clone()).collect(),
            sample_labels: m.sample_labels.clone(),
        }
    };

    Ok(Standardized {
        train: transform(train),
        test: transform(test),
        dropped_genes: dropped,
    })
}

/// Per-gene relevance: the ratio of between-class to within-class sums of
/// squares. Separated constant classes give `+inf`; a gene constant across
/// all samples gives 0.
pub fn relevance(train: &ExpressionMatrix) -> Result<Vec<f64>> {
    let labels = train
        .sample_labels
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("relevance needs sample labels".into()))?;
    let n = train.n_samples();
    let k = *labels.iter().max().unwrap();
    if labels.iter().collect::<std::collections::HashSet<_>>().len() < 2 {
        return Err(Error::InvalidInput("relevance needs at least two classes".into()));
    }
    let class_counts: Vec<usize> = (1..=k)
        .map(|c| labels.iter().filter(|&&y| y == c).count())
        .collect();

    let mut scores = Vec::with_capacity(train.n_genes());
    for g in 0..train.n_genes() {
        let row = train.values.row(g);
        let overall = row.iter().sum::<f64>() / n as f64;
        let mut class_means = vec![0.0; k];
        for (s, &y) in labels.iter().enumerate() {
            class_means[y - 1] += row[s];
        }
        for (c, m) in class_means.iter_mut().enumerate() {
            if class_counts[c] > 0 {
                *m /= class_counts[c] as f64;
            }
        }
        let mut between = 0.0;
        let mut within = 0.0;
        for (s, &y) in labels.iter().enumerate() {
            between += (class_means[y - 1] - overall).powi(2);
            within += (row[s] - class_means[y - 1]).powi(2);
        }
        let r = if within == 0.0 {
            if between == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            between / within
        };
        scores.push(r);
    }
    Ok(scores)
}

/// Which screening group a gene came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScreenGroup {
    Top,
    Bottom,
}

/// Indices of the `top` highest-scoring and `bottom` lowest-scoring genes.
/// The top group is ordered by decreasing score, the bottom group by
/// increasing score; ties preserve gene order. The groups never overlap.
pub fn screen(scores: &[f64], top: usize, bottom: usize) -> Result<Vec<(usize, ScreenGroup)>> {
    if top + bottom > scores.len() {
        return Err(Error::InvalidInput(format!(
            "requested {top}+{bottom} genes from only {}",
            scores.len()
        )));
    }
    // Stable sort: equal scores keep ascending gene order.
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut out = Vec::with_capacity(top + bottom);
    for &g in order.iter().take(top) {
        out.push((g, ScreenGroup::Top));
    }
    for &g in order.iter().rev().take(bottom) {
        out.push((g, ScreenGroup::Bottom));
    }
    Ok(out)
}

/// Write the ranked gene table: id, relevance score, screening group if
/// any.
pub fn write_ranked_csv(
    matrix: &ExpressionMatrix,
    scores: &[f64],
    screened: &[(usize, ScreenGroup)],
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let pstr = path.display().to_string();
    let mut out = std::fs::File::create(path).map_err(|e| Error::io(&pstr, e))?;
    writeln!(out, "gene_id,relevance,group").map_err(|e| Error::io(&pstr, e))?;
    let group_of = |g: usize| {
        screened.iter().find(|(gg, _)| *gg == g).map(|(_, grp)| match grp {
            ScreenGroup::Top => "top",
            ScreenGroup::Bottom => "bottom",
        })
    };
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    for g in order {
        writeln!(
            out,
            "{},{},{}",
            matrix.gene_ids[g],
            scores[g],
            group_of(g).unwrap_or("")
        )
        .map_err(|e| Error::io(&pstr, e))?;
    }
    Ok(())
}
