//! Selection and classification metrics aggregated over replications:
//! testing error, correct/incorrect zero counts, model size, correct-model
//! recoveries, and per-variable selection frequencies.

use std::io::Write;
use std::path::Path;

use crate::dataset::Dataset;
use crate::error::Error;
use crate::model::CoefModel;
use crate::simgen::GroundTruth;
use crate::Result;

/// Per-replication evaluation of a fitted model against the ground truth.
#[derive(Debug, Clone)]
pub struct RepRecord {
    pub test_error: f64,
    pub correct_zeros: usize,
    pub incorrect_zeros: usize,
    pub model_size: usize,
    pub correct_model: bool,
    /// Per-variable selection indicators.
    pub selected: Vec<bool>,
    pub chosen_lambda: f64,
}

/// Aggregate over replications.
#[derive(Debug, Clone)]
pub struct SelectionReport {
    pub test_error_mean: f64,
    /// Across-replication sample standard deviation of the test errors.
    pub test_error_sd: f64,
    /// `test_error_sd / sqrt(n_reps)`.
    pub test_error_se: f64,
    pub cz_mean: f64,
    pub iz_mean: f64,
    pub ms_mean: f64,
    pub cm_count: usize,
    pub selection_frequency: Vec<usize>,
    pub n_reps: usize,
}

/// Score one fitted (zero-snapped) model: test error on `test`, zero
/// counts against the truth pattern, and the selected variable set.
pub fn evaluate_model(model: &CoefModel, test: &Dataset, truth: &GroundTruth) -> Result<RepRecord> {
    evaluate_with_lambda(model, test, truth, f64::NAN)
}

/// [`evaluate_model`] with the tuned λ recorded alongside.
pub fn evaluate_with_lambda(
    model: &CoefModel,
    test: &Dataset,
    truth: &GroundTruth,
    chosen_lambda: f64,
) -> Result<RepRecord> {
    let k = model.k_classes();
    let d = model.d_vars();
    if truth.true_zero_pattern.rows != k || truth.true_zero_pattern.cols != d {
        return Err(Error::DimensionMismatch {
            axis: "true_zero_pattern",
            expected: k * d,
            got: truth.true_zero_pattern.rows * truth.true_zero_pattern.cols,
        });
    }
    let test_error = model.error_rate(test)?;

    let mut cz = 0usize;
    let mut iz = 0usize;
    for kk in 0..k {
        for j in 0..d {
            if model.w().get(kk, j) == 0.0 {
                if truth.true_zero_pattern.get(kk, j) {
                    cz += 1;
                } else {
                    iz += 1;
                }
            }
        }
    }
    let selected_set = model.selected_vars();
    let selected: Vec<bool> = (0..d).map(|j| selected_set.contains(&j)).collect();
    let correct_model = selected_set == truth.relevant_vars;

    Ok(RepRecord {
        test_error,
        correct_zeros: cz,
        incorrect_zeros: iz,
        model_size: selected_set.len(),
        correct_model,
        selected,
        chosen_lambda,
    })
}

/// Means, spreads, and selection counts across replications.
pub fn aggregate(records: &[RepRecord]) -> Result<SelectionReport> {
    if records.is_empty() {
        return Err(Error::InvalidInput("no replication records".into()));
    }
    let n = records.len();
    let nf = n as f64;
    let te_mean = records.iter().map(|r| r.test_error).sum::<f64>() / nf;
    let te_var = if n > 1 {
        records
            .iter()
            .map(|r| (r.test_error - te_mean).powi(2))
            .sum::<f64>()
            / (nf - 1.0)
    } else {
        0.0
    };
    let te_sd = te_var.sqrt();

    let d = records[0].selected.len();
    let mut freq = vec![0usize; d];
    for r in records {
        for (j, &sel) in r.selected.iter().enumerate() {
            if sel {
                freq[j] += 1;
            }
        }
    }

    Ok(SelectionReport {
        test_error_mean: te_mean,
        test_error_sd: te_sd,
        test_error_se: te_sd / nf.sqrt(),
        cz_mean: records.iter().map(|r| r.correct_zeros as f64).sum::<f64>() / nf,
        iz_mean: records.iter().map(|r| r.incorrect_zeros as f64).sum::<f64>() / nf,
        ms_mean: records.iter().map(|r| r.model_size as f64).sum::<f64>() / nf,
        cm_count: records.iter().filter(|r| r.correct_model).count(),
        selection_frequency: freq,
        n_reps: n,
    })
}

/// One labeled row of the study summary table.
#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub method: String,
    pub te_mean: f64,
    pub te_sd: Option<f64>,
    pub te_se: Option<f64>,
    pub cz: f64,
    pub iz: f64,
    pub ms: f64,
    pub cm: usize,
}

impl SummaryRow {
    pub fn from_report(method: &str, r: &SelectionReport) -> Self {
        SummaryRow {
            method: method.to_string(),
            te_mean: r.test_error_mean,
            te_sd: Some(r.test_error_sd),
            te_se: Some(r.test_error_se),
            cz: r.cz_mean,
            iz: r.iz_mean,
            ms: r.ms_mean,
            cm: r.cm_count,
        }
    }
}

/// Write the summary table: one row per method with TE mean, both spread
/// conventions, CZ, IZ, MS, and CM.
pub fn write_summary_csv(rows: &[SummaryRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let pstr = path.display().to_string();
    let mut out = std::fs::File::create(path).map_err(|e| Error::io(&pstr, e))?;
    writeln!(out, "method,te_mean,te_sd,te_se,cz,iz,ms,cm").map_err(|e| Error::io(&pstr, e))?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.6}"));
    for r in rows {
        writeln!(
            out,
            "{},{:.6},{},{},{:.4},{:.4},{:.4},{}",
            r.method,
            r.te_mean,
            opt(r.te_sd),
            opt(r.te_se),
            r.cz,
            r.iz,
            r.ms,
            r.cm
        )
        .map_err(|e| Error::io(&pstr, e))?;
    }
    Ok(())
}

/// Parse a summary table written by [`write_summary_csv`].
pub fn read_summary_csv(path: impl AsRef<Path>) -> Result<Vec<SummaryRow>> {
    let path = path.as_ref();
    let pstr = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(&pstr, e))?;
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if idx == 0 {
            if line != "method,te_mean,te_sd,te_se,cz,iz,ms,cm" {
                return Err(Error::csv(&pstr, 1, "unexpected summary header"));
            }
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 8 {
            return Err(Error::csv(&pstr, idx + 1, "expected 8 fields"));
        }
        let num = |s: &str, what: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::csv(&pstr, idx + 1, format!("bad {what} '{s}'")))
        };
        let opt_num = |s: &str, what: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                num(s, what).map(Some)
            }
        };
        rows.push(SummaryRow {
            method: parts[0].to_string(),
            te_mean: num(parts[1], "te_mean")?,
            te_sd: opt_num(parts[2], "te_sd")?,
            te_se: opt_num(parts[3], "te_se")?,
            cz: num(parts[4], "cz")?,
            iz: num(parts[5], "iz")?,
            ms: num(parts[6], "ms")?,
            cm: num(parts[7], "cm")? as usize,
        });
    }
    if rows.is_empty() {
        return Err(Error::csv(&pstr, 1, "no data rows"));
    }
    Ok(rows)
}

/// Write per-variable selection counts: one row per method, one column per
/// variable.
pub fn write_frequency_csv(
    rows: &[(String, Vec<usize>)],
    names: &[String],
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let pstr = path.display().to_string();
    let mut out = std::fs::File::create(path).map_err(|e| Error::io(&pstr, e))?;
    writeln!(out, "method,{}", names.join(",")).map_err(|e| Error::io(&pstr, e))?;
    for (method, counts) in rows {
        let joined = counts
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join(",");
        writeln!(out, "{method},{joined}").map_err(|e| Error::io(&pstr, e))?;
    }
    Ok(())
}

/// Parse a frequency table written by [`write_frequency_csv`].
pub fn read_frequency_csv(path: impl AsRef<Path>) -> Result<Vec<(String, Vec<usize>)>> {
    let path = path.as_ref();
    let pstr = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(&pstr, e))?;
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if idx == 0 {
            continue;
        }
        let mut parts = line.split(',');
        let method = parts
            .next()
            .ok_or_else(|| Error::csv(&pstr, idx + 1, "empty line"))?
            .to_string();
        let counts: std::result::Result<Vec<usize>, _> = parts.map(|s| s.parse()).collect();
        let counts =
            counts.map_err(|_| Error::csv(&pstr, idx + 1, "bad count"))?;
        rows.push((method, counts));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mat::Mat;
    use crate::simgen::{truth_for_basis, DesignKind};
    use crate::BasisSpec;

    fn five_class_test_set() -> Dataset {
        // A tiny balanced set; exact errors don't matter for these tests.
        let mut feats = Vec::new();
        let mut labels = Vec::new();
        for k in 0..5usize {
            feats.extend(std::iter::repeat(0.1 * k as f64).take(10));
            labels.push(k + 1);
        }
        Dataset::new(Mat::from_rows(5, 10, feats), labels, 5, vec![]).unwrap()
    }

    #[test]
    fn zero_model_counts_against_five_class_truth() {
        let truth = truth_for_basis(DesignKind::FiveClass, BasisSpec::linear()).unwrap();
        let model = CoefModel::zero(5, 10);
        let rec = evaluate_model(&model, &five_class_test_set(), &truth).unwrap();
        assert_eq!(rec.correct_zeros, 41);
        assert_eq!(rec.incorrect_zeros, 9);
        assert_eq!(rec.model_size, 0);
        assert!(!rec.correct_model);
    }

    #[test]
    fn bayes_pattern_model_is_correct_model() {
        let truth = truth_for_basis(DesignKind::FiveClass, BasisSpec::linear()).unwrap();
        let w = crate::simgen::bayes_coefficients(DesignKind::FiveClass, BasisSpec::linear())
            .unwrap();
        let model = CoefModel::new(w, vec![0.0; 5]).unwrap();
        let rec = evaluate_model(&model, &five_class_test_set(), &truth).unwrap();
        assert_eq!(rec.correct_zeros, 41);
        assert_eq!(rec.incorrect_zeros, 0);
        assert_eq!(rec.model_size, 2);
        assert!(rec.correct_model);
    }

    #[test]
    fn cz_plus_iz_is_total_zero_count() {
        let truth = truth_for_basis(DesignKind::FiveClass, BasisSpec::linear()).unwrap();
        let mut w = Mat::zeros(5, 10);
        w.set(0, 0, 1.0);
        w.set(1, 0, -1.0);
        w.set(0, 7, 0.5);
        w.set(2, 7, -0.5);
        let model = CoefModel::new(w, vec![0.0; 5]).unwrap();
        let rec = evaluate_model(&model, &five_class_test_set(), &truth).unwrap();
        let zeros = model.w().iter().filter(|v| *v == 0.0).count();
        assert_eq!(rec.correct_zeros + rec.incorrect_zeros, zeros);
        assert_eq!(rec.model_size, 2);
    }

    #[test]
    fn evaluation_order_free_over_test_rows() {
        let truth = truth_for_basis(DesignKind::FiveClass, BasisSpec::linear()).unwrap();
        let test = five_class_test_set();
        let reversed = test.select_rows(&[4, 3, 2, 1, 0]);
        let model = CoefModel::zero(5, 10);
        let a = evaluate_model(&model, &test, &truth).unwrap();
        let b = evaluate_model(&model, &reversed, &truth).unwrap();
        assert_eq!(a.test_error, b.test_error);
    }

    #[test]
    fn aggregate_of_single_record() {
        let rec = RepRecord {
            test_error: 0.25,
            correct_zeros: 4,
            incorrect_zeros: 1,
            model_size: 3,
            correct_model: true,
            selected: vec![true, true, true, false],
            chosen_lambda: 1.0,
        };
        let rep = aggregate(&[rec]).unwrap();
        assert_eq!(rep.test_error_mean, 0.25);
        assert_eq!(rep.test_error_sd, 0.0);
        assert_eq!(rep.cm_count, 1);
        assert_eq!(rep.selection_frequency, vec![1, 1, 1, 0]);
    }

    #[test]
    fn aggregate_two_point_sd() {
        let mk = |te: f64| RepRecord {
            test_error: te,
            correct_zeros: 0,
            incorrect_zeros: 0,
            model_size: 0,
            correct_model: false,
            selected: vec![false],
            chosen_lambda: 1.0,
        };
        let rep = aggregate(&[mk(0.4), mk(0.5)]).unwrap();
        assert!((rep.test_error_mean - 0.45).abs() < 1e-12);
        assert!((rep.test_error_sd - 0.070710678).abs() < 1e-6);
        assert!(rep.selection_frequency.iter().all(|&c| c <= rep.n_reps));
    }

    #[test]
    fn summary_csv_roundtrip() {
        let rows = vec![
            SummaryRow {
                method: "supnorm".into(),
                te_mean: 0.453,
                te_sd: Some(0.02),
                te_se: Some(0.002),
                cz: 33.9,
                iz: 0.01,
                ms: 3.39,
                cm: 68,
            },
            SummaryRow {
                method: "bayes".into(),
                te_mean: 0.387,
                te_sd: None,
                te_se: Some(0.0022),
                cz: 41.0,
                iz: 0.0,
                ms: 2.0,
                cm: 100,
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("summary.csv");
        write_summary_csv(&rows, &p).unwrap();
        let back = read_summary_csv(&p).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].method, "supnorm");
        assert!((back[0].te_mean - 0.453).abs() < 1e-9);
        assert!(back[1].te_sd.is_none());
        assert_eq!(back[1].cm, 100);
    }

    #[test]
    fn frequency_csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("freq.csv");
        let rows = vec![("l1".to_string(), vec![10, 10, 3, 2])];
        let names: Vec<String> = (1..=4).map(|j| format!("x{j}")).collect();
        write_frequency_csv(&rows, &names, &p).unwrap();
        let back = read_frequency_csv(&p).unwrap();
        assert_eq!(back, rows);
    }
}
