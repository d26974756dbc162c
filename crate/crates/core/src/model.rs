//! The fitted classifier: a K×d coefficient matrix plus intercepts, under
//! the sum-to-zero constraint, predicting with the argmax rule.

use crate::dataset::Dataset;
use crate::error::Error;
use crate::mat::Mat;
use crate::{Result, SUM_TO_ZERO_TOL};

/// Coefficients of the K decision functions `f_k(x) = b_k + w_k · x`.
///
/// Row `k` of `w` holds the coefficients of class `k`; column `j` collects
/// the coefficients of variable `j` across classes. Identifiability requires
/// each column of `w` and the intercept vector to sum to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefModel {
    w: Mat,
    b: Vec<f64>,
}

impl CoefModel {
    /// Validating constructor: finite entries and sum-to-zero within
    /// [`SUM_TO_ZERO_TOL`].
    pub fn new(w: Mat, b: Vec<f64>) -> Result<Self> {
        if b.len() != w.rows() {
            return Err(Error::DimensionMismatch {
                axis: "k_classes",
                expected: w.rows(),
                got: b.len(),
            });
        }
        if !w.is_finite() || !b.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { what: "coefficients" });
        }
        let m = CoefModel { w, b };
        if !m.check_sum_to_zero(SUM_TO_ZERO_TOL) {
            return Err(Error::InvalidInput(
                "coefficients violate the sum-to-zero constraint".into(),
            ));
        }
        Ok(m)
    }

    /// The all-zero model for K classes on d variables.
    pub fn zero(k_classes: usize, d_vars: usize) -> Self {
        CoefModel {
            w: Mat::zeros(k_classes, d_vars),
            b: vec![0.0; k_classes],
        }
    }

    pub fn k_classes(&self) -> usize {
        self.w.rows()
    }

    pub fn d_vars(&self) -> usize {
        self.w.cols()
    }

    pub fn w(&self) -> &Mat {
        &self.w
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    /// Decision values `f_k(x)` for all classes.
    pub fn decision_values(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.d_vars() {
            return Err(Error::DimensionMismatch {
                axis: "d_vars",
                expected: self.d_vars(),
                got: x.len(),
            });
        }
        Ok((0..self.k_classes())
            .map(|k| {
                self.b[k]
                    + self
                        .w
                        .row(k)
                        .iter()
                        .zip(x)
                        .map(|(w, xi)| w * xi)
                        .sum::<f64>()
            })
            .collect())
    }

    /// Argmax-rule prediction; ties resolve to the smallest class index.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        let f = self.decision_values(x)?;
        Ok(argmax_first(&f) + 1)
    }

    /// Misclassification rate on a dataset.
    pub fn error_rate(&self, data: &Dataset) -> Result<f64> {
        if data.d() != self.d_vars() {
            return Err(Error::DimensionMismatch {
                axis: "d_vars",
                expected: self.d_vars(),
                got: data.d(),
            });
        }
        let mut wrong = 0usize;
        for i in 0..data.n() {
            if self.predict(data.row(i))? != data.label(i) {
                wrong += 1;
            }
        }
        Ok(wrong as f64 / data.n() as f64)
    }

    /// True iff every column sum of `w` and the sum of `b` are within `tol`
    /// of zero in absolute value.
    pub fn check_sum_to_zero(&self, tol: f64) -> bool {
        let bsum: f64 = self.b.iter().sum();
        if bsum.abs() > tol {
            return false;
        }
        for j in 0..self.d_vars() {
            let s: f64 = (0..self.k_classes()).map(|k| self.w.get(k, j)).sum();
            if s.abs() > tol {
                return false;
            }
        }
        true
    }

    /// Variables with a nonzero coefficient in some class. Assumes the
    /// coefficients have been zero-snapped (exact `0.0` means excluded).
    pub fn selected_vars(&self) -> Vec<usize> {
        (0..self.d_vars())
            .filter(|&j| (0..self.k_classes()).any(|k| self.w.get(k, j) != 0.0))
            .collect()
    }
}

/// Index of the maximum entry, first occurrence on ties.
pub(crate) fn argmax_first(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Data-fit term of the MSVM objective: the averaged multiclass hinge loss
/// `(1/n) Σ_i Σ_{k≠y_i} [f_k(x_i) + 1]_+`, without any penalty.
pub fn hinge_objective_loss(model: &CoefModel, data: &Dataset) -> Result<f64> {
    if data.d() != model.d_vars() {
        return Err(Error::DimensionMismatch {
            axis: "d_vars",
            expected: model.d_vars(),
            got: data.d(),
        });
    }
    if data.k_classes() != model.k_classes() {
        return Err(Error::DimensionMismatch {
            axis: "k_classes",
            expected: model.k_classes(),
            got: data.k_classes(),
        });
    }
    let mut total = 0.0;
    for i in 0..data.n() {
        let f = model.decision_values(data.row(i))?;
        let y = data.label(i);
        for (k, fk) in f.iter().enumerate() {
            if k + 1 != y {
                total += (fk + 1.0).max(0.0);
            }
        }
    }
    Ok(total / data.n() as f64)
}
