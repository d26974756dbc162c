//! Regularizers on the coefficient matrix and their values.
//!
//! A weight of `+inf` encodes a coefficient forced to exactly zero; the LP
//! builders delete such columns outright instead of carrying a huge finite
//! weight.

use crate::error::Error;
use crate::mat::Mat;
use crate::model::CoefModel;
use crate::Result;

/// Which regularizer to apply, with the weight data it needs.
#[derive(Debug, Clone, PartialEq)]
pub enum PenaltySpec {
    /// Squared coefficients, `Σ_k Σ_j w_kj²` (the baseline fit).
    L2,
    /// `Σ_k Σ_j |w_kj|`.
    L1,
    /// `Σ_j max_k |w_kj|`.
    SupNorm,
    /// `Σ_k Σ_j τ_kj |w_kj|` with per-coefficient weights.
    AdaptiveL1 { tau: Mat },
    /// `Σ_j τ_j max_k |w_kj|` with per-variable weights.
    AdaptiveSupI { tau: Vec<f64> },
    /// `Σ_j max_k τ_kj |w_kj|` with per-coefficient weights.
    AdaptiveSupII { tau: Mat },
}

/// Penalty families selectable by name (CLI, study configs).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PenaltyKind {
    L2,
    L1,
    SupNorm,
    AdaptiveL1,
    AdaptiveSupI,
    AdaptiveSupII,
}

impl PenaltyKind {
    pub fn is_adaptive(self) -> bool {
        matches!(
            self,
            PenaltyKind::AdaptiveL1 | PenaltyKind::AdaptiveSupI | PenaltyKind::AdaptiveSupII
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            PenaltyKind::L2 => "l2",
            PenaltyKind::L1 => "l1",
            PenaltyKind::SupNorm => "supnorm",
            PenaltyKind::AdaptiveL1 => "adapt-l1",
            PenaltyKind::AdaptiveSupI => "adapt-sup1",
            PenaltyKind::AdaptiveSupII => "adapt-sup2",
        }
    }

    pub fn parse(s: &str) -> Option<PenaltyKind> {
        match s {
            "l2" => Some(PenaltyKind::L2),
            "l1" => Some(PenaltyKind::L1),
            "supnorm" => Some(PenaltyKind::SupNorm),
            "adapt-l1" => Some(PenaltyKind::AdaptiveL1),
            "adapt-sup1" => Some(PenaltyKind::AdaptiveSupI),
            "adapt-sup2" => Some(PenaltyKind::AdaptiveSupII),
            _ => None,
        }
    }
}

impl PenaltySpec {
    pub fn kind(&self) -> PenaltyKind {
        match self {
            PenaltySpec::L2 => PenaltyKind::L2,
            PenaltySpec::L1 => PenaltyKind::L1,
            PenaltySpec::SupNorm => PenaltyKind::SupNorm,
            PenaltySpec::AdaptiveL1 { .. } => PenaltyKind::AdaptiveL1,
            PenaltySpec::AdaptiveSupI { .. } => PenaltyKind::AdaptiveSupI,
            PenaltySpec::AdaptiveSupII { .. } => PenaltyKind::AdaptiveSupII,
        }
    }

    /// Check weight shapes and positivity (`+inf` allowed) against a model
    /// geometry of `k` classes and `d` variables.
    pub fn validate(&self, k: usize, d: usize) -> Result<()> {
        let check_mat = |tau: &Mat| -> Result<()> {
            if tau.rows() != k || tau.cols() != d {
                return Err(Error::BadWeights(format!(
                    "weight matrix is {}x{}, model is {}x{}",
                    tau.rows(),
                    tau.cols(),
                    k,
                    d
                )));
            }
            if tau.iter().any(|t| !(t > 0.0)) {
                return Err(Error::BadWeights("weights must be > 0 (inf allowed)".into()));
            }
            Ok(())
        };
        match self {
            PenaltySpec::L2 | PenaltySpec::L1 | PenaltySpec::SupNorm => Ok(()),
            PenaltySpec::AdaptiveL1 { tau } | PenaltySpec::AdaptiveSupII { tau } => check_mat(tau),
            PenaltySpec::AdaptiveSupI { tau } => {
                if tau.len() != d {
                    return Err(Error::BadWeights(format!(
                        "weight vector has length {}, model has {} variables",
                        tau.len(),
                        d
                    )));
                }
                if tau.iter().any(|t| !(*t > 0.0)) {
                    return Err(Error::BadWeights("weights must be > 0 (inf allowed)".into()));
                }
                Ok(())
            }
        }
    }
}

/// Sup-norm of a coefficient column: the largest absolute entry.
pub fn sup_norm(col: &[f64]) -> f64 {
    col.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// Penalty value of `model` under `spec`, without the λ factor.
///
/// Errors if a coefficient is nonzero where the weight is infinite; the LP
/// builders guarantee such coefficients are pinned to exact zero.
pub fn penalty_value(spec: &PenaltySpec, model: &CoefModel) -> Result<f64> {
    spec.validate(model.k_classes(), model.d_vars())?;
    let w = model.w();
    let k_n = model.k_classes();
    let d = model.d_vars();

    let weighted = |k: usize, j: usize, tau: f64| -> Result<f64> {
        let v = w.get(k, j);
        if tau.is_infinite() {
            if v != 0.0 {
                return Err(Error::InfiniteWeightViolated { k, j, value: v });
            }
            return Ok(0.0);
        }
        Ok(tau * v.abs())
    };

    match spec {
        PenaltySpec::L2 => Ok(w.iter().map(|v| v * v).sum()),
        PenaltySpec::L1 => Ok(w.iter().map(f64::abs).sum()),
        PenaltySpec::SupNorm => Ok((0..d).map(|j| sup_norm(&w.col(j))).sum()),
        PenaltySpec::AdaptiveL1 { tau } => {
            let mut total = 0.0;
            for k in 0..k_n {
                for j in 0..d {
                    total += weighted(k, j, tau.get(k, j))?;
                }
            }
            Ok(total)
        }
        PenaltySpec::AdaptiveSupI { tau } => {
            let mut total = 0.0;
            for (j, &t) in tau.iter().enumerate() {
                let s = sup_norm(&w.col(j));
                if t.is_infinite() {
                    if s != 0.0 {
                        let k = (0..k_n).find(|&k| w.get(k, j) != 0.0).unwrap();
                        return Err(Error::InfiniteWeightViolated {
                            k,
                            j,
                            value: w.get(k, j),
                        });
                    }
                } else {
                    total += t * s;
                }
            }
            Ok(total)
        }
        PenaltySpec::AdaptiveSupII { tau } => {
            let mut total = 0.0;
            for j in 0..d {
                let mut col_max = 0.0f64;
                for k in 0..k_n {
                    col_max = col_max.max(weighted(k, j, tau.get(k, j))?);
                }
                total += col_max;
            }
            Ok(total)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(k: usize, d: usize, w: Vec<f64>) -> CoefModel {
        CoefModel::new(Mat::from_rows(k, d, w), vec![0.0; k]).unwrap()
    }

    #[test]
    fn sup_norm_basics() {
        assert_eq!(sup_norm(&[0.0, 0.0, 0.0, 0.0]), 0.0);
        assert_eq!(sup_norm(&[1.0, -3.0, 2.0]), 3.0);
    }

    #[test]
    fn supnorm_and_l1_values() {
        // columns (1,-1,0) and (0,0,0)
        let m = model(3, 2, vec![1.0, 0.0, -1.0, 0.0, 0.0, 0.0]);
        assert_eq!(penalty_value(&PenaltySpec::SupNorm, &m).unwrap(), 1.0);
        assert_eq!(penalty_value(&PenaltySpec::L1, &m).unwrap(), 2.0);
    }

    #[test]
    fn adaptive_sup1_weighted_sum() {
        // columns with sup-norms (3, 0), weights (2, 5)
        let m = model(3, 2, vec![3.0, 0.0, -3.0, 0.0, 0.0, 0.0]);
        let spec = PenaltySpec::AdaptiveSupI { tau: vec![2.0, 5.0] };
        assert_eq!(penalty_value(&spec, &m).unwrap(), 6.0);
    }

    #[test]
    fn infinite_weight_with_nonzero_coefficient_errors() {
        let m = model(3, 1, vec![1.0, -1.0, 0.0]);
        let mut tau = Mat::from_rows(3, 1, vec![1.0, 1.0, 1.0]);
        tau.set(0, 0, f64::INFINITY);
        let err = penalty_value(&PenaltySpec::AdaptiveL1 { tau }, &m).unwrap_err();
        assert!(matches!(err, Error::InfiniteWeightViolated { k: 0, j: 0, .. }));
    }

    #[test]
    fn adaptive_sup2_uses_weighted_column_max() {
        let m = model(3, 1, vec![0.5, -0.5, 0.0]);
        let tau = Mat::from_rows(3, 1, vec![1.0, 4.0, 1.0]);
        let spec = PenaltySpec::AdaptiveSupII { tau };
        assert!((penalty_value(&spec, &m).unwrap() - 2.0).abs() < 1e-15);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            // With three classes and sum-to-zero columns, the absolute sum
            // of a column is exactly twice its largest magnitude, so the
            // L1 value is twice the sup-norm value.
            #[test]
            fn l1_is_twice_supnorm_under_sum_to_zero(
                cols in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..6)
            ) {
                let d = cols.len();
                let mut w = Mat::zeros(3, d);
                for (j, &(a, b)) in cols.iter().enumerate() {
                    w.set(0, j, a);
                    w.set(1, j, b);
                    w.set(2, j, -a - b);
                }
                let m = CoefModel::new(w, vec![0.0; 3]).unwrap();
                let l1 = penalty_value(&PenaltySpec::L1, &m).unwrap();
                let sup = penalty_value(&PenaltySpec::SupNorm, &m).unwrap();
                prop_assert!((l1 - 2.0 * sup).abs() <= 1e-12 * (1.0 + l1));
            }
        }
    }
}
