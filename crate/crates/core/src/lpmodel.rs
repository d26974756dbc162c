//! Translation of the penalized MSVM problems into linear programs and back.
//!
//! Variables are laid out in blocks: intercept sign parts `b+`/`b-` (K
//! each), coefficient sign parts `w+`/`w-` (K·d each), hinge slacks `ξ`
//! (n·K), and for the sup-norm family the per-variable bounds `η` (d).
//! Rows are the intercept sum-to-zero, the d per-variable sum-to-zero
//! rows, the n·K margin rows, and for the sup-norm family K·d rows tying
//! the coefficient magnitudes to `η`.
//!
//! A weight of `+inf` deletes the corresponding coefficient columns, which
//! pins the coefficient to exactly zero.

use crate::dataset::Dataset;
use crate::error::Error;
use crate::mat::Mat;
use crate::model::CoefModel;
use crate::penalty::PenaltySpec;
use crate::simplex::{self, LinearProgram, LpSolution, LpStatus, Sense, VarBound};
use crate::{Result, ZERO_TOL};

/// Index maps from model quantities to LP columns. `None` marks a column
/// deleted by an infinite adaptive weight (coefficient pinned to zero).
#[derive(Debug, Clone)]
pub struct MsvmLpLayout {
    pub k_classes: usize,
    pub d_vars: usize,
    pub n_rows: usize,
    pub lambda: f64,
    pub b_pos: Vec<usize>,
    pub b_neg: Vec<usize>,
    /// Row-major `k * d + j`.
    pub w_pos: Vec<Option<usize>>,
    pub w_neg: Vec<Option<usize>>,
    /// Row-major `i * K + k`.
    pub xi: Vec<usize>,
    /// Present only for the sup-norm family.
    pub eta: Vec<Option<usize>>,
    pub m_cols: usize,
    pub p_rows: usize,
}

/// Which per-coefficient scaling the sup-norm rows carry. Per-variable
/// weights live in the `η` costs instead and need no row scaling.
enum SupWeights<'a> {
    Plain,
    PerVariable,
    PerCoefficient(&'a Mat),
}

/// Build the L1 (or adaptive L1) MSVM linear program at `lambda`.
/// `tau` holds per-coefficient weights; `None` means all ones.
pub fn build_l1_lp(
    data: &Dataset,
    lambda: f64,
    tau: Option<&Mat>,
) -> Result<(LinearProgram, MsvmLpLayout)> {
    if !(lambda > 0.0) {
        return Err(Error::NonPositive {
            what: "lambda",
            got: lambda,
        });
    }
    let (k, d) = (data.k_classes(), data.d());
    if let Some(t) = tau {
        check_tau_matrix(t, k, d)?;
    }
    let pinned = |kk: usize, j: usize| tau.map_or(false, |t| t.get(kk, j).is_infinite());
    let weight = |kk: usize, j: usize| tau.map_or(1.0, |t| t.get(kk, j));

    let mut builder = LayoutBuilder::new(data, lambda, false, &pinned);
    for kk in 0..k {
        for j in 0..d {
            if let Some(c) = builder.layout.w_pos[kk * d + j] {
                builder.cost[c] = lambda * weight(kk, j);
                builder.cost[builder.layout.w_neg[kk * d + j].unwrap()] = lambda * weight(kk, j);
            }
        }
    }
    builder.finish(data, SupWeights::Plain)
}

/// Build the sup-norm family MSVM linear program at `lambda`. At most one
/// of `tau_vector` (per-variable weights on `η`) and `tau_matrix`
/// (per-coefficient scaling inside the `η` rows) may be given.
pub fn build_supnorm_lp(
    data: &Dataset,
    lambda: f64,
    tau_vector: Option<&[f64]>,
    tau_matrix: Option<&Mat>,
) -> Result<(LinearProgram, MsvmLpLayout)> {
    if !(lambda > 0.0) {
        return Err(Error::NonPositive {
            what: "lambda",
            got: lambda,
        });
    }
    if tau_vector.is_some() && tau_matrix.is_some() {
        return Err(Error::BadWeights(
            "supply per-variable or per-coefficient weights, not both".into(),
        ));
    }
    let (k, d) = (data.k_classes(), data.d());
    if let Some(t) = tau_matrix {
        check_tau_matrix(t, k, d)?;
    }
    if let Some(t) = tau_vector {
        if t.len() != d {
            return Err(Error::BadWeights(format!(
                "weight vector has length {}, data has {d} variables",
                t.len()
            )));
        }
        if t.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::BadWeights("weights must be > 0 (inf allowed)".into()));
        }
    }

    let pinned = |kk: usize, j: usize| {
        tau_matrix.map_or(false, |t| t.get(kk, j).is_infinite())
            || tau_vector.map_or(false, |t| t[j].is_infinite())
    };
    let mut builder = LayoutBuilder::new(data, lambda, true, &pinned);
    for j in 0..d {
        if let Some(c) = builder.layout.eta[j] {
            let w = tau_vector.map_or(1.0, |t| t[j]);
            builder.cost[c] = lambda * w;
        }
    }
    let sup = match (tau_vector, tau_matrix) {
        (Some(_), None) => SupWeights::PerVariable,
        (None, Some(m)) => SupWeights::PerCoefficient(m),
        (None, None) => SupWeights::Plain,
        (Some(_), Some(_)) => unreachable!(),
    };
    builder.finish(data, sup)
}

fn check_tau_matrix(t: &Mat, k: usize, d: usize) -> Result<()> {
    if t.rows() != k || t.cols() != d {
        return Err(Error::BadWeights(format!(
            "weight matrix is {}x{}, data needs {k}x{d}",
            t.rows(),
            t.cols()
        )));
    }
    if t.iter().any(|v| !(v > 0.0)) {
        return Err(Error::BadWeights("weights must be > 0 (inf allowed)".into()));
    }
    Ok(())
}

struct LayoutBuilder {
    layout: MsvmLpLayout,
    cost: Vec<f64>,
}

impl LayoutBuilder {
    /// Assign column indices for every block, skipping pinned coefficients.
    fn new(
        data: &Dataset,
        lambda: f64,
        with_eta: bool,
        pinned: &dyn Fn(usize, usize) -> bool,
    ) -> Self {
        let (k, d, n) = (data.k_classes(), data.d(), data.n());
        let mut next = 0usize;
        let mut take = || {
            let c = next;
            next += 1;
            c
        };
        let b_pos: Vec<usize> = (0..k).map(|_| take()).collect();
        let b_neg: Vec<usize> = (0..k).map(|_| take()).collect();
        let mut w_pos = vec![None; k * d];
        for kk in 0..k {
            for j in 0..d {
                if !pinned(kk, j) {
                    w_pos[kk * d + j] = Some(take());
                }
            }
        }
        let mut w_neg = vec![None; k * d];
        for kk in 0..k {
            for j in 0..d {
                if w_pos[kk * d + j].is_some() {
                    w_neg[kk * d + j] = Some(take());
                }
            }
        }
        let xi: Vec<usize> = (0..n * k).map(|_| take()).collect();
        let eta = if with_eta {
            (0..d)
                .map(|j| {
                    // A variable pinned across every class needs no bound.
                    if (0..k).all(|kk| pinned(kk, j)) {
                        None
                    } else {
                        Some(take())
                    }
                })
                .collect()
        } else {
            vec![None; d]
        };
        let m_cols = next;
        let p_rows = 1 + d + n * k + if with_eta { k * d } else { 0 };
        LayoutBuilder {
            layout: MsvmLpLayout {
                k_classes: k,
                d_vars: d,
                n_rows: n,
                lambda,
                b_pos,
                b_neg,
                w_pos,
                w_neg,
                xi,
                eta,
                m_cols,
                p_rows,
            },
            cost: vec![0.0; m_cols],
        }
    }

    fn finish(mut self, data: &Dataset, sup: SupWeights<'_>) -> Result<(LinearProgram, MsvmLpLayout)> {
        let l = &self.layout;
        let (k, d, n) = (l.k_classes, l.d_vars, l.n_rows);
        let nf = n as f64;

        // Hinge slack costs: only non-target classes enter the loss.
        for i in 0..n {
            let y = data.label(i);
            for kk in 0..k {
                if kk + 1 != y {
                    self.cost[l.xi[i * k + kk]] = 1.0 / nf;
                }
            }
        }

        let mut a = Mat::zeros(l.p_rows, l.m_cols);
        let mut senses = Vec::with_capacity(l.p_rows);
        let mut rhs = Vec::with_capacity(l.p_rows);

        // Row 0: sum of intercepts is zero.
        for kk in 0..k {
            a.set(0, l.b_pos[kk], 1.0);
            a.set(0, l.b_neg[kk], -1.0);
        }
        senses.push(Sense::Eq);
        rhs.push(0.0);

        // Rows 1..=d: each coefficient column sums to zero.
        for j in 0..d {
            let row = 1 + j;
            for kk in 0..k {
                if let Some(c) = l.w_pos[kk * d + j] {
                    a.set(row, c, 1.0);
                    a.set(row, l.w_neg[kk * d + j].unwrap(), -1.0);
                }
            }
            senses.push(Sense::Eq);
            rhs.push(0.0);
        }

        // Margin rows: xi_ik - b_k - w_k . x_i >= 1.
        for i in 0..n {
            let x = data.row(i);
            for kk in 0..k {
                let row = 1 + d + i * k + kk;
                a.set(row, l.xi[i * k + kk], 1.0);
                a.set(row, l.b_pos[kk], -1.0);
                a.set(row, l.b_neg[kk], 1.0);
                for (j, &xv) in x.iter().enumerate() {
                    if xv != 0.0 {
                        if let Some(c) = l.w_pos[kk * d + j] {
                            a.set(row, c, -xv);
                            a.set(row, l.w_neg[kk * d + j].unwrap(), xv);
                        }
                    }
                }
                senses.push(Sense::Ge);
                rhs.push(1.0);
            }
        }

        // Sup-norm rows: s_kj (w+ + w-) - eta_j <= 0.
        if matches!(sup, SupWeights::Plain) && l.eta.iter().all(|e| e.is_none()) {
            // L1 family: no eta block, no extra rows.
        } else {
            for j in 0..d {
                for kk in 0..k {
                    let row = 1 + d + n * k + j * k + kk;
                    if let Some(c) = l.w_pos[kk * d + j] {
                        let s = match &sup {
                            SupWeights::Plain | SupWeights::PerVariable => 1.0,
                            SupWeights::PerCoefficient(t) => t.get(kk, j),
                        };
                        a.set(row, c, s);
                        a.set(row, l.w_neg[kk * d + j].unwrap(), s);
                    }
                    if let Some(e) = l.eta[j] {
                        a.set(row, e, -1.0);
                    }
                    senses.push(Sense::Le);
                    rhs.push(0.0);
                }
            }
        }

        let lp = LinearProgram::new(
            self.cost,
            a,
            senses,
            rhs,
            vec![VarBound::NonNeg; self.layout.m_cols],
        )?;
        Ok((lp, self.layout))
    }
}

/// Invert the sign-split substitution and snap near-zero coefficients to
/// exact zero. The returned model satisfies sum-to-zero within 1e-8: each
/// coefficient column is re-centered over its surviving nonzero support,
/// which moves entries by at most the LP residual.
pub fn decode(solution: &LpSolution, layout: &MsvmLpLayout) -> Result<CoefModel> {
    if solution.status != LpStatus::Optimal {
        return Err(Error::SolverStatus(solution.status));
    }
    let x = solution
        .x
        .as_ref()
        .expect("optimal solution carries a point");
    let (k, d) = (layout.k_classes, layout.d_vars);

    let mut b: Vec<f64> = (0..k)
        .map(|kk| x[layout.b_pos[kk]] - x[layout.b_neg[kk]])
        .collect();
    let b_mean = b.iter().sum::<f64>() / k as f64;
    b.iter_mut().for_each(|v| *v -= b_mean);

    let mut w = Mat::zeros(k, d);
    for kk in 0..k {
        for j in 0..d {
            if let Some(c) = layout.w_pos[kk * d + j] {
                let v = x[c] - x[layout.w_neg[kk * d + j].unwrap()];
                w.set(kk, j, if v.abs() <= ZERO_TOL { 0.0 } else { v });
            }
        }
    }
    for j in 0..d {
        let nz: Vec<usize> = (0..k).filter(|&kk| w.get(kk, j) != 0.0).collect();
        if nz.is_empty() {
            continue;
        }
        let shift = nz.iter().map(|&kk| w.get(kk, j)).sum::<f64>() / nz.len() as f64;
        if shift != 0.0 {
            for &kk in &nz {
                w.set(kk, j, w.get(kk, j) - shift);
            }
        }
    }
    CoefModel::new(w, b)
}

/// A completed LP fit: the decoded model plus the solver's bookkeeping.
#[derive(Debug, Clone)]
pub struct FitOutput {
    pub model: CoefModel,
    pub lp_objective: f64,
    pub iterations: usize,
}

/// Fit an LP-family penalty (everything except L2) at the given `lambda`.
///
/// The trivial point (zero model, unit slacks) is always feasible and the
/// objective is bounded below by zero, so a non-`Optimal` status is a
/// solver failure and comes back as an error.
pub fn fit_penalized(data: &Dataset, spec: &PenaltySpec, lambda: f64) -> Result<FitOutput> {
    let (lp, layout) = match spec {
        PenaltySpec::L1 => build_l1_lp(data, lambda, None)?,
        PenaltySpec::AdaptiveL1 { tau } => build_l1_lp(data, lambda, Some(tau))?,
        PenaltySpec::SupNorm => build_supnorm_lp(data, lambda, None, None)?,
        PenaltySpec::AdaptiveSupI { tau } => build_supnorm_lp(data, lambda, Some(tau), None)?,
        PenaltySpec::AdaptiveSupII { tau } => build_supnorm_lp(data, lambda, None, Some(tau))?,
        PenaltySpec::L2 => {
            return Err(Error::InvalidInput(
                "the L2 penalty is fitted by subgradient descent, not an LP".into(),
            ))
        }
    };
    let limit = 40 * (lp.n_rows() + lp.n_cols()) + 200;
    let solution = simplex::solve(&lp, limit)?;
    if solution.status != LpStatus::Optimal {
        return Err(Error::SolverStatus(solution.status));
    }
    let model = decode(&solution, &layout)?;
    Ok(FitOutput {
        model,
        lp_objective: solution.objective,
        iterations: solution.iterations,
    })
}
