//! The quadratically penalized baseline fit and the adaptive weights
//! derived from it.
//!
//! The fit minimizes the hinge loss plus `λ Σ w²` over the sum-to-zero
//! subspace by projected subgradient descent with a `step0/√t` schedule,
//! tracking the best objective seen. The quadratic term is applied as an
//! exact shrinkage (its proximal map) rather than an explicit gradient, so
//! the iteration stays stable across the whole λ grid; shrinkage is
//! uniform per column and therefore commutes with the projection. The
//! solution only feeds weight construction, so magnitude-level accuracy is
//! all that is required.

use crate::dataset::Dataset;
use crate::error::Error;
use crate::mat::Mat;
use crate::model::{hinge_objective_loss, CoefModel};
use crate::penalty::sup_norm;
use crate::Result;

/// Subgradient solver settings.
#[derive(Debug, Clone, Copy)]
pub struct L2FitConfig {
    pub max_iters: usize,
    pub step0: f64,
    /// Relative best-objective improvement under which the run stops,
    /// measured over a 100-iteration window.
    pub tol: f64,
}

impl Default for L2FitConfig {
    fn default() -> Self {
        L2FitConfig {
            max_iters: 20_000,
            step0: 1.0,
            tol: 1e-6,
        }
    }
}

/// Result of an L2 fit. `converged` is false when the window tolerance was
/// never reached within `max_iters`; the best iterate is returned either way.
#[derive(Debug, Clone)]
pub struct L2Fit {
    pub model: CoefModel,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Objective of the L2 MSVM at (w, b): hinge loss plus `lambda * Σ w²`.
pub fn l2_objective(data: &Dataset, lambda: f64, model: &CoefModel) -> Result<f64> {
    let hinge = hinge_objective_loss(model, data)?;
    let quad: f64 = model.w().iter().map(|v| v * v).sum();
    Ok(hinge + lambda * quad)
}

/// Subtract the column means of `w` and the mean of `b`: the Euclidean
/// projection onto the sum-to-zero subspace.
fn project(w: &mut Mat, b: &mut [f64]) {
    let k = w.rows();
    let bm = b.iter().sum::<f64>() / k as f64;
    b.iter_mut().for_each(|v| *v -= bm);
    for j in 0..w.cols() {
        let m = (0..k).map(|kk| w.get(kk, j)).sum::<f64>() / k as f64;
        if m != 0.0 {
            for kk in 0..k {
                w.set(kk, j, w.get(kk, j) - m);
            }
        }
    }
}

/// Fit the L2 MSVM at `lambda`, starting from the zero model.
pub fn fit_l2(data: &Dataset, lambda: f64, config: &L2FitConfig) -> Result<L2Fit> {
    if !(lambda > 0.0) {
        return Err(Error::NonPositive {
            what: "lambda",
            got: lambda,
        });
    }
    let (k, d, n) = (data.k_classes(), data.d(), data.n());
    let nf = n as f64;

    let mut w = Mat::zeros(k, d);
    let mut b = vec![0.0; k];
    let mut best_w = w.clone();
    let mut best_b = b.clone();
    let mut best_obj = l2_objective(data, lambda, &CoefModel::zero(k, d))?;

    let mut grad_w = Mat::zeros(k, d);
    let mut grad_b = vec![0.0; k];

    let mut window_anchor = best_obj;
    let mut converged = false;
    let mut iters = 0;

    for t in 1..=config.max_iters {
        iters = t;
        // Subgradient of the hinge term: active margins contribute x_i to
        // the non-target rows. The [.]_+ kink uses the zero subgradient.
        grad_w.data_mut().iter_mut().for_each(|v| *v = 0.0);
        grad_b.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            let x = data.row(i);
            let y = data.label(i);
            for kk in 0..k {
                if kk + 1 == y {
                    continue;
                }
                let f = b[kk]
                    + w.row(kk).iter().zip(x).map(|(wv, xv)| wv * xv).sum::<f64>();
                if f + 1.0 > 0.0 {
                    grad_b[kk] += 1.0 / nf;
                    let gr = grad_w.row_mut(kk);
                    for (g, xv) in gr.iter_mut().zip(x) {
                        *g += xv / nf;
                    }
                }
            }
        }

        let step = config.step0 / (t as f64).sqrt();
        // Hinge step, then the exact proximal shrink of the quadratic term.
        let shrink = 1.0 / (1.0 + 2.0 * lambda * step);
        for (wv, g) in w.data_mut().iter_mut().zip(grad_w.data()) {
            *wv = (*wv - step * g) * shrink;
        }
        for (bv, g) in b.iter_mut().zip(&grad_b) {
            *bv -= step * g;
        }
        project(&mut w, &mut b);

        let candidate = CoefModel::new(w.clone(), b.clone())?;
        let obj = l2_objective(data, lambda, &candidate)?;
        if obj < best_obj {
            best_obj = obj;
            best_w = w.clone();
            best_b = b.clone();
        }

        if t % 100 == 0 {
            let drop = window_anchor - best_obj;
            if drop <= config.tol * window_anchor.abs().max(1.0) {
                converged = true;
                break;
            }
            window_anchor = best_obj;
        }
    }

    Ok(L2Fit {
        model: CoefModel::new(best_w, best_b)?,
        objective: best_obj,
        iterations: iters,
        converged,
    })
}

/// How adaptive weights are derived from the baseline coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightMode {
    /// `τ_kj = 1 / |w̃_kj|`, infinite where `|w̃_kj| ≤ eps_zero`.
    PerCoefficient,
    /// `τ_j = 1 / max_k |w̃_kj|`, infinite where the column sup-norm is
    /// at most `eps_zero`.
    PerVariable,
}

/// Weight data produced by [`adaptive_weights`].
#[derive(Debug, Clone)]
pub enum AdaptiveWeights {
    PerCoefficient(Mat),
    PerVariable(Vec<f64>),
}

/// Default threshold below which a baseline coefficient counts as null.
/// Subgradient solutions are not exactly sparse, so this is looser than the
/// LP decoding snap tolerance.
pub const EPS_ZERO_DEFAULT: f64 = 1e-4;

/// Reciprocal-magnitude weights from a tuned baseline fit.
pub fn adaptive_weights(w_tilde: &CoefModel, mode: WeightMode, eps_zero: f64) -> AdaptiveWeights {
    match mode {
        WeightMode::PerCoefficient => {
            let mut tau = Mat::zeros(w_tilde.k_classes(), w_tilde.d_vars());
            for kk in 0..w_tilde.k_classes() {
                for j in 0..w_tilde.d_vars() {
                    let a = w_tilde.w().get(kk, j).abs();
                    tau.set(kk, j, if a <= eps_zero { f64::INFINITY } else { 1.0 / a });
                }
            }
            AdaptiveWeights::PerCoefficient(tau)
        }
        WeightMode::PerVariable => {
            let tau = (0..w_tilde.d_vars())
                .map(|j| {
                    let s = sup_norm(&w_tilde.w().col(j));
                    if s <= eps_zero {
                        f64::INFINITY
                    } else {
                        1.0 / s
                    }
                })
                .collect();
            AdaptiveWeights::PerVariable(tau)
        }
    }
}
