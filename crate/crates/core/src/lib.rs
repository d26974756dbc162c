//! # msvm-core
//!
//! Multicategory support vector machines with simultaneous classification and
//! variable selection. Fits K decision functions `f_k(x) = b_k + w_k·x` under
//! the sum-to-zero constraint and predicts with the argmax rule. Sparsity
//! comes from the penalty on the coefficient matrix:
//!
//! - `L1` — sum of |w_kj| over all coefficients,
//! - `SupNorm` — per variable, the largest |w_kj| across classes,
//! - adaptive variants of both, with data-driven weights derived from a
//!   tuned L2 baseline fit.
//!
//! Every penalized fit reduces to a linear program solved by the built-in
//! dense two-phase revised simplex ([`simplex`]). The crate also ships the
//! simulation designs, selection metrics, and the gene-expression screening
//! pipeline used by the `msvm` command-line tool.

pub mod basis;
pub mod dataset;
pub mod error;
pub mod genes;
pub mod l2base;
pub mod lpmodel;
pub mod mat;
pub mod metrics;
pub mod model;
pub mod penalty;
pub mod select;
pub mod simgen;
pub mod simplex;
pub mod study;

pub use basis::BasisSpec;
pub use dataset::Dataset;
pub use error::Error;
pub use mat::Mat;
pub use model::CoefModel;
pub use penalty::PenaltySpec;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Absolute tolerance for the sum-to-zero identifiability constraint.
pub const SUM_TO_ZERO_TOL: f64 = 1e-8;

/// Coefficients with magnitude at or below this are snapped to exact zero
/// when an LP solution is decoded, so selection counts are unambiguous.
pub const ZERO_TOL: f64 = 1e-6;
