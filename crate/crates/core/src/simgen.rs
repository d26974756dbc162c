//! Seeded generators for the three benchmark designs, their exact Bayes
//! classifiers, and Monte-Carlo Bayes-error estimation.
//!
//! Replication `r` of a study draws from seed `base_seed + r`; inside one
//! replication the train/tune/test splits use separate ChaCha streams, so
//! studies are reproducible and replications can run in parallel.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::basis::{expanded_count, BasisSpec};
use crate::dataset::Dataset;
use crate::error::Error;
use crate::mat::Mat;
use crate::Result;

/// Which benchmark distribution to draw from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DesignKind {
    /// Five Gaussian classes on a circle in the first two of ten variables.
    FiveClass,
    /// Four classes with linear log-odds in the first four of ten variables.
    FourClassLinear,
    /// Three classes with quadratic log-odds in the first two of five
    /// variables.
    NonlinearThreeClass,
}

impl DesignKind {
    pub fn k_classes(self) -> usize {
        match self {
            DesignKind::FiveClass => 5,
            DesignKind::FourClassLinear => 4,
            DesignKind::NonlinearThreeClass => 3,
        }
    }

    pub fn d_raw(self) -> usize {
        match self {
            DesignKind::FiveClass | DesignKind::FourClassLinear => 10,
            DesignKind::NonlinearThreeClass => 5,
        }
    }

    /// The basis each design is modeled in: linear for the two linear
    /// designs, degree-2 polynomial with cross products for the nonlinear.
    pub fn default_basis(self) -> BasisSpec {
        match self {
            DesignKind::NonlinearThreeClass => BasisSpec::poly(2),
            _ => BasisSpec::linear(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DesignKind::FiveClass => "five-class",
            DesignKind::FourClassLinear => "four-class",
            DesignKind::NonlinearThreeClass => "nonlinear",
        }
    }

    pub fn parse(s: &str) -> Option<DesignKind> {
        match s {
            "five-class" => Some(DesignKind::FiveClass),
            "four-class" => Some(DesignKind::FourClassLinear),
            "nonlinear" => Some(DesignKind::NonlinearThreeClass),
            _ => None,
        }
    }
}

/// A fully specified generation request.
#[derive(Debug, Clone, Copy)]
pub struct SimDesign {
    pub kind: DesignKind,
    pub n_train: usize,
    pub n_tune: usize,
    pub n_test: usize,
    pub seed: u64,
}

/// The design's true sparsity structure over a given feature space.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    /// 0-based indices of the variables the Bayes rule uses.
    pub relevant_vars: Vec<usize>,
    /// K×d: true where the centered Bayes coefficient is zero.
    pub true_zero_pattern: Mat01,
    pub bayes_error: Option<(f64, f64)>,
}

/// A boolean K×d mask stored row-major.
#[derive(Debug, Clone)]
pub struct Mat01 {
    pub rows: usize,
    pub cols: usize,
    pub mask: Vec<bool>,
}

impl Mat01 {
    pub fn get(&self, r: usize, c: usize) -> bool {
        self.mask[r * self.cols + c]
    }

    pub fn count_true(&self) -> usize {
        self.mask.iter().filter(|b| **b).count()
    }
}

const FIVE_SIGMA1: f64 = std::f64::consts::SQRT_2;
const FIVE_SIGMA2: f64 = 1.0;

fn five_class_means() -> [[f64; 2]; 5] {
    let mut mu = [[0.0; 2]; 5];
    for (k, m) in mu.iter_mut().enumerate() {
        let angle = (2.0 * (k as f64 + 1.0) - 1.0) * std::f64::consts::PI / 5.0;
        m[0] = 2.0 * angle.cos();
        m[1] = 2.0 * angle.sin();
    }
    mu
}

/// Class score functions of the two softmax designs, defined on the raw
/// covariates (noise coordinates never enter).
fn softmax_scores(kind: DesignKind, x: &[f64]) -> Vec<f64> {
    match kind {
        DesignKind::FourClassLinear => vec![
            -5.0 * x[0] + 5.0 * x[3],
            5.0 * x[0] + 5.0 * x[1],
            -5.0 * x[1] + 5.0 * x[2],
            -5.0 * x[2] - 5.0 * x[3],
        ],
        DesignKind::NonlinearThreeClass => {
            let (x1, x2) = (x[0], x[1]);
            vec![
                -2.0 * x1 + 0.2 * x1 * x1 - 0.1 * x2 * x2 + 0.2,
                -0.4 * x1 * x1 + 0.2 * x2 * x2 - 0.4,
                2.0 * x1 + 0.2 * x1 * x1 - 0.1 * x2 * x2 + 0.2,
            ]
        }
        DesignKind::FiveClass => unreachable!("five-class labels are stratified"),
    }
}

/// Exact Bayes prediction for a raw covariate vector (1-based label).
pub fn bayes_predict(kind: DesignKind, x: &[f64]) -> usize {
    match kind {
        DesignKind::FiveClass => {
            // Equal priors, equal spherical covariances, equal-norm means:
            // the density argmax reduces to the best mean inner product.
            let mu = five_class_means();
            let mut best = 0;
            let mut best_score = f64::NEG_INFINITY;
            for (k, m) in mu.iter().enumerate() {
                let log_density = -((x[0] - m[0]).powi(2) + (x[1] - m[1]).powi(2))
                    / (2.0 * FIVE_SIGMA1 * FIVE_SIGMA1);
                if log_density > best_score {
                    best_score = log_density;
                    best = k;
                }
            }
            best + 1
        }
        other => {
            let f = softmax_scores(other, x);
            crate::model::argmax_first(&f) + 1
        }
    }
}

struct Normal {
    mean: f64,
    sd: f64,
}

impl Normal {
    /// Box-Muller from two uniforms; fully determined by the RNG stream.
    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
        let u2: f64 = rng.gen();
        let z = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
        self.mean + self.sd * z
    }
}

fn draw_label(p_scores: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let m = p_scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = p_scores.iter().map(|f| (f - m).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut u: f64 = rng.gen::<f64>() * total;
    for (k, w) in weights.iter().enumerate() {
        u -= w;
        if u <= 0.0 {
            return k + 1;
        }
    }
    weights.len()
}

fn gen_split(kind: DesignKind, n: usize, rng: &mut ChaCha8Rng) -> Result<Dataset> {
    let d = kind.d_raw();
    let k = kind.k_classes();
    let mut feats = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    match kind {
        DesignKind::FiveClass => {
            if n % 5 != 0 {
                return Err(Error::InvalidInput(format!(
                    "five-class splits need sizes divisible by 5, got {n}"
                )));
            }
            let mu = five_class_means();
            let signal = Normal { mean: 0.0, sd: FIVE_SIGMA1 };
            let noise = Normal { mean: 0.0, sd: FIVE_SIGMA2 };
            for (kk, m) in mu.iter().enumerate() {
                for _ in 0..n / 5 {
                    feats.push(m[0] + signal.sample(rng));
                    feats.push(m[1] + signal.sample(rng));
                    for _ in 2..d {
                        feats.push(noise.sample(rng));
                    }
                    labels.push(kk + 1);
                }
            }
        }
        DesignKind::FourClassLinear => {
            let noise = Normal { mean: 0.0, sd: 8.0 };
            for _ in 0..n {
                let mut x = Vec::with_capacity(d);
                for _ in 0..4 {
                    x.push(rng.gen_range(-1.0..1.0));
                }
                for _ in 4..d {
                    x.push(noise.sample(rng));
                }
                labels.push(draw_label(&softmax_scores(kind, &x), rng));
                feats.extend_from_slice(&x);
            }
        }
        DesignKind::NonlinearThreeClass => {
            let noise = Normal { mean: 0.0, sd: 2.0 };
            for _ in 0..n {
                let mut x = Vec::with_capacity(d);
                x.push(rng.gen_range(-3.0..3.0));
                x.push(rng.gen_range(-6.0..6.0));
                for _ in 2..d {
                    x.push(noise.sample(rng));
                }
                labels.push(draw_label(&softmax_scores(kind, &x), rng));
                feats.extend_from_slice(&x);
            }
        }
    }
    Dataset::new(Mat::from_rows(n, d, feats), labels, k, vec![])
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Generate the three splits and the design's ground truth over its
/// default basis.
pub fn generate(design: &SimDesign) -> Result<(Dataset, Dataset, Dataset, GroundTruth)> {
    let train = gen_split(design.kind, design.n_train, &mut stream_rng(design.seed, 0))?;
    let tune = gen_split(design.kind, design.n_tune, &mut stream_rng(design.seed, 1))?;
    let test = gen_split(design.kind, design.n_test, &mut stream_rng(design.seed, 2))?;
    let truth = truth_for_basis(design.kind, design.kind.default_basis())?;
    Ok((train, tune, test, truth))
}

/// Centered Bayes coefficients of the design, written over the expanded
/// monomial columns of `basis` (zero for every monomial the Bayes score
/// functions do not contain). The listed score functions already satisfy
/// the sum-to-zero constraint; this is asserted in tests.
pub fn bayes_coefficients(kind: DesignKind, basis: BasisSpec) -> Result<Mat> {
    let d = kind.d_raw();
    let k = kind.k_classes();
    let cols = expanded_count(d, basis)?;
    let mut w = Mat::zeros(k, cols);

    // Column index of a raw variable (identity monomials come first).
    let var = |j: usize| j;
    // Column index of x_{j}^2 among the degree-2 block in graded lex:
    // offset d + position of (j,j) among pairs i<=j.
    let square = |j: usize| -> usize {
        let mut idx = d;
        for a in 0..d {
            for b in a..d {
                if a == j && b == j {
                    return idx;
                }
                idx += 1;
            }
        }
        unreachable!()
    };

    match kind {
        DesignKind::FiveClass => {
            let mu = five_class_means();
            for (kk, m) in mu.iter().enumerate() {
                // Equal-norm means leave no intercept differences; the
                // linear part is mu_k / sigma^2 up to a common factor.
                w.set(kk, var(0), m[0]);
                w.set(kk, var(1), m[1]);
            }
        }
        DesignKind::FourClassLinear => {
            let coef = [
                [-5.0, 0.0, 0.0, 5.0],
                [5.0, 5.0, 0.0, 0.0],
                [0.0, -5.0, 5.0, 0.0],
                [0.0, 0.0, -5.0, -5.0],
            ];
            for (kk, row) in coef.iter().enumerate() {
                for (j, &c) in row.iter().enumerate() {
                    w.set(kk, var(j), c);
                }
            }
        }
        DesignKind::NonlinearThreeClass => {
            if basis.degree < 2 {
                return Err(Error::InvalidInput(
                    "the nonlinear design needs a basis of degree >= 2".into(),
                ));
            }
            let lin = [-2.0, 0.0, 2.0];
            let x1sq = [0.2, -0.4, 0.2];
            let x2sq = [-0.1, 0.2, -0.1];
            for kk in 0..3 {
                w.set(kk, var(0), lin[kk]);
                w.set(kk, square(0), x1sq[kk]);
                w.set(kk, square(1), x2sq[kk]);
            }
        }
    }
    // Structural zeros of the designs (e.g. sin(pi)) must be exact so that
    // zero-coefficient counting is unambiguous.
    for v in w.data_mut() {
        if v.abs() < 1e-9 {
            *v = 0.0;
        }
    }
    Ok(w)
}

/// Ground truth (zero pattern, relevant variables) over the expanded
/// feature space of `basis`.
pub fn truth_for_basis(kind: DesignKind, basis: BasisSpec) -> Result<GroundTruth> {
    let w = bayes_coefficients(kind, basis)?;
    let mask: Vec<bool> = w.iter().map(|v| v.abs() < 1e-9).collect();
    let pattern = Mat01 {
        rows: w.rows(),
        cols: w.cols(),
        mask,
    };
    let relevant_vars = (0..pattern.cols)
        .filter(|&j| (0..pattern.rows).any(|k| !pattern.get(k, j)))
        .collect();
    Ok(GroundTruth {
        relevant_vars,
        true_zero_pattern: pattern,
        bayes_error: None,
    })
}

/// Monte-Carlo estimate of the Bayes error with its binomial standard
/// error.
pub fn estimate_bayes_error(kind: DesignKind, n_mc: usize, seed: u64) -> Result<(f64, f64)> {
    if n_mc < 1000 {
        return Err(Error::InvalidInput(format!(
            "need at least 1000 Monte-Carlo draws, got {n_mc}"
        )));
    }
    // Five-class stratification needs a multiple of 5; round up.
    let n = if kind == DesignKind::FiveClass {
        n_mc.div_ceil(5) * 5
    } else {
        n_mc
    };
    let data = gen_split(kind, n, &mut stream_rng(seed, 3))?;
    let mut wrong = 0usize;
    for i in 0..data.n() {
        if bayes_predict(kind, data.row(i)) != data.label(i) {
            wrong += 1;
        }
    }
    let p = wrong as f64 / data.n() as f64;
    let se = (p * (1.0 - p) / data.n() as f64).sqrt();
    Ok((p, se))
}
