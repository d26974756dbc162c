//! Dense two-phase revised simplex for the MSVM linear programs.
//!
//! The solver keeps an explicit basis inverse with rank-one updates. Pricing
//! is Dantzig's rule; after `3*(rows+cols)` consecutive degenerate pivots it
//! switches to Bland's rule until a nondegenerate pivot is made, which
//! prevents cycling. Basic values and reduced costs are refreshed from the
//! inverse every [`REFRESH_INTERVAL`] pivots, and the inverse itself is
//! rebuilt from scratch if the final residual check fails.
//!
//! Tolerances (all absolute unless noted):
//! - [`PIVOT_TOL`]: minimum usable pivot magnitude.
//! - [`FEAS_TOL`]: feasibility tolerance for rhs-relative residuals.
//! - [`REDUCED_COST_TOL`]: optimality tolerance on reduced costs.
//!
//! A [`LinearProgram`] can be written to a plain-text file with
//! [`LinearProgram::dump`] for offline inspection. The layout is one line
//! `minimize p=<rows> m=<cols>`, a `c:` line with the costs, a `bounds:`
//! line with `nonneg`/`free` per variable, then one `row i:` line per
//! constraint with the dense coefficients, the sense (`<=`, `>=`, `=`) and
//! the right-hand side.

use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::Error;
use crate::mat::Mat;
use crate::Result;

/// Minimum usable pivot magnitude.
pub const PIVOT_TOL: f64 = 1e-9;
/// Feasibility tolerance, relative to `1 + |rhs|` per row.
pub const FEAS_TOL: f64 = 1e-7;
/// Optimality tolerance on reduced costs.
pub const REDUCED_COST_TOL: f64 = 1e-9;
/// Pivots between refreshes of basic values and reduced costs.
const REFRESH_INTERVAL: u64 = 50;
/// A step below this counts as a degenerate pivot.
const DEGENERATE_STEP: f64 = 1e-11;

static SOLVE_COUNT: AtomicU64 = AtomicU64::new(0);

/// Number of [`solve`] calls made by this process. Used by tests that pin
/// down how many fits an operation performs.
pub fn solve_count() -> u64 {
    SOLVE_COUNT.load(Ordering::Relaxed)
}

/// Row sense of a constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

/// Lower bound of a variable. Upper bounds are always `+inf`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarBound {
    /// Lower bound 0.
    NonNeg,
    /// Lower bound `-inf`; the variable is sign-split internally.
    Free,
}

/// A dense minimization LP: `min c·x` subject to `A x {<=,>=,=} rhs` with
/// per-variable lower bounds of 0 or `-inf` and no upper bounds.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub costs: Vec<f64>,
    pub a: Mat,
    pub senses: Vec<Sense>,
    pub rhs: Vec<f64>,
    pub lower: Vec<VarBound>,
}

/// Outcome of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

/// Solution report. `x` is in the original variable coordinates and present
/// only when `status == Optimal`.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Option<Vec<f64>>,
    pub objective: f64,
    pub iterations: usize,
    pub max_primal_residual: f64,
}

impl LinearProgram {
    pub fn new(
        costs: Vec<f64>,
        a: Mat,
        senses: Vec<Sense>,
        rhs: Vec<f64>,
        lower: Vec<VarBound>,
    ) -> Result<Self> {
        let lp = LinearProgram {
            costs,
            a,
            senses,
            rhs,
            lower,
        };
        lp.validate()?;
        Ok(lp)
    }

    pub fn n_rows(&self) -> usize {
        self.a.rows()
    }

    pub fn n_cols(&self) -> usize {
        self.a.cols()
    }

    pub fn validate(&self) -> Result<()> {
        let (p, m) = (self.a.rows(), self.a.cols());
        if self.costs.len() != m {
            return Err(Error::DimensionMismatch {
                axis: "costs",
                expected: m,
                got: self.costs.len(),
            });
        }
        if self.lower.len() != m {
            return Err(Error::DimensionMismatch {
                axis: "lower",
                expected: m,
                got: self.lower.len(),
            });
        }
        if self.senses.len() != p {
            return Err(Error::DimensionMismatch {
                axis: "senses",
                expected: p,
                got: self.senses.len(),
            });
        }
        if self.rhs.len() != p {
            return Err(Error::DimensionMismatch {
                axis: "rhs",
                expected: p,
                got: self.rhs.len(),
            });
        }
        if !self.a.is_finite()
            || !self.costs.iter().all(|v| v.is_finite())
            || !self.rhs.iter().all(|v| v.is_finite())
        {
            return Err(Error::NonFinite {
                what: "linear program",
            });
        }
        Ok(())
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.costs.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest constraint violation, each row normalized by `1 + |rhs|`.
    pub fn residual(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n_rows() {
            let ax: f64 = self.a.row(i).iter().zip(x).map(|(a, v)| a * v).sum();
            let viol = match self.senses[i] {
                Sense::Le => ax - self.rhs[i],
                Sense::Ge => self.rhs[i] - ax,
                Sense::Eq => (ax - self.rhs[i]).abs(),
            };
            worst = worst.max(viol / (1.0 + self.rhs[i].abs()));
        }
        worst
    }

    /// Plain-text dump for offline inspection; see the module docs for the
    /// layout.
    pub fn dump(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let pstr = path.display().to_string();
        let mut out = std::fs::File::create(path).map_err(|e| Error::io(&pstr, e))?;
        let fmt_row = |row: &[f64]| {
            row.iter()
                .map(|v| format!("{v:.17e}"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        writeln!(out, "minimize p={} m={}", self.n_rows(), self.n_cols())
            .map_err(|e| Error::io(&pstr, e))?;
        writeln!(out, "c: {}", fmt_row(&self.costs)).map_err(|e| Error::io(&pstr, e))?;
        let bounds = self
            .lower
            .iter()
            .map(|b| match b {
                VarBound::NonNeg => "nonneg",
                VarBound::Free => "free",
            })
            .collect::<Vec<_>>()
            .join(" ");
        writeln!(out, "bounds: {bounds}").map_err(|e| Error::io(&pstr, e))?;
        for i in 0..self.n_rows() {
            let sense = match self.senses[i] {
                Sense::Le => "<=",
                Sense::Ge => ">=",
                Sense::Eq => "=",
            };
            writeln!(
                out,
                "row {i}: {} {sense} {:.17e}",
                fmt_row(self.a.row(i)),
                self.rhs[i]
            )
            .map_err(|e| Error::io(&pstr, e))?;
        }
        Ok(())
    }
}

/// Equality standard form of an LP: senses become equalities via slack and
/// surplus columns, free variables are split into sign parts, and rows are
/// flipped so every right-hand side is nonnegative.
pub struct StandardForm {
    pub n_rows: usize,
    /// Structural columns: originals (split included) plus slacks.
    pub n_cols: usize,
    pub n_slack: usize,
    /// Number of free variables, each contributing one extra column.
    pub n_split: usize,
    cols: Vec<Vec<(u32, f64)>>,
    cost: Vec<f64>,
    rhs: Vec<f64>,
    /// Original variable -> (positive column, optional negative column).
    var_map: Vec<(usize, Option<usize>)>,
    /// Per row: slack column usable as an initial basic (+1 coefficient).
    slack_basic: Vec<Option<usize>>,
}

impl StandardForm {
    /// Map a standardized solution vector back to original coordinates.
    pub fn recover(&self, x_std: &[f64]) -> Vec<f64> {
        self.var_map
            .iter()
            .map(|&(pos, neg)| x_std[pos] - neg.map_or(0.0, |c| x_std[c]))
            .collect()
    }
}

/// Convert `lp` to equality standard form. The back-mapping lives in the
/// returned [`StandardForm`]; [`solve`] reports `x` in original coordinates.
pub fn standardize(lp: &LinearProgram) -> StandardForm {
    let p = lp.n_rows();
    let m0 = lp.n_cols();
    let flip: Vec<bool> = lp.rhs.iter().map(|&r| r < 0.0).collect();

    let n_split = lp.lower.iter().filter(|b| **b == VarBound::Free).count();
    let n_slack = lp
        .senses
        .iter()
        .filter(|s| !matches!(s, Sense::Eq))
        .count();
    let n_cols = m0 + n_split + n_slack;

    let mut cols: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n_cols];
    let mut cost = vec![0.0; n_cols];
    let mut var_map = Vec::with_capacity(m0);

    // Positive parts occupy the first m0 columns; negative parts follow.
    let mut next_neg = m0;
    for j in 0..m0 {
        cost[j] = lp.costs[j];
        let neg = if lp.lower[j] == VarBound::Free {
            let c = next_neg;
            next_neg += 1;
            cost[c] = -lp.costs[j];
            Some(c)
        } else {
            None
        };
        var_map.push((j, neg));
    }
    for i in 0..p {
        let sign = if flip[i] { -1.0 } else { 1.0 };
        let row = lp.a.row(i);
        for (j, &v) in row.iter().enumerate() {
            if v != 0.0 {
                cols[j].push((i as u32, sign * v));
                if let Some(c) = var_map[j].1 {
                    cols[c].push((i as u32, -sign * v));
                }
            }
        }
    }

    let mut slack_basic = vec![None; p];
    let mut next_slack = m0 + n_split;
    for i in 0..p {
        let sign = if flip[i] { -1.0 } else { 1.0 };
        let coef = match lp.senses[i] {
            Sense::Le => sign,
            Sense::Ge => -sign,
            Sense::Eq => continue,
        };
        cols[next_slack].push((i as u32, coef));
        if coef > 0.0 {
            slack_basic[i] = Some(next_slack);
        }
        next_slack += 1;
    }

    let rhs = lp.rhs.iter().map(|r| r.abs()).collect();
    StandardForm {
        n_rows: p,
        n_cols,
        n_slack,
        n_split,
        cols,
        cost,
        rhs,
        var_map,
        slack_basic,
    }
}

/// Solve `lp` with the two-phase revised simplex. Exceeding
/// `iteration_limit` total pivots yields `LpStatus::IterationLimit`, never a
/// silent wrong answer.
pub fn solve(lp: &LinearProgram, iteration_limit: usize) -> Result<LpSolution> {
    lp.validate()?;
    SOLVE_COUNT.fetch_add(1, Ordering::Relaxed);
    let std_form = standardize(lp);
    let mut solver = Solver::new(&std_form);
    let (status, iterations) = solver.run(iteration_limit);

    match status {
        LpStatus::Optimal => {
            let x_std = solver.extract(std_form.n_cols);
            let x = std_form.recover(&x_std);
            let objective = lp.objective(&x);
            let max_primal_residual = lp.residual(&x);
            Ok(LpSolution {
                status,
                x: Some(x),
                objective,
                iterations,
                max_primal_residual,
            })
        }
        _ => Ok(LpSolution {
            status,
            x: None,
            objective: f64::NAN,
            iterations,
            max_primal_residual: f64::NAN,
        }),
    }
}

enum Phase {
    One,
    Two,
}

struct Solver {
    p: usize,
    n_total: usize,
    /// Degenerate-streak threshold: 3 * (rows + original columns).
    bland_threshold: usize,
    art_start: usize,
    cols: Vec<Vec<(u32, f64)>>,
    rhs: Vec<f64>,
    cost_ph2: Vec<f64>,
    cost: Vec<f64>,
    /// Basis inverse, column-major: entry (r, c) at `binv[c*p + r]`.
    binv: Vec<f64>,
    basis: Vec<usize>,
    pos_in_basis: Vec<i32>,
    x_b: Vec<f64>,
    d: Vec<f64>,
    /// Devex reference weights; pricing picks the best d²/weight column,
    /// which resists the zigzagging Dantzig suffers on degenerate faces.
    devex: Vec<f64>,
    bland: bool,
    degenerate_streak: usize,
    pivots: usize,
    scratch_alpha: Vec<f64>,
    scratch_rho: Vec<f64>,
}

impl Solver {
    fn new(sf: &StandardForm) -> Self {
        let p = sf.n_rows;
        // Crash basis, one unit-ish column per row: the +1 slack where one
        // exists, else a positive singleton structural column (the hinge
        // slacks of the MSVM programs land here), else an artificial. The
        // initial basis matrix is diagonal and the basic values nonnegative.
        let mut cols = sf.cols.clone();
        let mut cost_ph2 = sf.cost.clone();
        let art_start = sf.n_cols;
        let mut picked: Vec<Option<usize>> = sf.slack_basic.clone();
        let mut taken = vec![false; sf.n_cols];
        for i in 0..p {
            if let Some(c) = picked[i] {
                taken[c] = true;
            }
        }
        for (c, col) in cols.iter().enumerate() {
            if taken[c] || col.len() != 1 {
                continue;
            }
            let (row, v) = col[0];
            let r = row as usize;
            if v > PIVOT_TOL && picked[r].is_none() {
                picked[r] = Some(c);
                taken[c] = true;
            }
        }
        let mut basis = Vec::with_capacity(p);
        for (i, slot) in picked.iter().enumerate() {
            match slot {
                Some(c) => basis.push(*c),
                None => {
                    cols.push(vec![(i as u32, 1.0)]);
                    cost_ph2.push(0.0);
                    basis.push(cols.len() - 1);
                }
            }
        }
        let n_total = cols.len();
        // Normalize the cost vector: reduced-cost tolerances are absolute,
        // and raw penalty weights can reach 1e8 and beyond.
        let cost_scale = cost_ph2.iter().fold(1.0f64, |a, c| a.max(c.abs()));
        cost_ph2.iter_mut().for_each(|c| *c /= cost_scale);
        let mut pos_in_basis = vec![-1i32; n_total];
        for (r, &c) in basis.iter().enumerate() {
            pos_in_basis[c] = r as i32;
        }
        // The crash basis is diagonal: invert the singleton coefficients.
        let mut binv = vec![0.0; p * p];
        let mut x_b = sf.rhs.clone();
        for i in 0..p {
            let v = cols[basis[i]][0].1;
            binv[i * p + i] = 1.0 / v;
            x_b[i] /= v;
        }
        Solver {
            p,
            n_total,
            bland_threshold: 3 * (p + sf.n_cols - sf.n_slack - sf.n_split),
            art_start,
            x_b,
            rhs: sf.rhs.clone(),
            cost: vec![0.0; n_total],
            cost_ph2,
            cols,
            binv,
            basis,
            pos_in_basis,
            d: vec![0.0; n_total],
            devex: vec![1.0; n_total],
            bland: false,
            degenerate_streak: 0,
            pivots: 0,
            scratch_alpha: vec![0.0; p],
            scratch_rho: vec![0.0; p],
        }
    }

    fn is_artificial(&self, col: usize) -> bool {
        col >= self.art_start
    }

    fn set_phase(&mut self, phase: &Phase) {
        match phase {
            Phase::One => {
                for j in 0..self.n_total {
                    self.cost[j] = if self.is_artificial(j) { 1.0 } else { 0.0 };
                }
            }
            Phase::Two => self.cost.copy_from_slice(&self.cost_ph2),
        }
        self.devex.iter_mut().for_each(|g| *g = 1.0);
        self.refresh();
    }

    /// Recompute basic values and reduced costs from the current inverse.
    fn refresh(&mut self) {
        let p = self.p;
        // x_b = B^-1 rhs, accumulated column by column.
        self.x_b.iter_mut().for_each(|v| *v = 0.0);
        for c in 0..p {
            let w = self.rhs[c];
            if w != 0.0 {
                let col = &self.binv[c * p..(c + 1) * p];
                for i in 0..p {
                    self.x_b[i] += w * col[i];
                }
            }
        }
        // y = c_B' B^-1, then d = c - y'A.
        let c_b: Vec<f64> = self.basis.iter().map(|&c| self.cost[c]).collect();
        let mut y = vec![0.0; p];
        for c in 0..p {
            let col = &self.binv[c * p..(c + 1) * p];
            y[c] = c_b.iter().zip(col).map(|(a, b)| a * b).sum();
        }
        for j in 0..self.n_total {
            let dot: f64 = self.cols[j].iter().map(|&(r, v)| y[r as usize] * v).sum();
            self.d[j] = self.cost[j] - dot;
        }
        for &c in &self.basis {
            self.d[c] = 0.0;
        }
    }

    fn objective_value(&self) -> f64 {
        self.basis
            .iter()
            .zip(&self.x_b)
            .map(|(&c, &v)| self.cost[c] * v)
            .sum()
    }

    /// alpha = B^-1 a_q into the scratch buffer.
    fn ftran(&mut self, q: usize) {
        let p = self.p;
        self.scratch_alpha.iter_mut().for_each(|v| *v = 0.0);
        for &(r, v) in &self.cols[q] {
            let col = &self.binv[r as usize * p..(r as usize + 1) * p];
            for i in 0..p {
                self.scratch_alpha[i] += v * col[i];
            }
        }
    }

    /// Row `r` of B^-1 into the scratch buffer.
    fn extract_row(&mut self, r: usize) {
        let p = self.p;
        for c in 0..p {
            self.scratch_rho[c] = self.binv[c * p + r];
        }
    }

    fn choose_entering(&self) -> Option<usize> {
        if self.bland {
            return (0..self.n_total).find(|&j| {
                self.pos_in_basis[j] < 0
                    && !self.is_artificial(j)
                    && self.d[j] < -REDUCED_COST_TOL
            });
        }
        let mut best = None;
        let mut best_score = 0.0;
        for j in 0..self.n_total {
            if self.pos_in_basis[j] >= 0 || self.is_artificial(j) {
                continue;
            }
            let dj = self.d[j];
            if dj < -REDUCED_COST_TOL {
                let score = dj * dj / self.devex[j];
                if score > best_score {
                    best_score = score;
                    best = Some(j);
                }
            }
        }
        best
    }

    /// Ratio test on the current `scratch_alpha`. Returns the leaving row,
    /// or `None` when the direction is unbounded.
    ///
    /// Normally a two-pass test with a small feasibility slack: pass one
    /// bounds the step by `(x_r + δ)/α_r`, pass two picks the largest
    /// pivot among rows whose exact ratio fits the bound. The slack keeps
    /// highly degenerate vertices from forcing tiny pivots. In Bland mode
    /// the test is exact with smallest-index tie-breaking, which is what
    /// the anti-cycling guarantee needs. Rows whose basic variable is an
    /// artificial pinned at zero may pivot on a negative element so
    /// artificials can never grow back above zero.
    fn choose_leaving(&self) -> Option<usize> {
        const RATIO_SLACK: f64 = 1e-9;
        let alpha = &self.scratch_alpha;

        let guard_row = |r: usize| {
            alpha[r] < -PIVOT_TOL
                && self.is_artificial(self.basis[r])
                && self.x_b[r] <= FEAS_TOL
        };

        if self.bland {
            let mut theta = f64::INFINITY;
            let mut leave: Option<usize> = None;
            for r in 0..self.p {
                let ratio = if alpha[r] > PIVOT_TOL {
                    self.x_b[r].max(0.0) / alpha[r]
                } else if guard_row(r) {
                    0.0
                } else {
                    continue;
                };
                let better = ratio < theta - 1e-12
                    || (ratio <= theta + 1e-12
                        && leave.map_or(true, |cur| self.basis[r] < self.basis[cur]));
                if better {
                    theta = ratio.min(theta);
                    leave = Some(r);
                }
            }
            return leave;
        }

        let mut bound = f64::INFINITY;
        let mut found = false;
        for r in 0..self.p {
            if alpha[r] > PIVOT_TOL {
                bound = bound.min((self.x_b[r].max(0.0) + RATIO_SLACK) / alpha[r]);
                found = true;
            } else if guard_row(r) {
                bound = bound.min(RATIO_SLACK / alpha[r].abs());
                found = true;
            }
        }
        if !found {
            return None;
        }
        let mut leave: Option<usize> = None;
        let mut best_mag = 0.0;
        for r in 0..self.p {
            let fits = if alpha[r] > PIVOT_TOL {
                self.x_b[r].max(0.0) / alpha[r] <= bound
            } else {
                guard_row(r) && 0.0 <= bound
            };
            if fits && alpha[r].abs() > best_mag {
                best_mag = alpha[r].abs();
                leave = Some(r);
            }
        }
        leave
    }

    /// Pivot column `q` into row `r`. `scratch_alpha` must hold B^-1 a_q.
    fn pivot(&mut self, r: usize, q: usize) {
        let p = self.p;
        let alpha_r = self.scratch_alpha[r];
        debug_assert!(alpha_r.abs() > PIVOT_TOL * 0.5);

        self.extract_row(r);

        // Reduced-cost and Devex-weight updates from the old tableau row.
        let d_q = self.d[q];
        let scale = d_q / alpha_r;
        let gamma_q = self.devex[q].max(1.0);
        let inv_sq = 1.0 / (alpha_r * alpha_r);
        for j in 0..self.n_total {
            if j == q {
                continue;
            }
            let t: f64 = self.cols[j]
                .iter()
                .map(|&(row, v)| self.scratch_rho[row as usize] * v)
                .sum();
            if t != 0.0 {
                self.d[j] -= scale * t;
                let cand = t * t * inv_sq * gamma_q;
                if cand > self.devex[j] {
                    self.devex[j] = cand;
                }
            }
        }

        // Rank-one update of the inverse, column by column.
        for c in 0..p {
            let rho_c = self.scratch_rho[c];
            if rho_c == 0.0 {
                continue;
            }
            let t = rho_c / alpha_r;
            let col = &mut self.binv[c * p..(c + 1) * p];
            for (ci, ai) in col.iter_mut().zip(&self.scratch_alpha) {
                *ci -= ai * t;
            }
            col[r] = t;
        }

        // Basic value update.
        let theta = (self.x_b[r] / alpha_r).max(0.0);
        for (xi, ai) in self.x_b.iter_mut().zip(&self.scratch_alpha) {
            *xi -= theta * ai;
        }
        self.x_b[r] = theta;

        let leaving = self.basis[r];
        self.pos_in_basis[leaving] = -1;
        self.basis[r] = q;
        self.pos_in_basis[q] = r as i32;
        self.d[q] = 0.0;
        self.devex[leaving] = (gamma_q * inv_sq).max(1.0);

        // A pivot counts as degenerate unless it moved the objective; long
        // degenerate runs switch to Bland's rule until real progress.
        let improvement = -d_q * theta;
        if improvement > DEGENERATE_STEP * (1.0 + self.objective_value().abs()) {
            self.degenerate_streak = 0;
            self.bland = false;
        } else {
            self.degenerate_streak += 1;
            if self.degenerate_streak > self.bland_threshold {
                self.bland = true;
            }
        }
        self.pivots += 1;
    }

    /// Rebuild the inverse from the basis columns. Returns false when the
    /// basis matrix is numerically singular.
    fn reinvert(&mut self) -> bool {
        let p = self.p;
        let mut m = vec![0.0; p * p]; // row-major working copy of B
        for (r, &c) in self.basis.iter().enumerate() {
            let _ = r;
            for &(row, v) in &self.cols[c] {
                m[row as usize * p + r] = v;
            }
        }
        let mut inv = vec![0.0; p * p]; // row-major inverse
        for i in 0..p {
            inv[i * p + i] = 1.0;
        }
        for k in 0..p {
            let mut piv = k;
            let mut best = m[k * p + k].abs();
            for i in k + 1..p {
                let v = m[i * p + k].abs();
                if v > best {
                    best = v;
                    piv = i;
                }
            }
            if best <= PIVOT_TOL {
                return false;
            }
            if piv != k {
                for j in 0..p {
                    m.swap(k * p + j, piv * p + j);
                    inv.swap(k * p + j, piv * p + j);
                }
            }
            let diag = m[k * p + k];
            for j in 0..p {
                m[k * p + j] /= diag;
                inv[k * p + j] /= diag;
            }
            for i in 0..p {
                if i == k {
                    continue;
                }
                let f = m[i * p + k];
                if f != 0.0 {
                    for j in 0..p {
                        m[i * p + j] -= f * m[k * p + j];
                        inv[i * p + j] -= f * inv[k * p + j];
                    }
                }
            }
        }
        for r in 0..p {
            for c in 0..p {
                self.binv[c * p + r] = inv[r * p + c];
            }
        }
        true
    }

    /// Iterate the current phase to optimality. Returns `None` on success,
    /// or a terminal status. Both termination claims are re-verified
    /// against freshly recomputed reduced costs (and, for unboundedness, a
    /// rebuilt inverse) so incremental drift can never end a solve.
    fn iterate(&mut self, limit: usize) -> Option<LpStatus> {
        let debug = std::env::var_os("MSVM_LP_DEBUG").is_some();
        let mut since_refresh = 0u64;
        let mut d_fresh = false;
        let mut binv_fresh = false;
        loop {
            let q = match self.choose_entering() {
                Some(q) => q,
                None => {
                    if d_fresh {
                        return None;
                    }
                    self.refresh();
                    d_fresh = true;
                    continue;
                }
            };
            if self.pivots >= limit {
                return Some(LpStatus::IterationLimit);
            }
            self.ftran(q);
            match self.choose_leaving() {
                Some(r) => {
                    self.pivot(r, q);
                    d_fresh = false;
                    binv_fresh = false;
                }
                None => {
                    if d_fresh && binv_fresh {
                        return Some(LpStatus::Unbounded);
                    }
                    if !self.reinvert() {
                        return Some(LpStatus::IterationLimit);
                    }
                    self.refresh();
                    d_fresh = true;
                    binv_fresh = true;
                    continue;
                }
            }
            if debug && self.pivots % 500 == 0 {
                eprintln!(
                    "pivot {}: obj={:.9} streak={} bland={}",
                    self.pivots,
                    self.objective_value(),
                    self.degenerate_streak,
                    self.bland
                );
            }
            since_refresh += 1;
            if since_refresh >= REFRESH_INTERVAL {
                self.refresh();
                since_refresh = 0;
            }
        }
    }

    /// Pivot zero-valued basic artificials out of the basis where a usable
    /// structural pivot exists; rows without one are redundant and keep the
    /// artificial pinned at zero.
    fn drive_out_artificials(&mut self) {
        for r in 0..self.p {
            if !self.is_artificial(self.basis[r]) {
                continue;
            }
            self.extract_row(r);
            let mut best: Option<(usize, f64)> = None;
            for j in 0..self.art_start {
                if self.pos_in_basis[j] >= 0 {
                    continue;
                }
                let t: f64 = self.cols[j]
                    .iter()
                    .map(|&(row, v)| self.scratch_rho[row as usize] * v)
                    .sum();
                if t.abs() > 1e-7 && best.map_or(true, |(_, b)| t.abs() > b) {
                    best = Some((j, t.abs()));
                }
            }
            if let Some((j, _)) = best {
                self.ftran(j);
                self.pivot(r, j);
            }
        }
    }

    fn run(&mut self, limit: usize) -> (LpStatus, usize) {
        // Phase 1: minimize the sum of artificials. With the crash basis the
        // initial objective is the rhs mass on artificial rows, often zero.
        self.set_phase(&Phase::One);
        if self.objective_value() > FEAS_TOL {
            match self.iterate(limit) {
                None => {}
                Some(LpStatus::Unbounded) => {
                    // Impossible in exact arithmetic; rebuild once and retry.
                    if !self.reinvert() {
                        return (LpStatus::IterationLimit, self.pivots);
                    }
                    self.refresh();
                    match self.iterate(limit) {
                        None => {}
                        Some(s) => return (coerce_phase1(s), self.pivots),
                    }
                }
                Some(s) => return (s, self.pivots),
            }
            self.refresh();
            if self.objective_value() > FEAS_TOL {
                return (LpStatus::Infeasible, self.pivots);
            }
        }
        self.drive_out_artificials();

        // Phase 2 with up to two recovery rebuilds on residual failure.
        self.set_phase(&Phase::Two);
        for attempt in 0..3 {
            match self.iterate(limit) {
                None => {}
                Some(s) => return (s, self.pivots),
            }
            self.refresh();
            if self.basic_residual() <= FEAS_TOL {
                return (LpStatus::Optimal, self.pivots);
            }
            if attempt < 2 && self.reinvert() {
                self.refresh();
                continue;
            }
            return (LpStatus::IterationLimit, self.pivots);
        }
        unreachable!()
    }

    /// Residual of the standardized system at the current basic solution.
    fn basic_residual(&self) -> f64 {
        let mut ax = vec![0.0; self.p];
        for (r, &c) in self.basis.iter().enumerate() {
            let v = self.x_b[r];
            if v != 0.0 {
                for &(row, a) in &self.cols[c] {
                    ax[row as usize] += a * v;
                }
            }
        }
        let mut worst = 0.0f64;
        for i in 0..self.p {
            worst = worst.max((ax[i] - self.rhs[i]).abs() / (1.0 + self.rhs[i].abs()));
        }
        let neg = self.x_b.iter().fold(0.0f64, |acc, &v| acc.max(-v));
        worst.max(neg)
    }

    fn extract(&self, n_cols: usize) -> Vec<f64> {
        let mut x = vec![0.0; n_cols];
        for (r, &c) in self.basis.iter().enumerate() {
            if c < n_cols {
                x[c] = self.x_b[r].max(0.0);
            }
        }
        x
    }
}

fn coerce_phase1(s: LpStatus) -> LpStatus {
    match s {
        LpStatus::Unbounded => LpStatus::IterationLimit,
        other => other,
    }
}
