//! Shared test support: an independent brute-force LP oracle and random
//! problem generators. Everything here reimplements the math from scratch
//! so it cannot inherit a bug from the solver under test.
//!
//! Each integration-test binary pulls in the subset it needs.
#![allow(dead_code)]

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use msvm_core::mat::Mat;
use msvm_core::simplex::{LinearProgram, Sense, VarBound};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleStatus {
    Optimal(f64),
    Infeasible,
    Unbounded,
}

/// Solve a p×p dense system by Gaussian elimination with partial pivoting.
fn solve_square(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().cloned().collect();
    let mut rhs = b.to_vec();
    for k in 0..n {
        let mut piv = k;
        for i in k + 1..n {
            if m[i][k].abs() > m[piv][k].abs() {
                piv = i;
            }
        }
        if m[piv][k].abs() <= 1e-10 {
            return None;
        }
        m.swap(k, piv);
        rhs.swap(k, piv);
        for i in k + 1..n {
            let f = m[i][k] / m[k][k];
            if f != 0.0 {
                for j in k..n {
                    m[i][j] -= f * m[k][j];
                }
                rhs[i] -= f * rhs[k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let mut v = rhs[k];
        for j in k + 1..n {
            v -= m[k][j] * x[j];
        }
        x[k] = v / m[k][k];
    }
    Some(x)
}

/// Exhaustive basic-feasible-solution enumeration with an extreme-ray scan
/// for unboundedness. Independent of the solver: it standardizes the LP
/// itself (slack per inequality, sign-split per free variable).
pub fn oracle_solve(lp: &LinearProgram) -> OracleStatus {
    let m0 = lp.n_cols();

    // Vacuous rows (no coefficients) cannot enter a basis; decide them
    // directly and enumerate over the rest.
    let mut rows: Vec<usize> = Vec::new();
    for i in 0..lp.n_rows() {
        if lp.a.row(i).iter().all(|&v| v == 0.0) {
            let ok = match lp.senses[i] {
                Sense::Le => lp.rhs[i] >= -1e-12,
                Sense::Ge => lp.rhs[i] <= 1e-12,
                Sense::Eq => lp.rhs[i].abs() <= 1e-12,
            };
            if !ok {
                return OracleStatus::Infeasible;
            }
        } else {
            rows.push(i);
        }
    }
    let p = rows.len();
    if p == 0 {
        // Only vacuous rows: x = 0 is feasible; any negative cost on a
        // nonnegative variable (or nonzero cost on a free one) is a ray.
        let free_ray = (0..m0).any(|j| {
            (lp.lower[j] == VarBound::Free && lp.costs[j] != 0.0) || lp.costs[j] < 0.0
        });
        return if free_ray {
            OracleStatus::Unbounded
        } else {
            OracleStatus::Optimal(0.0)
        };
    }
    let rhs: Vec<f64> = rows.iter().map(|&i| lp.rhs[i]).collect();

    // Equality standard form: columns of A_eq plus costs.
    let mut cols: Vec<Vec<f64>> = Vec::new();
    let mut costs: Vec<f64> = Vec::new();
    for j in 0..m0 {
        cols.push(rows.iter().map(|&i| lp.a.get(i, j)).collect());
        costs.push(lp.costs[j]);
    }
    for j in 0..m0 {
        if lp.lower[j] == VarBound::Free {
            cols.push(rows.iter().map(|&i| -lp.a.get(i, j)).collect());
            costs.push(-lp.costs[j]);
        }
    }
    for (pos, &i) in rows.iter().enumerate() {
        let coef = match lp.senses[i] {
            Sense::Le => 1.0,
            Sense::Ge => -1.0,
            Sense::Eq => continue,
        };
        let mut col = vec![0.0; p];
        col[pos] = coef;
        cols.push(col);
        costs.push(0.0);
    }
    let n = cols.len();

    // Row-reduce [A | b]: dependent consistent rows are dropped so that
    // every surviving row can enter a nonsingular basis; a dependent row
    // with a nonzero residual proves infeasibility outright.
    let mut aug: Vec<Vec<f64>> = (0..p)
        .map(|r| {
            let mut row: Vec<f64> = cols.iter().map(|c| c[r]).collect();
            row.push(rhs[r]);
            row
        })
        .collect();
    let mut rank = 0usize;
    for col in 0..n {
        let piv = (rank..p).max_by(|&a, &b| {
            aug[a][col]
                .abs()
                .partial_cmp(&aug[b][col].abs())
                .unwrap()
        });
        let Some(piv) = piv else { break };
        if aug[piv][col].abs() <= 1e-9 {
            continue;
        }
        aug.swap(rank, piv);
        for i in rank + 1..p {
            let f = aug[i][col] / aug[rank][col];
            if f != 0.0 {
                for j in col..=n {
                    aug[i][j] -= f * aug[rank][j];
                }
            }
        }
        rank += 1;
        if rank == p {
            break;
        }
    }
    for row in aug.iter().take(p).skip(rank) {
        if row[n].abs() > 1e-7 {
            return OracleStatus::Infeasible;
        }
    }
    let p = rank;
    if p == 0 {
        // No effective constraints: any negative standardized cost is a ray.
        return if costs.iter().any(|&c| c < -1e-12) {
            OracleStatus::Unbounded
        } else {
            OracleStatus::Optimal(0.0)
        };
    }
    if n < p {
        return OracleStatus::Infeasible;
    }
    let cols: Vec<Vec<f64>> = (0..n)
        .map(|c| (0..p).map(|r| aug[r][c]).collect())
        .collect();
    let rhs: Vec<f64> = (0..p).map(|r| aug[r][n]).collect();

    let mut best: Option<f64> = None;
    let mut unbounded = false;

    // Iterate all C(n, p) bases.
    let mut idx: Vec<usize> = (0..p).collect();
    loop {
        let bmat: Vec<Vec<f64>> = (0..p)
            .map(|r| idx.iter().map(|&c| cols[c][r]).collect())
            .collect();
        if let Some(xb) = solve_square(&bmat, &rhs) {
            if xb.iter().all(|&v| v >= -1e-9) {
                let obj: f64 = idx.iter().zip(&xb).map(|(&c, &v)| costs[c] * v).sum();
                if best.map_or(true, |b| obj < b) {
                    best = Some(obj);
                }
                // Extreme-ray check: an improving direction with no
                // blocking row proves unboundedness.
                let cb: Vec<f64> = idx.iter().map(|&c| costs[c]).collect();
                let bt: Vec<Vec<f64>> = (0..p)
                    .map(|r| (0..p).map(|c| bmat[c][r]).collect())
                    .collect();
                if let Some(y) = solve_square(&bt, &cb) {
                    for q in 0..n {
                        if idx.contains(&q) {
                            continue;
                        }
                        let d = costs[q]
                            - y.iter().zip(&cols[q]).map(|(a, b)| a * b).sum::<f64>();
                        if d < -1e-7 {
                            if let Some(alpha) = solve_square(&bmat, &cols[q]) {
                                if alpha.iter().all(|&v| v <= 1e-9) {
                                    unbounded = true;
                                }
                            }
                        }
                    }
                }
            }
        }
        if !next_combination(&mut idx, n) {
            break;
        }
    }
    finish(best, unbounded)
}

/// Advance `idx` to the next p-subset of `0..n` in lexicographic order.
fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let p = idx.len();
    let mut i = p;
    while i > 0 {
        i -= 1;
        if idx[i] < n - p + i {
            idx[i] += 1;
            for j in i + 1..p {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn finish(best: Option<f64>, unbounded: bool) -> OracleStatus {
    if unbounded {
        OracleStatus::Unbounded
    } else {
        match best {
            Some(obj) => OracleStatus::Optimal(obj),
            None => OracleStatus::Infeasible,
        }
    }
}

/// Random small LP. Sizes are kept modest so the enumeration oracle stays
/// cheap: at most 8 original variables and 8 rows, with the standardized
/// column count capped at 13. Half the draws anchor the right-hand sides
/// at a known nonnegative point so feasible problems are well represented;
/// the rest are fully random, which yields infeasible and unbounded cases.
pub fn random_lp(rng: &mut ChaCha8Rng) -> LinearProgram {
    loop {
        let p = rng.gen_range(1..=8usize);
        let m0 = rng.gen_range(1..=8usize);
        let mut a = Mat::zeros(p, m0);
        for i in 0..p {
            loop {
                for j in 0..m0 {
                    a.set(
                        i,
                        j,
                        if rng.gen_bool(0.75) {
                            rng.gen_range(-3.0..3.0)
                        } else {
                            0.0
                        },
                    );
                }
                if a.row(i).iter().any(|&v| v != 0.0) {
                    break;
                }
            }
        }
        let costs: Vec<f64> = (0..m0).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let senses: Vec<Sense> = (0..p)
            .map(|_| match rng.gen_range(0..3) {
                0 => Sense::Le,
                1 => Sense::Ge,
                _ => Sense::Eq,
            })
            .collect();
        let lower: Vec<VarBound> = (0..m0)
            .map(|_| {
                if rng.gen_bool(0.2) {
                    VarBound::Free
                } else {
                    VarBound::NonNeg
                }
            })
            .collect();

        let anchored = rng.gen_bool(0.5);
        let rhs: Vec<f64> = if anchored {
            let x_star: Vec<f64> = (0..m0)
                .map(|j| {
                    if lower[j] == VarBound::Free {
                        rng.gen_range(-1.5..1.5)
                    } else {
                        rng.gen_range(0.0..1.5)
                    }
                })
                .collect();
            (0..p)
                .map(|i| {
                    let ax: f64 = (0..m0).map(|j| a.get(i, j) * x_star[j]).sum();
                    match senses[i] {
                        Sense::Le => ax + rng.gen_range(0.0..2.0),
                        Sense::Ge => ax - rng.gen_range(0.0..2.0),
                        Sense::Eq => ax,
                    }
                })
                .collect()
        } else {
            (0..p).map(|_| rng.gen_range(-4.0..4.0)).collect()
        };

        let n_free = lower.iter().filter(|b| **b == VarBound::Free).count();
        let n_ineq = senses.iter().filter(|s| !matches!(s, Sense::Eq)).count();
        let n_std = m0 + n_free + n_ineq;
        if n_std < p || n_std > 13 {
            continue;
        }
        return LinearProgram::new(costs, a, senses, rhs, lower).unwrap();
    }
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random small classification dataset with well-spread features.
pub fn random_dataset(
    rng: &mut ChaCha8Rng,
    n: usize,
    d: usize,
    k: usize,
) -> msvm_core::Dataset {
    let feats: Vec<f64> = (0..n * d).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let mut labels: Vec<usize> = (0..n).map(|i| (i % k) + 1).collect();
    // Shuffle labels deterministically so classes are not row-blocked.
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        labels.swap(i, j);
    }
    msvm_core::Dataset::new(Mat::from_rows(n, d, feats), labels, k, vec![]).unwrap()
}
