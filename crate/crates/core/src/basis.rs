//! Polynomial basis expansion: all monomials of total degree 1..=degree in
//! the input variables, in graded lexicographic order. The intercept is not
//! a column — it lives in the model's `b`.

use crate::dataset::Dataset;
use crate::error::Error;
use crate::mat::Mat;
use crate::Result;

/// Degree and cross-product choice for the polynomial expansion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BasisSpec {
    /// Total degree, in `{1, 2, 3}`.
    pub degree: u32,
    /// Include cross-product monomials (`x1*x2`, ...). With `false`, only
    /// pure powers `xj^t` are generated.
    pub include_cross: bool,
}

impl BasisSpec {
    pub fn linear() -> Self {
        BasisSpec {
            degree: 1,
            include_cross: false,
        }
    }

    pub fn poly(degree: u32) -> Self {
        BasisSpec {
            degree,
            include_cross: true,
        }
    }
}

/// A monomial as a sorted list of variable indices (repeats = powers).
/// Graded lex order: by length, then lexicographically.
fn monomials(d: usize, degree: u32, include_cross: bool) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for deg in 1..=degree as usize {
        let mut stack: Vec<Vec<usize>> = vec![vec![]];
        for _ in 0..deg {
            let mut next = Vec::new();
            for m in &stack {
                let start = m.last().copied().unwrap_or(0);
                for j in start..d {
                    let mut ext = m.clone();
                    ext.push(j);
                    next.push(ext);
                }
            }
            stack = next;
        }
        if !include_cross {
            stack.retain(|m| m.iter().all(|&j| j == m[0]));
        }
        out.extend(stack);
    }
    out
}

fn monomial_name(m: &[usize], names: &[String]) -> String {
    // Group repeated indices into powers: x1^2*x2.
    let mut parts: Vec<String> = Vec::new();
    let mut i = 0;
    while i < m.len() {
        let j = m[i];
        let mut pow = 1;
        while i + pow < m.len() && m[i + pow] == j {
            pow += 1;
        }
        if pow == 1 {
            parts.push(names[j].clone());
        } else {
            parts.push(format!("{}^{}", names[j], pow));
        }
        i += pow;
    }
    parts.join("*")
}

/// Number of columns the expansion produces. With cross products this is
/// `C(d+degree, degree) - 1`.
pub fn expanded_count(d: usize, spec: BasisSpec) -> Result<usize> {
    if !(1..=3).contains(&spec.degree) {
        return Err(Error::UnsupportedDegree(spec.degree));
    }
    Ok(monomials(d, spec.degree, spec.include_cross).len())
}

/// Expand every row of `data` into the monomial columns. Labels are kept;
/// column names follow the `x1`, `x1^2`, `x1*x2` scheme built from the
/// input names.
pub fn expand_basis(data: &Dataset, spec: BasisSpec) -> Result<Dataset> {
    if !(1..=3).contains(&spec.degree) {
        return Err(Error::UnsupportedDegree(spec.degree));
    }
    let mons = monomials(data.d(), spec.degree, spec.include_cross);
    let names: Vec<String> = mons.iter().map(|m| monomial_name(m, data.names())).collect();
    let n = data.n();
    let mut out = Mat::zeros(n, mons.len());
    for i in 0..n {
        let x = data.row(i);
        let row = out.row_mut(i);
        for (c, m) in mons.iter().enumerate() {
            row[c] = m.iter().map(|&j| x[j]).product();
        }
    }
    Dataset::new(out, data.labels().to_vec(), data.k_classes(), names)
}
