//! The plain-text model format.
//!
//! Line layout (all values space-separated unless noted):
//!
//! ```text
//! msvm-model v1
//! k_classes <K>
//! d_vars <d>
//! lambda <float>
//! penalty <name>
//! names <comma-separated variable names>
//! b <K floats>
//! w <d floats>        (repeated K times, one line per class row)
//! ```
//!
//! Floats are written with full round-trip precision.

use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use msvm_core::mat::Mat;
use msvm_core::CoefModel;

pub struct ModelFile {
    pub model: CoefModel,
    pub lambda: f64,
    pub penalty: String,
    pub names: Vec<String>,
}

pub fn write_model(path: &Path, mf: &ModelFile) -> Result<()> {
    let mut out = std::fs::File::create(path)
        .with_context(|| format!("creating {}", path.display()))?;
    let k = mf.model.k_classes();
    let d = mf.model.d_vars();
    writeln!(out, "msvm-model v1")?;
    writeln!(out, "k_classes {k}")?;
    writeln!(out, "d_vars {d}")?;
    writeln!(out, "lambda {:?}", mf.lambda)?;
    writeln!(out, "penalty {}", mf.penalty)?;
    writeln!(out, "names {}", mf.names.join(","))?;
    let join = |vals: &[f64]| {
        vals.iter()
            .map(|v| format!("{v:?}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    writeln!(out, "b {}", join(mf.model.b()))?;
    for kk in 0..k {
        writeln!(out, "w {}", join(mf.model.w().row(kk)))?;
    }
    Ok(())
}

pub fn read_model(path: &Path) -> Result<ModelFile> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if header != "msvm-model v1" {
        bail!("{}: not a v1 model file", path.display());
    }
    let mut field = |prefix: &str| -> Result<String> {
        let line = lines
            .next()
            .with_context(|| format!("{}: truncated model file", path.display()))?;
        let rest = line
            .strip_prefix(prefix)
            .with_context(|| format!("{}: expected '{prefix}...' line", path.display()))?;
        Ok(rest.trim().to_string())
    };
    let k: usize = field("k_classes ")?.parse().context("bad k_classes")?;
    let d: usize = field("d_vars ")?.parse().context("bad d_vars")?;
    let lambda: f64 = field("lambda ")?.parse().context("bad lambda")?;
    let penalty = field("penalty ")?;
    let names_raw = field("names ")?;
    let names: Vec<String> = if names_raw.is_empty() {
        vec![]
    } else {
        names_raw.split(',').map(|s| s.to_string()).collect()
    };
    let parse_floats = |s: &str, expect: usize, what: &str| -> Result<Vec<f64>> {
        let vals: Vec<f64> = s
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .with_context(|| format!("bad {what} values"))?;
        if vals.len() != expect {
            bail!("expected {expect} {what} values, got {}", vals.len());
        }
        Ok(vals)
    };
    let b = parse_floats(&field("b ")?, k, "b")?;
    let mut w = Mat::zeros(k, d);
    for kk in 0..k {
        let row = parse_floats(&field("w ")?, d, "w")?;
        w.row_mut(kk).copy_from_slice(&row);
    }
    let model = CoefModel::new(w, b).context("model violates its invariants")?;
    if !names.is_empty() && names.len() != d {
        bail!("model lists {} names for {d} variables", names.len());
    }
    Ok(ModelFile {
        model,
        lambda,
        penalty,
        names,
    })
}
