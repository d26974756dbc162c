//! Replication harness for the simulation studies: shared per-replication
//! datasets, all requested methods fitted and tuned on the same splits,
//! aggregated into the summary and frequency tables.

use rayon::prelude::*;

use crate::basis::{expand_basis, BasisSpec};
use crate::error::Error;
use crate::l2base::{L2FitConfig, EPS_ZERO_DEFAULT};
use crate::metrics::{
    aggregate, evaluate_with_lambda, RepRecord, SelectionReport, SummaryRow,
};
use crate::penalty::{PenaltyKind, PenaltySpec};
use crate::select::{
    fit_adaptive_with_baseline, tune_on_holdout, LambdaGrid, TuneResult, Tuner,
};
use crate::simgen::{estimate_bayes_error, generate, truth_for_basis, DesignKind, SimDesign};
use crate::Result;

/// A method column of the study: one of the six penalties, or the Bayes
/// reference row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Penalty(PenaltyKind),
    Bayes,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Penalty(k) => k.name(),
            Method::Bayes => "bayes",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        if s == "bayes" {
            return Some(Method::Bayes);
        }
        PenaltyKind::parse(s).map(Method::Penalty)
    }

    /// The six penalties plus the Bayes row, in table order.
    pub fn all() -> Vec<Method> {
        vec![
            Method::Penalty(PenaltyKind::L2),
            Method::Penalty(PenaltyKind::L1),
            Method::Penalty(PenaltyKind::AdaptiveL1),
            Method::Penalty(PenaltyKind::SupNorm),
            Method::Penalty(PenaltyKind::AdaptiveSupI),
            Method::Penalty(PenaltyKind::AdaptiveSupII),
            Method::Bayes,
        ]
    }
}

/// Study configuration; defaults mirror the benchmark designs (five-class
/// n = 250, the others n = 200, nonlinear basis poly2).
#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub design: DesignKind,
    pub reps: usize,
    pub n_train: usize,
    pub n_tune: usize,
    pub n_test: usize,
    pub basis: BasisSpec,
    pub methods: Vec<Method>,
    pub grid: LambdaGrid,
    pub base_seed: u64,
    pub l2_config: L2FitConfig,
    /// Draws for the Bayes-row Monte-Carlo error estimate.
    pub bayes_mc: usize,
}

impl StudyConfig {
    pub fn for_design(design: DesignKind, reps: usize, base_seed: u64) -> Self {
        let n = match design {
            DesignKind::FiveClass => 250,
            _ => 200,
        };
        StudyConfig {
            design,
            reps,
            n_train: n,
            n_tune: n,
            n_test: 10_000,
            basis: design.default_basis(),
            methods: Method::all(),
            grid: LambdaGrid::standard(),
            base_seed,
            l2_config: L2FitConfig::default(),
            bayes_mc: 50_000,
        }
    }
}

/// Everything a finished study reports.
#[derive(Debug, Clone)]
pub struct StudyResult {
    /// Per requested penalty method: aggregate report and raw records in
    /// replication order.
    pub per_method: Vec<(Method, SelectionReport, Vec<RepRecord>)>,
    /// Monte-Carlo Bayes error and its standard error, when requested.
    pub bayes: Option<(f64, f64)>,
    /// Truth pattern in the study's model space.
    pub truth_cz: usize,
    pub truth_ms: usize,
    pub feature_names: Vec<String>,
}

fn penalty_methods(methods: &[Method]) -> Vec<PenaltyKind> {
    methods
        .iter()
        .filter_map(|m| match m {
            Method::Penalty(k) => Some(*k),
            Method::Bayes => None,
        })
        .collect()
}

/// Fit and tune every requested method on one replication's splits.
fn run_one_rep(
    cfg: &StudyConfig,
    rep: usize,
) -> Result<Vec<(PenaltyKind, RepRecord)>> {
    let design = SimDesign {
        kind: cfg.design,
        n_train: cfg.n_train,
        n_tune: cfg.n_tune,
        n_test: cfg.n_test,
        seed: cfg.base_seed.wrapping_add(rep as u64),
    };
    let (train_raw, tune_raw, test_raw, _) = generate(&design)?;
    let train = expand_basis(&train_raw, cfg.basis)?;
    let tune = expand_basis(&tune_raw, cfg.basis)?;
    let test = expand_basis(&test_raw, cfg.basis)?;
    let truth = truth_for_basis(cfg.design, cfg.basis)?;

    let kinds = penalty_methods(&cfg.methods);
    let needs_baseline = kinds.iter().any(|k| k.is_adaptive());
    let wants_l2 = kinds.contains(&PenaltyKind::L2);

    // One tuned baseline per replication, shared by the L2 row and all
    // adaptive stages.
    let l2_stage: Option<TuneResult> = if needs_baseline || wants_l2 {
        Some(tune_on_holdout(
            &train,
            &tune,
            &PenaltySpec::L2,
            &cfg.grid,
            &cfg.l2_config,
        )?)
    } else {
        None
    };

    let mut out = Vec::with_capacity(kinds.len());
    for kind in kinds {
        let tuned: TuneResult = match kind {
            PenaltyKind::L2 => l2_stage.clone().expect("baseline computed"),
            PenaltyKind::L1 => {
                tune_on_holdout(&train, &tune, &PenaltySpec::L1, &cfg.grid, &cfg.l2_config)?
            }
            PenaltyKind::SupNorm => {
                tune_on_holdout(&train, &tune, &PenaltySpec::SupNorm, &cfg.grid, &cfg.l2_config)?
            }
            adaptive => {
                fit_adaptive_with_baseline(
                    &train,
                    Tuner::Holdout(&tune),
                    adaptive,
                    &cfg.grid,
                    &cfg.l2_config,
                    EPS_ZERO_DEFAULT,
                    l2_stage.clone().expect("baseline computed"),
                )?
                .final_stage
            }
        };
        let record =
            evaluate_with_lambda(&tuned.final_model, &test, &truth, tuned.chosen_lambda)?;
        out.push((kind, record));
    }
    Ok(out)
}

/// Run the full study: `reps` replications on seeds `base_seed + r`,
/// replications in parallel, deterministic aggregation order.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyResult> {
    if cfg.reps == 0 {
        return Err(Error::InvalidInput("need at least one replication".into()));
    }
    let rep_results: Result<Vec<Vec<(PenaltyKind, RepRecord)>>> =
        (0..cfg.reps).into_par_iter().map(|r| run_one_rep(cfg, r)).collect();
    let rep_results = rep_results?;

    let kinds = penalty_methods(&cfg.methods);
    let mut per_method = Vec::with_capacity(kinds.len());
    for (idx, kind) in kinds.iter().enumerate() {
        let records: Vec<RepRecord> = rep_results
            .iter()
            .map(|rep| {
                debug_assert_eq!(rep[idx].0, *kind);
                rep[idx].1.clone()
            })
            .collect();
        let report = aggregate(&records)?;
        per_method.push((Method::Penalty(*kind), report, records));
    }

    let bayes = if cfg.methods.contains(&Method::Bayes) {
        Some(estimate_bayes_error(
            cfg.design,
            cfg.bayes_mc,
            cfg.base_seed,
        )?)
    } else {
        None
    };

    let truth = truth_for_basis(cfg.design, cfg.basis)?;
    // The frequency table needs the expanded column names; expand one row.
    let probe = generate(&SimDesign {
        kind: cfg.design,
        n_train: minimal_split(cfg.design),
        n_tune: minimal_split(cfg.design),
        n_test: minimal_split(cfg.design),
        seed: cfg.base_seed,
    })?;
    let feature_names = expand_basis(&probe.0, cfg.basis)?.names().to_vec();

    Ok(StudyResult {
        per_method,
        bayes,
        truth_cz: truth.true_zero_pattern.count_true(),
        truth_ms: truth.relevant_vars.len(),
        feature_names,
    })
}

fn minimal_split(design: DesignKind) -> usize {
    match design {
        DesignKind::FiveClass => 5,
        _ => 1,
    }
}

/// Shape the study result into summary rows, appending the Bayes reference
/// row when present.
pub fn summary_rows(result: &StudyResult, reps: usize) -> Vec<SummaryRow> {
    let mut rows: Vec<SummaryRow> = result
        .per_method
        .iter()
        .map(|(m, rep, _)| SummaryRow::from_report(m.name(), rep))
        .collect();
    if let Some((err, se)) = result.bayes {
        rows.push(SummaryRow {
            method: "bayes".into(),
            te_mean: err,
            te_sd: None,
            te_se: Some(se),
            cz: result.truth_cz as f64,
            iz: 0.0,
            ms: result.truth_ms as f64,
            cm: reps,
        });
    }
    rows
}

/// Frequency-table rows (method name, per-variable counts).
pub fn frequency_rows(result: &StudyResult) -> Vec<(String, Vec<usize>)> {
    result
        .per_method
        .iter()
        .map(|(m, rep, _)| (m.name().to_string(), rep.selection_frequency.clone()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiny_study_is_deterministic() {
        let mut cfg = StudyConfig::for_design(DesignKind::NonlinearThreeClass, 2, 7);
        cfg.n_train = 30;
        cfg.n_tune = 30;
        cfg.n_test = 60;
        cfg.methods = vec![Method::Penalty(PenaltyKind::SupNorm), Method::Bayes];
        cfg.grid = LambdaGrid::from_exponents(vec![-4, 0, 4]).unwrap();
        cfg.bayes_mc = 2000;

        let a = run_study(&cfg).unwrap();
        let b = run_study(&cfg).unwrap();
        let (_, rep_a, recs_a) = &a.per_method[0];
        let (_, rep_b, recs_b) = &b.per_method[0];
        assert_eq!(rep_a.test_error_mean, rep_b.test_error_mean);
        assert_eq!(rep_a.selection_frequency, rep_b.selection_frequency);
        assert_eq!(recs_a.len(), recs_b.len());
        for (x, y) in recs_a.iter().zip(recs_b) {
            assert_eq!(x.test_error, y.test_error);
            assert_eq!(x.chosen_lambda, y.chosen_lambda);
        }
        assert_eq!(a.bayes, b.bayes);
    }

    #[test]
    fn summary_includes_bayes_row() {
        let mut cfg = StudyConfig::for_design(DesignKind::FourClassLinear, 1, 3);
        cfg.n_train = 24;
        cfg.n_tune = 24;
        cfg.n_test = 40;
        cfg.methods = vec![Method::Penalty(PenaltyKind::L1), Method::Bayes];
        cfg.grid = LambdaGrid::from_exponents(vec![0]).unwrap();
        cfg.bayes_mc = 2000;
        let result = run_study(&cfg).unwrap();
        let rows = summary_rows(&result, cfg.reps);
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].method, "bayes");
        assert_eq!(rows[1].cz, 32.0);
        assert_eq!(rows[1].ms, 4.0);
        // The Monte-Carlo estimate should be in the vicinity of 0.1366.
        assert!((rows[1].te_mean - 0.1366).abs() < 0.03);
    }
}
