//! `msvm` — batch front end: train/predict on CSV data, run the simulation
//! studies, and run the gene screening pipeline.
//!
//! Exit codes: 0 success, 1 solver or runtime failure, 2 usage errors
//! (bad flags, malformed input files).

mod model_file;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use msvm_core::basis::BasisSpec;
use msvm_core::error::Error as CoreError;
use msvm_core::genes::{self, ExpressionMatrix, ScreenGroup};
use msvm_core::l2base::{fit_l2, L2FitConfig, EPS_ZERO_DEFAULT};
use msvm_core::lpmodel::fit_penalized;
use msvm_core::metrics::{write_frequency_csv, write_summary_csv};
use msvm_core::penalty::{PenaltyKind, PenaltySpec};
use msvm_core::select::{
    fit_adaptive_pipeline, tune_loocv, tune_on_holdout, weights_from_baseline, LambdaGrid,
    TuneResult, Tuner,
};
use msvm_core::simgen::{generate, DesignKind, SimDesign};
use msvm_core::study::{frequency_rows, run_study, summary_rows, Method, StudyConfig};
use msvm_core::{CoefModel, Dataset};

use model_file::{read_model, write_model, ModelFile};

#[derive(Parser)]
#[command(name = "msvm", version, about = "Multicategory SVMs with sparsity-inducing penalties")]
struct Cli {
    /// Worker threads; 0 picks the machine default. The MSVM_THREADS
    /// environment variable applies when the flag is absent.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a penalized MSVM on a CSV dataset.
    Train(TrainArgs),
    /// Predict labels for a CSV dataset with a saved model.
    Predict(PredictArgs),
    /// Run a replicated simulation study and emit its tables.
    Simulate(SimulateArgs),
    /// Run the expression screening pipeline with LOOCV tuning.
    Genes(GenesArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum PenaltyArg {
    L2,
    L1,
    Supnorm,
    #[value(name = "adapt-l1")]
    AdaptL1,
    #[value(name = "adapt-sup1")]
    AdaptSup1,
    #[value(name = "adapt-sup2")]
    AdaptSup2,
}

impl PenaltyArg {
    fn kind(self) -> PenaltyKind {
        match self {
            PenaltyArg::L2 => PenaltyKind::L2,
            PenaltyArg::L1 => PenaltyKind::L1,
            PenaltyArg::Supnorm => PenaltyKind::SupNorm,
            PenaltyArg::AdaptL1 => PenaltyKind::AdaptiveL1,
            PenaltyArg::AdaptSup1 => PenaltyKind::AdaptiveSupI,
            PenaltyArg::AdaptSup2 => PenaltyKind::AdaptiveSupII,
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Training data CSV (shared format: variables plus a final label column).
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum)]
    penalty: PenaltyArg,
    /// Tuning set CSV; mutually exclusive with --loocv.
    #[arg(long, conflicts_with = "loocv")]
    tune: Option<PathBuf>,
    /// Tune by leave-one-out cross validation on the training data.
    #[arg(long)]
    loocv: bool,
    /// Grid as log2 exponent range "lo:hi" (default -14:15).
    #[arg(long, allow_hyphen_values = true)]
    grid: Option<String>,
    /// Fixed lambda; skips tuning for the final fit.
    #[arg(long)]
    lambda: Option<f64>,
    /// Output model file.
    #[arg(long)]
    out: PathBuf,
    /// Optional per-lambda error table CSV.
    #[arg(long)]
    errors_out: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// Data CSV; a trailing label column is used for the error report when
    /// present.
    #[arg(long)]
    data: PathBuf,
    /// Prediction output CSV (default stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum DesignArg {
    #[value(name = "five-class")]
    FiveClass,
    #[value(name = "four-class")]
    FourClass,
    Nonlinear,
}

impl DesignArg {
    fn kind(self) -> DesignKind {
        match self {
            DesignArg::FiveClass => DesignKind::FiveClass,
            DesignArg::FourClass => DesignKind::FourClassLinear,
            DesignArg::Nonlinear => DesignKind::NonlinearThreeClass,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BasisArg {
    Linear,
    Poly2,
    Poly3,
}

impl BasisArg {
    fn spec(self) -> BasisSpec {
        match self {
            BasisArg::Linear => BasisSpec::linear(),
            BasisArg::Poly2 => BasisSpec::poly(2),
            BasisArg::Poly3 => BasisSpec::poly(3),
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    design: DesignArg,
    #[arg(long, default_value_t = 10)]
    reps: usize,
    /// Training-set size; defaults to the design's benchmark size.
    #[arg(long)]
    n: Option<usize>,
    /// Tuning-set size; defaults to the training size.
    #[arg(long)]
    n_tune: Option<usize>,
    #[arg(long, default_value_t = 10_000)]
    n_test: usize,
    /// Feature basis; defaults to the design's (poly2 for nonlinear).
    #[arg(long, value_enum)]
    basis: Option<BasisArg>,
    /// Comma-separated methods (l2,l1,supnorm,adapt-l1,adapt-sup1,
    /// adapt-sup2,bayes); default all.
    #[arg(long)]
    methods: Option<String>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Grid as log2 exponent range "lo:hi" (default -14:15).
    #[arg(long, allow_hyphen_values = true)]
    grid: Option<String>,
    /// Monte-Carlo draws for the Bayes row.
    #[arg(long, default_value_t = 50_000)]
    bayes_mc: usize,
    #[arg(long)]
    out_dir: PathBuf,
    /// Also write each replication's train/tune/test splits as CSV.
    #[arg(long)]
    materialize: bool,
}

#[derive(Args)]
struct GenesArgs {
    #[arg(long)]
    train_expr: PathBuf,
    #[arg(long)]
    train_labels: PathBuf,
    #[arg(long)]
    test_expr: PathBuf,
    #[arg(long)]
    test_labels: PathBuf,
    #[arg(long, default_value_t = 100)]
    top: usize,
    #[arg(long, default_value_t = 100)]
    bottom: usize,
    #[arg(long, value_enum)]
    penalty: PenaltyArg,
    /// Grid as log2 exponent range "lo:hi" (default -14:15).
    #[arg(long, allow_hyphen_values = true)]
    grid: Option<String>,
    #[arg(long)]
    out_dir: PathBuf,
}

/// Errors that should exit 2 (usage / malformed inputs) rather than 1.
#[derive(Debug)]
struct UsageError(anyhow::Error);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

impl std::error::Error for UsageError {}

fn usage(err: impl Into<anyhow::Error>) -> anyhow::Error {
    anyhow::Error::new(UsageError(err.into()))
}

/// Core CSV errors carry line numbers and are usage problems.
fn classify(err: CoreError) -> anyhow::Error {
    match err {
        CoreError::Csv { .. } | CoreError::InvalidInput(_) => usage(err),
        other => anyhow!(other),
    }
}

fn parse_grid(arg: Option<&str>) -> Result<LambdaGrid> {
    match arg {
        None => Ok(LambdaGrid::standard()),
        Some(s) => {
            let (lo, hi) = s
                .split_once(':')
                .ok_or_else(|| usage(anyhow!("--grid wants 'lo:hi', got '{s}'")))?;
            let lo: i32 = lo
                .trim()
                .parse()
                .map_err(|_| usage(anyhow!("bad grid bound '{lo}'")))?;
            let hi: i32 = hi
                .trim()
                .parse()
                .map_err(|_| usage(anyhow!("bad grid bound '{hi}'")))?;
            LambdaGrid::from_range(lo, hi).map_err(classify)
        }
    }
}

fn read_dataset(path: &Path) -> Result<Dataset> {
    Dataset::read_csv(path).map_err(classify)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_threads(cli.threads);
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            if err.chain().any(|c| c.is::<UsageError>()) || err.is::<UsageError>() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn init_threads(flag: Option<usize>) {
    let n = flag.or_else(|| {
        std::env::var("MSVM_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = n {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Train(args) => cmd_train(args),
        Command::Predict(args) => cmd_predict(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Genes(args) => cmd_genes(args),
    }
}

fn plain_spec(kind: PenaltyKind) -> Option<PenaltySpec> {
    match kind {
        PenaltyKind::L2 => Some(PenaltySpec::L2),
        PenaltyKind::L1 => Some(PenaltySpec::L1),
        PenaltyKind::SupNorm => Some(PenaltySpec::SupNorm),
        _ => None,
    }
}

fn write_error_table(path: &Path, result: &TuneResult) -> Result<()> {
    use std::io::Write;
    let mut out = std::fs::File::create(path)
        .with_context(|| format!("creating {}", path.display()))?;
    writeln!(out, "log2_lambda,lambda,error,status")?;
    for t in &result.per_lambda {
        match t.error {
            Some(e) => writeln!(out, "{},{:?},{e},ok", t.log2_lambda, t.lambda)?,
            None => writeln!(out, "{},{:?},,failed", t.log2_lambda, t.lambda)?,
        }
    }
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let train = read_dataset(&args.data)?;
    let kind = args.penalty.kind();
    let grid = parse_grid(args.grid.as_deref())?;
    let l2_cfg = L2FitConfig::default();

    let tune_set = match &args.tune {
        Some(p) => Some(read_dataset(p)?),
        None => None,
    };
    let tuner: Option<Tuner<'_>> = match (&tune_set, args.loocv) {
        (Some(t), false) => Some(Tuner::Holdout(t)),
        (None, true) => Some(Tuner::Loocv),
        (None, false) => None,
        (Some(_), true) => unreachable!("clap conflict"),
    };

    if tuner.is_none() && args.lambda.is_none() {
        return Err(usage(anyhow!(
            "supply --tune <csv>, --loocv, or a fixed --lambda"
        )));
    }
    if kind.is_adaptive() && tuner.is_none() {
        return Err(usage(anyhow!(
            "adaptive penalties derive weights from a tuned baseline; supply --tune or --loocv"
        )));
    }

    let (model, lambda, table): (CoefModel, f64, Option<TuneResult>) = if kind.is_adaptive() {
        let tuner = tuner.expect("checked above");
        match args.lambda {
            None => {
                let fitres =
                    fit_adaptive_pipeline(&train, tuner, kind, &grid, &l2_cfg, EPS_ZERO_DEFAULT)
                        .map_err(classify)?;
                let f = fitres.final_stage;
                (f.final_model.clone(), f.chosen_lambda, Some(f))
            }
            Some(lambda) => {
                let stage1 = tuner
                    .tune(&train, &PenaltySpec::L2, &grid, &l2_cfg)
                    .map_err(classify)?;
                let weights = weights_from_baseline(&stage1.final_model, kind, EPS_ZERO_DEFAULT)
                    .map_err(classify)?;
                let fit = fit_penalized(&train, &weights, lambda).map_err(classify)?;
                (fit.model, lambda, None)
            }
        }
    } else {
        let spec = plain_spec(kind).expect("non-adaptive");
        match (args.lambda, tuner) {
            (Some(lambda), _) => {
                let model = match &spec {
                    PenaltySpec::L2 => fit_l2(&train, lambda, &l2_cfg).map_err(classify)?.model,
                    other => fit_penalized(&train, other, lambda).map_err(classify)?.model,
                };
                (model, lambda, None)
            }
            (None, Some(Tuner::Holdout(t))) => {
                let r = tune_on_holdout(&train, t, &spec, &grid, &l2_cfg).map_err(classify)?;
                (r.final_model.clone(), r.chosen_lambda, Some(r))
            }
            (None, Some(Tuner::Loocv)) => {
                let r = tune_loocv(&train, &spec, &grid, &l2_cfg).map_err(classify)?;
                (r.final_model.clone(), r.chosen_lambda, Some(r))
            }
            (None, None) => unreachable!("checked above"),
        }
    };

    if let (Some(path), Some(result)) = (&args.errors_out, &table) {
        write_error_table(path, result)?;
    }
    write_model(
        &args.out,
        &ModelFile {
            names: train.names().to_vec(),
            lambda,
            penalty: kind.name().to_string(),
            model,
        },
    )?;
    println!(
        "trained {} on {} rows, lambda {}, model -> {}",
        kind.name(),
        train.n(),
        lambda,
        args.out.display()
    );
    Ok(())
}

fn cmd_predict(args: PredictArgs) -> Result<()> {
    let mf = read_model(&args.model)?;
    let (features, labels) = msvm_core::dataset::read_feature_csv(&args.data).map_err(classify)?;
    if features.cols() != mf.model.d_vars() {
        bail!(
            "model has {} variables, data has {}",
            mf.model.d_vars(),
            features.cols()
        );
    }

    let mut predictions = Vec::with_capacity(features.rows());
    for i in 0..features.rows() {
        predictions.push(mf.model.predict(features.row(i))?);
    }

    let mut rendered = String::from("prediction\n");
    for p in &predictions {
        rendered.push_str(&p.to_string());
        rendered.push('\n');
    }
    match &args.out {
        Some(path) => std::fs::write(path, rendered)
            .with_context(|| format!("writing {}", path.display()))?,
        None => print!("{rendered}"),
    }

    if let Some(labels) = labels {
        let wrong = predictions
            .iter()
            .zip(&labels)
            .filter(|(p, y)| *p != *y)
            .count();
        println!(
            "misclassification: {}/{} = {}",
            wrong,
            labels.len(),
            wrong as f64 / labels.len() as f64
        );
    }
    Ok(())
}

fn parse_methods(arg: Option<&str>) -> Result<Vec<Method>> {
    match arg {
        None => Ok(Method::all()),
        Some(list) => {
            let mut out = Vec::new();
            for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                let m = Method::parse(name)
                    .ok_or_else(|| usage(anyhow!("unknown method '{name}'")))?;
                out.push(m);
            }
            if out.is_empty() {
                return Err(usage(anyhow!("--methods list is empty")));
            }
            Ok(out)
        }
    }
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let design = args.design.kind();
    let mut cfg = StudyConfig::for_design(design, args.reps, args.seed);
    if let Some(n) = args.n {
        cfg.n_train = n;
    }
    cfg.n_tune = args.n_tune.unwrap_or(cfg.n_train);
    cfg.n_test = args.n_test;
    if let Some(basis) = args.basis {
        cfg.basis = basis.spec();
    }
    cfg.methods = parse_methods(args.methods.as_deref())?;
    cfg.grid = parse_grid(args.grid.as_deref())?;
    cfg.bayes_mc = args.bayes_mc;

    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;

    if args.materialize {
        for rep in 0..cfg.reps {
            let (train, tune, test, _) = generate(&SimDesign {
                kind: design,
                n_train: cfg.n_train,
                n_tune: cfg.n_tune,
                n_test: cfg.n_test,
                seed: cfg.base_seed.wrapping_add(rep as u64),
            })
            .map_err(classify)?;
            for (name, split) in [("train", train), ("tune", tune), ("test", test)] {
                split
                    .write_csv(args.out_dir.join(format!("{name}_r{rep}.csv")))
                    .map_err(classify)?;
            }
        }
    }

    let result = run_study(&cfg).map_err(classify)?;
    write_summary_csv(&summary_rows(&result, cfg.reps), args.out_dir.join("summary.csv"))
        .map_err(classify)?;
    write_frequency_csv(
        &frequency_rows(&result),
        &result.feature_names,
        args.out_dir.join("frequency.csv"),
    )
    .map_err(classify)?;
    println!(
        "{} study: {} reps, outputs in {}",
        design.name(),
        cfg.reps,
        args.out_dir.display()
    );
    Ok(())
}

fn cmd_genes(args: GenesArgs) -> Result<()> {
    use std::io::Write;
    if args.top + args.bottom == 0 {
        return Err(usage(anyhow!("--top and --bottom cannot both be zero")));
    }
    let train_labels = genes::read_labels(&args.train_labels).map_err(classify)?;
    let test_labels = genes::read_labels(&args.test_labels).map_err(classify)?;
    let train_expr = ExpressionMatrix::read_csv(&args.train_expr)
        .map_err(classify)?
        .with_labels(train_labels.clone())
        .map_err(classify)?;
    let test_expr = ExpressionMatrix::read_csv(&args.test_expr)
        .map_err(classify)?
        .with_labels(test_labels.clone())
        .map_err(classify)?;

    let k_classes = train_labels
        .iter()
        .chain(&test_labels)
        .max()
        .copied()
        .unwrap_or(2)
        .max(2);

    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;

    let std = genes::standardize(&train_expr, &test_expr).map_err(classify)?;
    if !std.dropped_genes.is_empty() {
        println!(
            "dropped {} constant gene(s): {}",
            std.dropped_genes.len(),
            std.dropped_genes.join(",")
        );
    }
    let scores = genes::relevance(&std.train).map_err(classify)?;
    let screened = genes::screen(&scores, args.top, args.bottom).map_err(classify)?;
    genes::write_ranked_csv(
        &std.train,
        &scores,
        &screened,
        args.out_dir.join("ranked.csv"),
    )
    .map_err(classify)?;

    let keep: Vec<usize> = screened.iter().map(|(g, _)| *g).collect();
    let train = std.train.to_dataset(&keep, k_classes).map_err(classify)?;
    let test = std.test.to_dataset(&keep, k_classes).map_err(classify)?;
    train
        .write_csv(args.out_dir.join("screened_train.csv"))
        .map_err(classify)?;

    let grid = parse_grid(args.grid.as_deref())?;
    let l2_cfg = L2FitConfig::default();
    let kind = args.penalty.kind();
    let tuned = if kind.is_adaptive() {
        fit_adaptive_pipeline(&train, Tuner::Loocv, kind, &grid, &l2_cfg, EPS_ZERO_DEFAULT)
            .map_err(classify)?
            .final_stage
    } else {
        let spec = plain_spec(kind).expect("non-adaptive");
        tune_loocv(&train, &spec, &grid, &l2_cfg).map_err(classify)?
    };

    let model = &tuned.final_model;
    let test_error = model.error_rate(&test).map_err(classify)?;
    let selected = model.selected_vars();
    let top_selected = selected
        .iter()
        .filter(|&&j| screened[j].1 == ScreenGroup::Top)
        .count();
    let bottom_selected = selected.len() - top_selected;

    // Final gene list with per-class coefficients, in relevance-rank order.
    let mut out = std::fs::File::create(args.out_dir.join("selected.csv"))?;
    let class_cols = (1..=model.k_classes())
        .map(|k| format!("w_class{k}"))
        .collect::<Vec<_>>()
        .join(",");
    writeln!(out, "gene_id,group,{class_cols}")?;
    for &j in &selected {
        let group = match screened[j].1 {
            ScreenGroup::Top => "top",
            ScreenGroup::Bottom => "bottom",
        };
        let coefs = (0..model.k_classes())
            .map(|k| format!("{:?}", model.w().get(k, j)))
            .collect::<Vec<_>>()
            .join(",");
        writeln!(out, "{},{group},{coefs}", train.names()[j])?;
    }

    let mut summary = std::fs::File::create(args.out_dir.join("summary.txt"))?;
    writeln!(summary, "penalty {}", kind.name())?;
    writeln!(summary, "chosen_lambda {:?}", tuned.chosen_lambda)?;
    writeln!(summary, "loocv_error {:?}", tuned.tuning_error)?;
    writeln!(summary, "test_error {test_error:?}")?;
    writeln!(summary, "selected_total {}", selected.len())?;
    writeln!(summary, "selected_top {top_selected}")?;
    writeln!(summary, "selected_bottom {bottom_selected}")?;
    write_error_table(&args.out_dir.join("lambda_errors.csv"), &tuned)?;

    println!(
        "{}: test error {test_error:.4}, selected {} genes ({top_selected} top, {bottom_selected} bottom)",
        kind.name(),
        selected.len()
    );
    Ok(())
}
