use std::path::PathBuf;

use clap::{Args, ValueEnum};
use ppboot::baselines::{classical_bootstrap_interval, imputed_interval, ppi_mean_interval};
use ppboot::crossfit::{cross_ppboot_interval, LearnerSpec};
use ppboot::dataset::{
    load_labeled_csv, load_observations_csv, load_unlabeled_csv, load_unlabeled_features_csv,
    CsvSchema,
};
use ppboot::par::with_threads;
use ppboot::ppboot::ppboot_interval;
use ppboot::{
    BootstrapConfig, ConfidenceInterval, Error, Estimand, EstimandSpec, LambdaMode,
    ReportTransform, Result,
};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum EstimandName {
    Mean,
    Quantile,
    OlsCoef,
    LogisticCoef,
    LogOddsRatio,
    PearsonCorr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InferMethod {
    Ppboot,
    Classical,
    Imputed,
    PpiMean,
}

impl InferMethod {
    fn id(self) -> &'static str {
        match self {
            InferMethod::Ppboot => "ppboot",
            InferMethod::Classical => "classical",
            InferMethod::Imputed => "imputed",
            InferMethod::PpiMean => "ppi-mean",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LearnerName {
    Linear,
    Logistic,
    Knn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum ReportName {
    Identity,
    Exp,
    FisherZInverse,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    /// Labeled CSV (features, outcome, prediction).
    #[arg(long)]
    labeled: PathBuf,
    /// Unlabeled CSV (features, prediction).
    #[arg(long)]
    unlabeled: PathBuf,
    /// JSON file naming the outcome, prediction and feature columns.
    #[arg(long)]
    schema: PathBuf,
    #[arg(long, value_enum)]
    estimand: EstimandName,
    /// Quantile level for `quantile`.
    #[arg(long)]
    quantile: Option<f64>,
    /// Coefficient index for `ols_coef` and `logistic_coef`.
    #[arg(long)]
    target: Option<usize>,
    /// Fit regressions without an intercept.
    #[arg(long)]
    no_intercept: bool,
    /// Exposure feature column for `log_odds_ratio`.
    #[arg(long)]
    exposure_column: Option<usize>,
    /// Feature column for `pearson_corr`.
    #[arg(long)]
    feature_column: Option<usize>,
    /// Transform applied to the reported interval.
    #[arg(long, value_enum)]
    report: Option<ReportName>,
    #[arg(long, default_value_t = ppboot::ppboot::DEFAULT_ALPHA)]
    alpha: f64,
    /// Bootstrap iterations.
    #[arg(long = "B", default_value_t = ppboot::ppboot::DEFAULT_ITERATIONS)]
    iterations: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Estimate λ by an initial bootstrap.
    #[arg(long, conflicts_with = "lambda")]
    tune: bool,
    /// Fixed multiplier on the prediction terms.
    #[arg(long, allow_negative_numbers = true)]
    lambda: Option<f64>,
    #[arg(long, value_enum, default_value = "ppboot")]
    method: InferMethod,
    /// Ignore the prediction columns and cross-fit K models instead.
    #[arg(long, value_name = "K")]
    crossfit: Option<usize>,
    #[arg(long, value_enum, requires = "crossfit")]
    learner: Option<LearnerName>,
    /// Neighbours for the knn learner.
    #[arg(long, default_value_t = 5)]
    knn_k: usize,
    /// Worker thread cap.
    #[arg(long)]
    threads: Option<usize>,
}

/// Output record; field order is the JSON key order.
#[derive(Debug, Serialize)]
struct InferOutput<'a> {
    method: &'a str,
    estimand: &'a str,
    lower: f64,
    upper: f64,
    point: f64,
    lambda_used: f64,
    #[serde(rename = "B")]
    iterations: usize,
    alpha: f64,
    seed: u64,
    degenerate_iterations: usize,
}

fn need<T>(v: Option<T>, flag: &str, estimand: &str) -> Result<T> {
    v.ok_or_else(|| Error::Argument(format!("--estimand {estimand} requires {flag}")))
}

fn estimand_spec(a: &InferArgs) -> Result<EstimandSpec> {
    let intercept = !a.no_intercept;
    let kind = match a.estimand {
        EstimandName::Mean => Estimand::Mean,
        EstimandName::Quantile => Estimand::Quantile { q: need(a.quantile, "--quantile", "quantile")? },
        EstimandName::OlsCoef => Estimand::OlsCoef { target_index: need(a.target, "--target", "ols_coef")?, intercept },
        EstimandName::LogisticCoef => Estimand::LogisticCoef {
            target_index: need(a.target, "--target", "logistic_coef")?,
            intercept,
        },
        EstimandName::LogOddsRatio => Estimand::LogOddsRatio {
            exposure_column: need(a.exposure_column, "--exposure-column", "log_odds_ratio")?,
        },
        EstimandName::PearsonCorr => Estimand::PearsonCorr {
            feature_column: need(a.feature_column, "--feature-column", "pearson_corr")?,
        },
    };
    let mut spec = EstimandSpec::from(kind);
    if let Some(r) = a.report {
        spec.report = match r {
            ReportName::Identity => ReportTransform::Identity,
            ReportName::Exp => ReportTransform::Exp,
            ReportName::FisherZInverse => ReportTransform::FisherZInverse,
        };
    }
    Ok(spec)
}

fn learner(a: &InferArgs) -> LearnerSpec {
    let intercept = !a.no_intercept;
    match a.learner.unwrap_or(LearnerName::Linear) {
        LearnerName::Linear => LearnerSpec::LinearLeastSquares { intercept },
        LearnerName::Logistic => LearnerSpec::LogisticIrls { intercept, labels: false },
        LearnerName::Knn => LearnerSpec::Knn { k: a.knn_k },
    }
}

fn compute(a: &InferArgs, spec: &EstimandSpec, cfg: &BootstrapConfig) -> Result<ConfidenceInterval> {
    let schema = CsvSchema::from_json_file(&a.schema)?;
    let stream = cfg.root_stream();
    if let Some(k) = a.crossfit {
        let labeled = load_observations_csv(&a.labeled, &schema)?;
        let unlabeled = load_unlabeled_features_csv(&a.unlabeled, &schema)?;
        return cross_ppboot_interval(&labeled, unlabeled.view(), spec, cfg, k, &learner(a), &stream);
    }
    match a.method {
        InferMethod::Ppboot => {
            let l = load_labeled_csv(&a.labeled, &schema)?;
            let u = load_unlabeled_csv(&a.unlabeled, &schema)?;
            ppboot_interval(&l, &u, spec, cfg, &stream)
        }
        InferMethod::Classical => {
            let obs = load_observations_csv(&a.labeled, &schema)?;
            let y = obs.outcomes().to_vec();
            classical_bootstrap_interval(&obs.with_predictions(y)?, spec, cfg, &stream)
        }
        InferMethod::Imputed => {
            let u = load_unlabeled_csv(&a.unlabeled, &schema)?;
            imputed_interval(&u, spec, cfg, &stream)
        }
        InferMethod::PpiMean => {
            if spec.kind != Estimand::Mean {
                return Err(Error::Argument("--method ppi-mean supports only --estimand mean".into()));
            }
            cfg.validate()?;
            let l = load_labeled_csv(&a.labeled, &schema)?;
            let u = load_unlabeled_csv(&a.unlabeled, &schema)?;
            ppi_mean_interval(&l, &u, cfg.alpha)
        }
    }
}

pub fn run(a: InferArgs) -> Result<()> {
    let spec = estimand_spec(&a)?;
    let lambda_given = a.tune || a.lambda.is_some();
    if lambda_given && a.method != InferMethod::Ppboot {
        return Err(Error::Argument(format!(
            "--tune and --lambda apply only to --method ppboot, not {}",
            a.method.id()
        )));
    }
    if a.crossfit.is_some() && a.method != InferMethod::Ppboot {
        return Err(Error::Argument("--crossfit applies only to --method ppboot".into()));
    }
    let seed = a.seed.unwrap_or_else(|| {
        eprintln!("warning: no --seed given, using 0");
        0
    });
    let cfg = BootstrapConfig {
        iterations: a.iterations,
        alpha: a.alpha,
        lambda: match (a.tune, a.lambda) {
            (true, _) => LambdaMode::Tuned,
            (false, Some(l)) => LambdaMode::Fixed(l),
            (false, None) => LambdaMode::Off,
        },
        master_seed: seed,
        ..Default::default()
    };
    let ci = with_threads(a.threads, || compute(&a, &spec, &cfg))??;
    let (lower, upper) = spec.report_interval(ci.lower, ci.upper);
    let method = if a.crossfit.is_some() { "cross-ppboot" } else { a.method.id() };
    let out = InferOutput {
        method,
        estimand: spec.name(),
        lower,
        upper,
        point: spec.report_point(ci.point_estimate),
        lambda_used: ci.lambda_used,
        iterations: cfg.iterations,
        alpha: cfg.alpha,
        seed,
        degenerate_iterations: ci.degenerate_iterations,
    };
    println!("{}", serde_json::to_string_pretty(&out).expect("output serializes"));
    Ok(())
}
