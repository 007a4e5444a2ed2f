//! Monte Carlo coverage studies.
//!
//! A fully labeled dataset is repeatedly split into `n` labeled rows and an
//! unlabeled remainder; each requested method produces an interval, and
//! coverage of the full-data estimate plus mean width are tallied per
//! `(method, n)`.

pub mod report;
pub mod synthetic;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    classical_bootstrap_interval, classical_clt_mean_interval, imputed_interval, ppi_mean_interval,
};
use crate::crossfit::{cross_ppboot_interval, split_ppboot_interval, CrossfitConfig};
use crate::dataset::{load_labeled_csv, split_trial, CsvSchema, LabeledDataset, UnlabeledDataset};
use crate::estimators::{Estimand, EstimandSpec};
use crate::par::map_indices;
use crate::ppboot::{ppboot_interval, BootstrapConfig, ConfidenceInterval, LambdaMode};
use crate::resampling::{phase, RngStream};
use crate::{Error, Result};

pub use report::{summarize_to_tables, AggregateRow, DisplayedInterval, ReportTables};
pub use synthetic::{generate_synthetic, Dgp, PredictionModel, SyntheticSpec};

pub const DEFAULT_TRIALS: usize = 100;
pub const DEFAULT_DISPLAY_TRIALS: usize = 3;

/// Interval methods a study can compare.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// PPBoot with the configured λ.
    Ppboot,
    /// PPBoot with λ estimated per trial.
    PpbootTuned,
    /// Percentile bootstrap on the labeled rows.
    Classical,
    /// Normal-theory interval on the labeled rows (mean only).
    ClassicalClt,
    Imputed,
    /// Prediction-powered mean with a CLT interval (mean only).
    PpiMean,
    CrossPpboot,
    SplitPpboot,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Ppboot,
        Method::PpbootTuned,
        Method::Classical,
        Method::ClassicalClt,
        Method::Imputed,
        Method::PpiMean,
        Method::CrossPpboot,
        Method::SplitPpboot,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Method::Ppboot => "ppboot",
            Method::PpbootTuned => "ppboot-tuned",
            Method::Classical => "classical",
            Method::ClassicalClt => "classical-clt",
            Method::Imputed => "imputed",
            Method::PpiMean => "ppi-mean",
            Method::CrossPpboot => "cross-ppboot",
            Method::SplitPpboot => "split-ppboot",
        }
    }

    fn mean_only(self) -> bool {
        matches!(self, Method::ClassicalClt | Method::PpiMean)
    }

    fn needs_learner(self) -> bool {
        matches!(self, Method::CrossPpboot | Method::SplitPpboot)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.id() == s)
            .ok_or_else(|| Error::argument(format!("unknown method '{s}'")))
    }
}

/// Protocol parameters of a coverage study. The master seed is
/// `bootstrap.master_seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialConfig {
    pub n_grid: Vec<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub methods: Vec<Method>,
    pub estimand: EstimandSpec,
    #[serde(default)]
    pub bootstrap: BootstrapConfig,
    /// How many randomly chosen trials have their intervals recorded.
    #[serde(default = "default_display_trials")]
    pub display_trials: usize,
    /// Labeled size of the recorded trials; defaults to the first grid entry.
    #[serde(default)]
    pub display_n: Option<usize>,
    /// Required by `cross-ppboot` and `split-ppboot`.
    #[serde(default)]
    pub crossfit: Option<CrossfitConfig>,
}

fn default_trials() -> usize {
    DEFAULT_TRIALS
}
fn default_display_trials() -> usize {
    DEFAULT_DISPLAY_TRIALS
}

impl TrialConfig {
    pub fn new(n_grid: Vec<usize>, methods: Vec<Method>, estimand: EstimandSpec) -> Self {
        Self {
            n_grid,
            trials: DEFAULT_TRIALS,
            methods,
            estimand,
            bootstrap: BootstrapConfig::default(),
            display_trials: DEFAULT_DISPLAY_TRIALS,
            display_n: None,
            crossfit: None,
        }
    }

    pub fn display_n(&self) -> Option<usize> {
        self.display_n.or_else(|| self.n_grid.first().copied())
    }

    /// Checks the configuration against a dataset of `total` rows and
    /// `dim` feature columns.
    pub fn validate(&self, total: usize, dim: usize) -> Result<()> {
        self.bootstrap.validate()?;
        self.estimand.kind.validate(dim)?;
        if self.trials == 0 {
            return Err(Error::argument("trials must be at least 1"));
        }
        if self.n_grid.is_empty() {
            return Err(Error::argument("n_grid is empty"));
        }
        for &n in &self.n_grid {
            if n < 2 || n + 2 > total {
                return Err(Error::argument(format!(
                    "n = {n} must satisfy 2 <= n <= {} for {total} rows",
                    total.saturating_sub(2)
                )));
            }
        }
        if let Some(d) = self.display_n {
            if !self.n_grid.contains(&d) {
                return Err(Error::argument(format!("display_n = {d} is not in n_grid")));
            }
        }
        if self.methods.is_empty() {
            return Err(Error::argument("no methods requested"));
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].contains(m) {
                return Err(Error::argument(format!("method '{m}' listed twice")));
            }
            if m.mean_only() && self.estimand.kind != Estimand::Mean {
                return Err(Error::argument(format!("method '{m}' supports only the mean")));
            }
            if m.needs_learner() {
                let cf = self
                    .crossfit
                    .as_ref()
                    .ok_or_else(|| Error::argument(format!("method '{m}' needs a crossfit section")))?;
                cf.learner.validate()?;
                if cf.folds < 2 || self.n_grid.iter().any(|&n| n < cf.folds) {
                    return Err(Error::argument(format!(
                        "fold count {} must satisfy 2 <= K <= n for every n",
                        cf.folds
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Where the fully labeled study data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Synthetic(SyntheticSpec),
    /// A CSV file with outcome and prediction columns.
    Csv { path: PathBuf, schema: CsvSchema },
}

impl DataSource {
    /// Synthetic data is drawn from the stream `seed/3`.
    pub fn load(&self, seed: u64) -> Result<LabeledDataset> {
        match self {
            DataSource::Synthetic(spec) => {
                generate_synthetic(spec, &RngStream::new(seed, &[phase::SYNTHETIC]))
            }
            DataSource::Csv { path, schema } => load_labeled_csv(path, schema),
        }
    }
}

/// Coverage and width of one method at one labeled size.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub method: Method,
    pub n: usize,
    pub trials: usize,
    pub covered: usize,
    pub failed: usize,
    /// `covered / trials`; failed trials count as not covered.
    pub coverage: f64,
    /// Mean reported-scale width over the trials that succeeded.
    pub mean_width: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialSummary {
    /// Estimand on the full dataset, reporting scale.
    pub ground_truth: f64,
    /// Cells ordered by method (config order), then by n (grid order).
    pub cells: Vec<CellSummary>,
    pub displayed: Vec<DisplayedInterval>,
}

/// Interval endpoints and point estimate on the reporting scale.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Reported {
    lower: f64,
    upper: f64,
    point: f64,
}

fn run_method(
    method: Method,
    labeled: &LabeledDataset,
    unlabeled: &UnlabeledDataset,
    config: &TrialConfig,
    stream: &RngStream,
) -> Result<ConfidenceInterval> {
    let spec = &config.estimand;
    let cfg = &config.bootstrap;
    match method {
        Method::Ppboot => ppboot_interval(labeled, unlabeled, spec, cfg, stream),
        Method::PpbootTuned => {
            let tuned = BootstrapConfig { lambda: LambdaMode::Tuned, ..cfg.clone() };
            ppboot_interval(labeled, unlabeled, spec, &tuned, stream)
        }
        Method::Classical => classical_bootstrap_interval(labeled, spec, cfg, stream),
        Method::ClassicalClt => classical_clt_mean_interval(labeled.outcomes(), cfg.alpha),
        Method::Imputed => imputed_interval(unlabeled, spec, cfg, stream),
        Method::PpiMean => ppi_mean_interval(labeled, unlabeled, cfg.alpha),
        Method::CrossPpboot | Method::SplitPpboot => {
            let cf = config
                .crossfit
                .as_ref()
                .ok_or_else(|| Error::argument(format!("method '{method}' needs a crossfit section")))?;
            let obs = labeled.observations();
            if method == Method::CrossPpboot {
                cross_ppboot_interval(&obs, unlabeled.features(), spec, cfg, cf.folds, &cf.learner, stream)
            } else {
                split_ppboot_interval(&obs, unlabeled.features(), spec, cfg, cf.split_fraction, &cf.learner, stream)
            }
        }
    }
}

/// Runs the study. Trial `t` at labeled size `n` uses the stream
/// `seed/n/t`: its split comes from `seed/n/t/0` and every method shares the
/// same resampling streams below it.
pub fn run_coverage_study(data: &LabeledDataset, config: &TrialConfig) -> Result<TrialSummary> {
    config.validate(data.len(), data.dim())?;
    let spec = &config.estimand;
    let truth = spec
        .kind
        .evaluate(data.features(), data.outcomes())?
        .require("ground truth on the full dataset")?;
    let reported_truth = spec.report_point(truth);
    let seed = config.bootstrap.master_seed;
    let trials = config.trials;
    let tasks = config.n_grid.len() * trials;

    let results: Vec<Vec<Result<Reported>>> = map_indices(tasks, config.bootstrap.execution, |task| {
        let n = config.n_grid[task / trials];
        let t = task % trials;
        let stream = RngStream::new(seed, &[n as u64, t as u64]);
        let (labeled, unlabeled) = split_trial(data, n, &stream.child(phase::SPLIT))?;
        Ok(config
            .methods
            .iter()
            .map(|&m| {
                let ci = run_method(m, &labeled, &unlabeled, config, &stream)?;
                let (lower, upper) = spec.report_interval(ci.lower, ci.upper);
                Ok(Reported { lower, upper, point: spec.report_point(ci.point_estimate) })
            })
            .collect())
    })
    .into_iter()
    .collect::<Result<_>>()?;

    let mut cells = Vec::with_capacity(config.methods.len() * config.n_grid.len());
    for (mi, &method) in config.methods.iter().enumerate() {
        for (ni, &n) in config.n_grid.iter().enumerate() {
            let mut covered = 0;
            let mut failed = 0;
            let mut widths = Vec::with_capacity(trials);
            for t in 0..trials {
                match &results[ni * trials + t][mi] {
                    Ok(r) => {
                        widths.push(r.upper - r.lower);
                        if r.lower <= reported_truth && reported_truth <= r.upper {
                            covered += 1;
                        }
                    }
                    Err(_) => failed += 1,
                }
            }
            if failed * 10 > trials {
                return Err(Error::Study { method: method.id().to_owned(), n, failed, trials });
            }
            cells.push(CellSummary {
                method,
                n,
                trials,
                covered,
                failed,
                coverage: covered as f64 / trials as f64,
                mean_width: widths.iter().sum::<f64>() / widths.len() as f64,
            });
        }
    }

    let mut displayed = Vec::new();
    if let Some(dn) = config.display_n() {
        let ni = config.n_grid.iter().position(|&n| n == dn).expect("validated display_n");
        let k = config.display_trials.min(trials);
        let mut picked = index::sample(&mut RngStream::new(seed, &[phase::DISPLAY]).rng(), trials, k).into_vec();
        picked.sort_unstable();
        for (mi, &method) in config.methods.iter().enumerate() {
            for &t in &picked {
                if let Ok(r) = &results[ni * trials + t][mi] {
                    displayed.push(DisplayedInterval {
                        method,
                        n: dn,
                        trial: t,
                        lower: r.lower,
                        upper: r.upper,
                        point: r.point,
                    });
                }
            }
        }
    }

    Ok(TrialSummary { ground_truth: reported_truth, cells, displayed })
}
