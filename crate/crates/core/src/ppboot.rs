//! Prediction-powered bootstrap and its power-tuned variant.
//!
//! Each bootstrap iteration resamples the labeled and the unlabeled data
//! with replacement and forms
//!
//! ```text
//! θ*_b = λ·θ̂(X̃*, f(X̃*)) + θ̂(X*, Y*) − λ·θ̂(X*, f(X*))
//! ```
//!
//! The interval is the percentile interval of the retained `θ*_b`. With
//! `λ = 1` this is plain PPBoot; with `λ = 0` it is the classical percentile
//! bootstrap of the labeled data.

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::dataset::{check_compatible, LabeledDataset, UnlabeledDataset};
use crate::estimators::{Estimand, EstimandSpec};
use crate::numeric::{sample_covariance, sample_variance};
use crate::par::{map_indices, Execution};
use crate::resampling::{
    draw_labeled, draw_unlabeled, percentile_interval, phase, require_half, run_replicates,
    BootstrapDraws, RngStream,
};
use crate::{Error, Result};

pub const DEFAULT_ITERATIONS: usize = 1000;
pub const DEFAULT_ALPHA: f64 = 0.1;
pub const DEFAULT_MAX_RETRIES: usize = 10;
/// Below this the tuning denominator is treated as zero and λ̂ = 0.
pub const TUNING_DENOMINATOR_FLOOR: f64 = 1e-15;

/// How the multiplier on the prediction terms is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaMode {
    Fixed(f64),
    /// Estimated by an initial bootstrap.
    Tuned,
    /// No power tuning: plain PPBoot, λ = 1.
    #[default]
    Off,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BootstrapConfig {
    #[serde(rename = "B", default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub lambda: LambdaMode,
    /// Iterations of the tuning bootstrap; `None` means the same as `B`.
    #[serde(rename = "tuning_B", default)]
    pub tuning_iterations: Option<usize>,
    /// Clip a tuned λ̂ to [0, 1].
    #[serde(default)]
    pub clip_lambda: bool,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_retries")]
    pub max_degenerate_retries: usize,
    #[serde(default)]
    pub execution: Execution,
}

fn default_iterations() -> usize {
    DEFAULT_ITERATIONS
}
fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}
fn default_retries() -> usize {
    DEFAULT_MAX_RETRIES
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            iterations: DEFAULT_ITERATIONS,
            alpha: DEFAULT_ALPHA,
            lambda: LambdaMode::Off,
            tuning_iterations: None,
            clip_lambda: false,
            master_seed: 0,
            max_degenerate_retries: DEFAULT_MAX_RETRIES,
            execution: Execution::default(),
        }
    }
}

impl BootstrapConfig {
    pub fn tuning_iterations(&self) -> usize {
        self.tuning_iterations.unwrap_or(self.iterations)
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations < 2 {
            return Err(Error::argument(format!(
                "B must be at least 2, got {}",
                self.iterations
            )));
        }
        if self.tuning_iterations() < 2 {
            return Err(Error::argument("tuning_B must be at least 2"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::argument(format!(
                "alpha {} is not in (0, 1)",
                self.alpha
            )));
        }
        if let LambdaMode::Fixed(l) = self.lambda {
            if !l.is_finite() {
                return Err(Error::argument("fixed lambda must be finite"));
            }
        }
        Ok(())
    }

    /// The root stream for a standalone (non-study) run.
    pub fn root_stream(&self) -> RngStream {
        RngStream::new(self.master_seed, &[])
    }
}

/// A percentile interval on the estimation scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
    pub point_estimate: f64,
    pub lambda_used: f64,
    pub degenerate_iterations: usize,
    pub alpha: f64,
}

impl ConfidenceInterval {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }

    pub(crate) fn from_draws(
        draws: &BootstrapDraws,
        requested: usize,
        alpha: f64,
        point_estimate: f64,
        lambda_used: f64,
    ) -> Result<Self> {
        require_half(draws, requested)?;
        let (lower, upper) = percentile_interval(&draws.values, alpha)?;
        Ok(Self {
            lower,
            upper,
            point_estimate,
            lambda_used,
            degenerate_iterations: draws.degenerate_iterations,
            alpha,
        })
    }
}

pub(crate) fn gather(values: &[f64], idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&i| values[i]).collect()
}

/// Rows of `x`, or a zero-width matrix when the estimator ignores features.
pub(crate) fn gather_features(x: ArrayView2<'_, f64>, idx: &[usize], needed: bool) -> Array2<f64> {
    if needed {
        x.select(Axis(0), idx)
    } else {
        Array2::zeros((idx.len(), 0))
    }
}

/// `λ·u + (c − λ·a)`. Grouped so that `a == c` with `λ = 1` returns `u`
/// exactly and `λ = 0` returns `c` exactly.
#[inline]
pub(crate) fn combine(lambda: f64, unlabeled_pred: f64, labeled_true: f64, labeled_pred: f64) -> f64 {
    lambda * unlabeled_pred + (labeled_true - lambda * labeled_pred)
}

/// `λ·θ̂(X̃, f(X̃)) + θ̂(X, Y) − λ·θ̂(X, f(X))` on the original data.
pub fn ppboot_point_estimate(
    labeled: &LabeledDataset,
    unlabeled: &UnlabeledDataset,
    spec: &EstimandSpec,
    lambda: f64,
) -> Result<f64> {
    check_compatible(labeled, unlabeled)?;
    let kind = &spec.kind;
    kind.validate(labeled.dim())?;
    let classical = kind
        .evaluate(labeled.features(), labeled.outcomes())?
        .require("estimate on labeled outcomes")?;
    if lambda == 0.0 {
        return Ok(classical);
    }
    let on_unlabeled = kind
        .evaluate(unlabeled.features(), unlabeled.predictions())?
        .require("estimate on unlabeled predictions")?;
    let on_labeled_pred = kind
        .evaluate(labeled.features(), labeled.predictions())?
        .require("estimate on labeled predictions")?;
    Ok(combine(lambda, on_unlabeled, classical, on_labeled_pred))
}

/// The retained `θ*_b` for a fixed multiplier, drawn from `stream/2/b/r`.
pub fn ppboot_replicates(
    labeled: &LabeledDataset,
    unlabeled: &UnlabeledDataset,
    kind: &Estimand,
    lambda: f64,
    cfg: &BootstrapConfig,
    stream: &RngStream,
) -> BootstrapDraws {
    let (n, big_n) = (labeled.len(), unlabeled.len());
    let uses_x = kind.uses_features();
    run_replicates(
        cfg.iterations,
        cfg.max_degenerate_retries,
        &stream.child(phase::MAIN),
        cfg.execution,
        |s| {
            let li = draw_labeled(n, s);
            let x = gather_features(labeled.features(), &li, uses_x);
            let y = gather(labeled.outcomes(), &li);
            if lambda == 0.0 {
                return kind.evaluate_owned(x.view(), y).ok()?.usable();
            }
            let f = gather(labeled.predictions(), &li);
            let ui = draw_unlabeled(big_n, s);
            let xu = gather_features(unlabeled.features(), &ui, uses_x);
            let fu = gather(unlabeled.predictions(), &ui);
            let u = kind.evaluate_owned(xu.view(), fu).ok()?.usable()?;
            let c = kind.evaluate_owned(x.view(), y).ok()?.usable()?;
            let a = kind.evaluate_owned(x.view(), f).ok()?.usable()?;
            Some(combine(lambda, u, c, a))
        },
    )
}

/// Resolves the multiplier for `cfg.lambda`, running the tuning bootstrap
/// when requested.
pub fn resolve_lambda(
    labeled: &LabeledDataset,
    unlabeled: &UnlabeledDataset,
    spec: &EstimandSpec,
    cfg: &BootstrapConfig,
    stream: &RngStream,
) -> Result<f64> {
    Ok(match cfg.lambda {
        LambdaMode::Fixed(l) => l,
        LambdaMode::Off => 1.0,
        LambdaMode::Tuned => {
            let l = tune_lambda_with(
                labeled,
                unlabeled,
                spec,
                cfg.tuning_iterations(),
                stream,
                cfg.execution,
            )?;
            if cfg.clip_lambda {
                l.clamp(0.0, 1.0)
            } else {
                l
            }
        }
    })
}

/// PPBoot percentile interval.
///
/// `stream` is the root for this call: tuning uses `stream/1/..` and the
/// main bootstrap `stream/2/b/retry`.
pub fn ppboot_interval(
    labeled: &LabeledDataset,
    unlabeled: &UnlabeledDataset,
    spec: &EstimandSpec,
    cfg: &BootstrapConfig,
    stream: &RngStream,
) -> Result<ConfidenceInterval> {
    cfg.validate()?;
    check_compatible(labeled, unlabeled)?;
    spec.kind.validate(labeled.dim())?;
    let lambda = resolve_lambda(labeled, unlabeled, spec, cfg, stream)?;
    let point = ppboot_point_estimate(labeled, unlabeled, spec, lambda)?;
    let draws = ppboot_replicates(labeled, unlabeled, &spec.kind, lambda, cfg, stream);
    ConfidenceInterval::from_draws(&draws, cfg.iterations, cfg.alpha, point, lambda)
}

/// Plug-in estimate of the variance-minimising multiplier,
///
/// ```text
/// λ̂ = Cov(θ̂(X*,f(X*)), θ̂(X*,Y*)) / (Var(θ̂(X*,f(X*))) + Var(θ̂(X̃*,f(X̃*))))
/// ```
///
/// over `tuning_iterations` fresh resamples drawn from `stream/1/b`.
pub fn tune_lambda(
    labeled: &LabeledDataset,
    unlabeled: &UnlabeledDataset,
    spec: &EstimandSpec,
    tuning_iterations: usize,
    stream: &RngStream,
) -> Result<f64> {
    tune_lambda_with(
        labeled,
        unlabeled,
        spec,
        tuning_iterations,
        stream,
        Execution::default(),
    )
}

pub fn tune_lambda_with(
    labeled: &LabeledDataset,
    unlabeled: &UnlabeledDataset,
    spec: &EstimandSpec,
    tuning_iterations: usize,
    stream: &RngStream,
    exec: Execution,
) -> Result<f64> {
    if tuning_iterations < 2 {
        return Err(Error::argument("tuning_B must be at least 2"));
    }
    check_compatible(labeled, unlabeled)?;
    let kind = &spec.kind;
    kind.validate(labeled.dim())?;
    let (n, big_n) = (labeled.len(), unlabeled.len());
    let uses_x = kind.uses_features();
    let base = stream.child(phase::TUNING);
    let triples = map_indices(tuning_iterations, exec, |b| {
        let s = base.child(b as u64);
        let li = draw_labeled(n, &s);
        let ui = draw_unlabeled(big_n, &s);
        let x = gather_features(labeled.features(), &li, uses_x);
        let xu = gather_features(unlabeled.features(), &ui, uses_x);
        let a = kind
            .evaluate_owned(x.view(), gather(labeled.predictions(), &li))
            .ok()?
            .usable()?;
        let c = kind
            .evaluate_owned(x.view(), gather(labeled.outcomes(), &li))
            .ok()?
            .usable()?;
        let u = kind
            .evaluate_owned(xu.view(), gather(unlabeled.predictions(), &ui))
            .ok()?
            .usable()?;
        Some((a, c, u))
    });
    let kept: Vec<(f64, f64, f64)> = triples.into_iter().flatten().collect();
    if kept.len() < 2 {
        return Err(Error::TuningFailure {
            retained: kept.len(),
        });
    }
    let a: Vec<f64> = kept.iter().map(|t| t.0).collect();
    let c: Vec<f64> = kept.iter().map(|t| t.1).collect();
    let u: Vec<f64> = kept.iter().map(|t| t.2).collect();
    let denominator = sample_variance(&a) + sample_variance(&u);
    if !(denominator >= TUNING_DENOMINATOR_FLOOR) {
        return Ok(0.0);
    }
    Ok(sample_covariance(&a, &c) / denominator)
}
