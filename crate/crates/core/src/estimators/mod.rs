//! Scalar estimators `θ̂(features, outcomes)`.
//!
//! Each estimator is applied interchangeably to true outcomes and to model
//! predictions. All of them are permutation invariant bit for bit: sums go
//! through [`ExactSum`](crate::numeric::ExactSum), quantiles through
//! selection, and counts are integers.

pub mod regression;

use ndarray::{ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::numeric::exact_sum;
use crate::resampling::{nearest_rank, select_rank};
use crate::{Error, Result};
use regression::Design;

/// The scalar functional being targeted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Estimand {
    Mean,
    Quantile {
        q: f64,
    },
    OlsCoef {
        target_index: usize,
        #[serde(default = "default_true")]
        intercept: bool,
    },
    LogisticCoef {
        target_index: usize,
        #[serde(default = "default_true")]
        intercept: bool,
    },
    /// Estimated on the log scale; report with [`ReportTransform::Exp`] to
    /// get the odds ratio itself.
    LogOddsRatio {
        exposure_column: usize,
    },
    PearsonCorr {
        feature_column: usize,
    },
}

fn default_true() -> bool {
    true
}

/// Monotone map applied to interval endpoints at reporting time only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportTransform {
    #[default]
    Identity,
    Exp,
    FisherZInverse,
}

impl ReportTransform {
    pub fn apply(self, v: f64) -> f64 {
        match self {
            ReportTransform::Identity => v,
            ReportTransform::Exp => v.exp(),
            ReportTransform::FisherZInverse => v.tanh(),
        }
    }
}

/// The target functional plus how its interval is reported. When `report`
/// is omitted in JSON it defaults per estimand (`exp` for the log odds
/// ratio, `identity` otherwise).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "RawEstimandSpec")]
pub struct EstimandSpec {
    pub kind: Estimand,
    pub report: ReportTransform,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEstimandSpec {
    kind: Estimand,
    #[serde(default)]
    report: Option<ReportTransform>,
}

impl From<RawEstimandSpec> for EstimandSpec {
    fn from(raw: RawEstimandSpec) -> Self {
        let mut spec = EstimandSpec::from(raw.kind);
        if let Some(r) = raw.report {
            spec.report = r;
        }
        spec
    }
}

impl From<Estimand> for EstimandSpec {
    fn from(kind: Estimand) -> Self {
        let report = match kind {
            Estimand::LogOddsRatio { .. } => ReportTransform::Exp,
            _ => ReportTransform::Identity,
        };
        Self { kind, report }
    }
}

impl EstimandSpec {
    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    /// Maps an interval on the estimation scale to the reporting scale.
    ///
    /// Correlation intervals are additionally intersected with `[-1, 1]`.
    pub fn report_interval(&self, lower: f64, upper: f64) -> (f64, f64) {
        let (mut lo, mut hi) = (self.report.apply(lower), self.report.apply(upper));
        if matches!(self.kind, Estimand::PearsonCorr { .. }) {
            lo = lo.clamp(-1.0, 1.0);
            hi = hi.clamp(-1.0, 1.0);
        }
        (lo, hi)
    }

    pub fn report_point(&self, point: f64) -> f64 {
        let v = self.report.apply(point);
        if matches!(self.kind, Estimand::PearsonCorr { .. }) {
            v.clamp(-1.0, 1.0)
        } else {
            v
        }
    }
}

impl Estimand {
    pub fn name(&self) -> &'static str {
        match self {
            Estimand::Mean => "mean",
            Estimand::Quantile { .. } => "quantile",
            Estimand::OlsCoef { .. } => "ols_coef",
            Estimand::LogisticCoef { .. } => "logistic_coef",
            Estimand::LogOddsRatio { .. } => "log_odds_ratio",
            Estimand::PearsonCorr { .. } => "pearson_corr",
        }
    }

    /// Checks parameters against a feature dimension `d`.
    pub fn validate(&self, d: usize) -> Result<()> {
        let check_col = |j: usize, what: &str| {
            if j >= d {
                Err(Error::argument(format!(
                    "{what} {j} is out of range for {d} feature column(s)"
                )))
            } else {
                Ok(())
            }
        };
        match *self {
            Estimand::Mean => Ok(()),
            Estimand::Quantile { q } => {
                if q > 0.0 && q < 1.0 {
                    Ok(())
                } else {
                    Err(Error::argument(format!("quantile level {q} is not in (0, 1)")))
                }
            }
            Estimand::OlsCoef { target_index, .. } | Estimand::LogisticCoef { target_index, .. } => {
                check_col(target_index, "target index")
            }
            Estimand::LogOddsRatio { exposure_column } => {
                check_col(exposure_column, "exposure column")
            }
            Estimand::PearsonCorr { feature_column } => check_col(feature_column, "feature column"),
        }
    }

    /// Whether the estimator reads the feature matrix at all.
    pub fn uses_features(&self) -> bool {
        !matches!(self, Estimand::Mean | Estimand::Quantile { .. })
    }

    /// Whether outcomes (and therefore predictions) must be 0/1.
    pub fn binary_outcomes(&self) -> bool {
        matches!(
            self,
            Estimand::LogisticCoef { .. } | Estimand::LogOddsRatio { .. }
        )
    }

    /// Evaluates the estimator. Argument errors (bad shapes, non-binary
    /// outcomes) are `Err`; numerically degenerate inputs come back flagged.
    pub fn evaluate(&self, features: ArrayView2<'_, f64>, outcomes: &[f64]) -> Result<Estimate> {
        if self.uses_features() && features.nrows() != outcomes.len() {
            return Err(Error::argument(format!(
                "{} feature rows but {} outcomes",
                features.nrows(),
                outcomes.len()
            )));
        }
        match *self {
            Estimand::Mean => est_mean(outcomes),
            Estimand::Quantile { q } => est_quantile(outcomes, q),
            Estimand::OlsCoef {
                target_index,
                intercept,
            } => est_ols_coef(features, outcomes, target_index, intercept),
            Estimand::LogisticCoef {
                target_index,
                intercept,
            } => est_logistic_coef(features, outcomes, target_index, intercept),
            Estimand::LogOddsRatio { exposure_column } => {
                self.validate(features.ncols())?;
                est_log_odds_ratio(features.column(exposure_column), outcomes)
            }
            Estimand::PearsonCorr { feature_column } => {
                est_pearson_corr(features, outcomes, feature_column)
            }
        }
    }

    /// Like [`evaluate`](Self::evaluate) but for an owned outcome buffer the
    /// caller no longer needs; saves a copy for quantiles.
    pub(crate) fn evaluate_owned(
        &self,
        features: ArrayView2<'_, f64>,
        mut outcomes: Vec<f64>,
    ) -> Result<Estimate> {
        match *self {
            Estimand::Quantile { q } => quantile_in_place(&mut outcomes, q),
            _ => self.evaluate(features, &outcomes),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateStatus {
    Ok,
    /// A usable value produced after a small-sample correction.
    Corrected(&'static str),
    /// No meaningful value; `value` is NaN.
    Degenerate(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub status: EstimateStatus,
}

impl Estimate {
    fn ok(value: f64) -> Self {
        Self {
            value,
            status: EstimateStatus::Ok,
        }
    }

    fn degenerate(reason: &'static str) -> Self {
        Self {
            value: f64::NAN,
            status: EstimateStatus::Degenerate(reason),
        }
    }

    /// The value unless the estimate is degenerate.
    pub fn usable(&self) -> Option<f64> {
        match self.status {
            EstimateStatus::Degenerate(_) => None,
            _ => Some(self.value),
        }
    }

    pub fn is_degenerate(&self) -> bool {
        matches!(self.status, EstimateStatus::Degenerate(_))
    }

    /// Converts a degenerate estimate into an error.
    pub fn require(self, context: &str) -> Result<f64> {
        match self.status {
            EstimateStatus::Degenerate(reason) => {
                Err(Error::Degenerate(format!("{context}: {reason}")))
            }
            _ => Ok(self.value),
        }
    }
}

pub fn est_mean(outcomes: &[f64]) -> Result<Estimate> {
    if outcomes.is_empty() {
        return Err(Error::argument("mean of an empty sample"));
    }
    Ok(Estimate::ok(
        exact_sum(outcomes.iter().copied()) / outcomes.len() as f64,
    ))
}

/// Nearest-rank upper quantile (same convention as the percentile method).
pub fn est_quantile(outcomes: &[f64], q: f64) -> Result<Estimate> {
    quantile_in_place(&mut outcomes.to_vec(), q)
}

fn quantile_in_place(buf: &mut [f64], q: f64) -> Result<Estimate> {
    if buf.is_empty() {
        return Err(Error::argument("quantile of an empty sample"));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::argument(format!("quantile level {q} is not in (0, 1)")));
    }
    let rank = nearest_rank(q, buf.len());
    Ok(Estimate::ok(select_rank(buf, rank)))
}

fn check_regression_shape(
    features: ArrayView2<'_, f64>,
    outcomes: &[f64],
    target_index: usize,
    intercept: bool,
) -> Result<()> {
    if features.nrows() != outcomes.len() {
        return Err(Error::argument(format!(
            "{} feature rows but {} outcomes",
            features.nrows(),
            outcomes.len()
        )));
    }
    if target_index >= features.ncols() {
        return Err(Error::argument(format!(
            "target index {target_index} is out of range for {} feature column(s)",
            features.ncols()
        )));
    }
    let p = features.ncols() + usize::from(intercept);
    if outcomes.len() < p {
        return Err(Error::argument(format!(
            "{} rows cannot identify {p} coefficients",
            outcomes.len()
        )));
    }
    Ok(())
}

/// Least-squares coefficient of feature `target_index`. The intercept, when
/// enabled, is an extra trailing column and never the target.
pub fn est_ols_coef(
    features: ArrayView2<'_, f64>,
    outcomes: &[f64],
    target_index: usize,
    intercept: bool,
) -> Result<Estimate> {
    check_regression_shape(features, outcomes, target_index, intercept)?;
    Ok(
        match regression::ols_fit(Design::new(features, intercept), outcomes) {
            Ok(beta) => Estimate::ok(beta[target_index]),
            Err(f) => Estimate::degenerate(f.reason()),
        },
    )
}

fn check_binary(values: impl IntoIterator<Item = f64>, what: &str) -> Result<()> {
    for v in values {
        if v != 0.0 && v != 1.0 {
            return Err(Error::argument(format!("{what} must be 0/1, found {v}")));
        }
    }
    Ok(())
}

/// Logistic-regression coefficient of feature `target_index` by IRLS.
pub fn est_logistic_coef(
    features: ArrayView2<'_, f64>,
    outcomes: &[f64],
    target_index: usize,
    intercept: bool,
) -> Result<Estimate> {
    check_binary(outcomes.iter().copied(), "logistic outcomes")?;
    check_regression_shape(features, outcomes, target_index, intercept)?;
    Ok(
        match regression::logistic_fit(Design::new(features, intercept), outcomes) {
            Ok(beta) => Estimate::ok(beta[target_index]),
            Err(f) => Estimate::degenerate(f.reason()),
        },
    )
}

/// Log odds ratio of a 2×2 table, with the Haldane–Anscombe +0.5
/// correction when any cell is empty.
pub fn est_log_odds_ratio(exposure: ArrayView1<'_, f64>, outcomes: &[f64]) -> Result<Estimate> {
    if exposure.len() != outcomes.len() {
        return Err(Error::argument("exposure and outcome lengths differ"));
    }
    if outcomes.len() < 4 {
        return Err(Error::argument(format!(
            "odds ratio needs at least 4 rows, got {}",
            outcomes.len()
        )));
    }
    check_binary(exposure.iter().copied(), "exposure")?;
    check_binary(outcomes.iter().copied(), "odds-ratio outcomes")?;
    let mut cells = [[0usize; 2]; 2];
    for (&e, &y) in exposure.iter().zip(outcomes) {
        cells[e as usize][y as usize] += 1;
    }
    let [[n00, n01], [n10, n11]] = cells;
    let zero_cell = cells.iter().flatten().any(|&c| c == 0);
    let shift = if zero_cell { 0.5 } else { 0.0 };
    let c = |k: usize| k as f64 + shift;
    // Written as a difference of logs so that swapping outcome labels
    // negates the value exactly.
    let value = (c(n11).ln() + c(n00).ln()) - (c(n10).ln() + c(n01).ln());
    Ok(Estimate {
        value,
        status: if zero_cell {
            EstimateStatus::Corrected("zero cell corrected")
        } else {
            EstimateStatus::Ok
        },
    })
}

/// Sample Pearson correlation between a feature column and the outcomes.
pub fn est_pearson_corr(
    features: ArrayView2<'_, f64>,
    outcomes: &[f64],
    feature_column: usize,
) -> Result<Estimate> {
    if feature_column >= features.ncols() {
        return Err(Error::argument(format!(
            "feature column {feature_column} is out of range for {} column(s)",
            features.ncols()
        )));
    }
    let x = features.column(feature_column);
    if x.len() != outcomes.len() {
        return Err(Error::argument("feature and outcome lengths differ"));
    }
    if outcomes.len() < 3 {
        return Err(Error::argument(format!(
            "correlation needs at least 3 rows, got {}",
            outcomes.len()
        )));
    }
    let m = outcomes.len() as f64;
    let mx = exact_sum(x.iter().copied()) / m;
    let my = exact_sum(outcomes.iter().copied()) / m;
    let sxx = exact_sum(x.iter().map(|&v| (v - mx) * (v - mx)));
    let syy = exact_sum(outcomes.iter().map(|&v| (v - my) * (v - my)));
    let sxy = exact_sum(x.iter().zip(outcomes).map(|(&a, &b)| (a - mx) * (b - my)));
    if sxx == 0.0 || syy == 0.0 {
        return Ok(Estimate::degenerate("constant variable"));
    }
    Ok(Estimate::ok(sxy / (sxx * syy).sqrt()))
}
