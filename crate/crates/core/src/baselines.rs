//! Comparison methods: classical CLT and percentile-bootstrap intervals, the
//! imputed approach, and a CLT interval of the prediction-powered mean.

use ndarray::ArrayView2;

use crate::dataset::{check_compatible, LabeledDataset, UnlabeledDataset};
use crate::estimators::{est_mean, EstimandSpec};
use crate::numeric::{normal_quantile, sample_variance};
use crate::ppboot::{gather, gather_features, BootstrapConfig, ConfidenceInterval};
use crate::resampling::{draw_labeled, draw_unlabeled, phase, run_replicates, RngStream};
use crate::{Error, Result};

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::argument(format!("alpha {alpha} is not in (0, 1)")))
    }
}

/// `mean ± z_{1−α/2}·sd/√n` with the unbiased standard deviation.
///
/// A constant sample gives a zero-width interval with
/// `degenerate_iterations = 1` as the flag.
pub fn classical_clt_mean_interval(outcomes: &[f64], alpha: f64) -> Result<ConfidenceInterval> {
    check_alpha(alpha)?;
    if outcomes.len() < 2 {
        return Err(Error::argument("CLT interval needs at least 2 outcomes"));
    }
    let m = est_mean(outcomes)?.value;
    let var = sample_variance(outcomes);
    let half = normal_quantile(1.0 - alpha / 2.0) * (var / outcomes.len() as f64).sqrt();
    Ok(ConfidenceInterval {
        lower: m - half,
        upper: m + half,
        point_estimate: m,
        lambda_used: 0.0,
        degenerate_iterations: usize::from(var == 0.0),
        alpha,
    })
}

/// Percentile bootstrap of `θ̂(X*, Y*)` on the labeled data alone.
///
/// Uses the same `stream/2/b/retry` labeled draws as
/// [`ppboot_interval`](crate::ppboot::ppboot_interval).
pub fn classical_bootstrap_interval(
    labeled: &LabeledDataset,
    spec: &EstimandSpec,
    cfg: &BootstrapConfig,
    stream: &RngStream,
) -> Result<ConfidenceInterval> {
    percentile_bootstrap(
        labeled.features(),
        labeled.outcomes(),
        spec,
        cfg,
        stream,
        draw_labeled,
    )
}

/// Classical percentile bootstrap applied to the unlabeled data as though
/// the predictions were outcomes.
pub fn imputed_interval(
    unlabeled: &UnlabeledDataset,
    spec: &EstimandSpec,
    cfg: &BootstrapConfig,
    stream: &RngStream,
) -> Result<ConfidenceInterval> {
    percentile_bootstrap(
        unlabeled.features(),
        unlabeled.predictions(),
        spec,
        cfg,
        stream,
        draw_unlabeled,
    )
}

fn percentile_bootstrap(
    features: ArrayView2<'_, f64>,
    outcomes: &[f64],
    spec: &EstimandSpec,
    cfg: &BootstrapConfig,
    stream: &RngStream,
    draw: fn(usize, &RngStream) -> Vec<usize>,
) -> Result<ConfidenceInterval> {
    cfg.validate()?;
    let kind = &spec.kind;
    kind.validate(features.ncols())?;
    let point = kind
        .evaluate(features, outcomes)?
        .require("estimate on the full sample")?;
    let n = outcomes.len();
    let uses_x = kind.uses_features();
    let draws = run_replicates(
        cfg.iterations,
        cfg.max_degenerate_retries,
        &stream.child(phase::MAIN),
        cfg.execution,
        |s| {
            let idx = draw(n, s);
            let x = gather_features(features, &idx, uses_x);
            kind.evaluate_owned(x.view(), gather(outcomes, &idx))
                .ok()?
                .usable()
        },
    );
    ConfidenceInterval::from_draws(&draws, cfg.iterations, cfg.alpha, point, 0.0)
}

/// Prediction-powered mean with a CLT interval:
/// centre `mean(f(X̃)) + mean(Y − f(X))`, half-width
/// `z_{1−α/2}·sqrt(var(f(X̃))/N + var(Y − f(X))/n)`.
pub fn ppi_mean_interval(
    labeled: &LabeledDataset,
    unlabeled: &UnlabeledDataset,
    alpha: f64,
) -> Result<ConfidenceInterval> {
    check_alpha(alpha)?;
    check_compatible(labeled, unlabeled)?;
    if labeled.len() < 2 || unlabeled.len() < 2 {
        return Err(Error::argument("PPI mean interval needs n >= 2 and N >= 2"));
    }
    let rectifier: Vec<f64> = labeled
        .outcomes()
        .iter()
        .zip(labeled.predictions())
        .map(|(y, f)| y - f)
        .collect();
    let center = est_mean(unlabeled.predictions())?.value + est_mean(&rectifier)?.value;
    let se = (sample_variance(unlabeled.predictions()) / unlabeled.len() as f64
        + sample_variance(&rectifier) / labeled.len() as f64)
        .sqrt();
    let half = normal_quantile(1.0 - alpha / 2.0) * se;
    Ok(ConfidenceInterval {
        lower: center - half,
        upper: center + half,
        point_estimate: center,
        lambda_used: 1.0,
        degenerate_iterations: 0,
        alpha,
    })
}
