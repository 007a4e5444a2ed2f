//! Cross-fitted PPBoot for when no pre-trained model is available.
//!
//! The labeled rows are split into `K` folds. Model `j` is trained on every
//! labeled row outside fold `j` and predicts the rows inside it; unlabeled
//! rows get the average of all `K` models. The resulting prediction columns
//! are fixed before PPBoot runs, so nothing is refit per resample.

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::{LabeledDataset, Observations, UnlabeledDataset};
use crate::estimators::regression::{self, sigmoid, Design};
use crate::estimators::EstimandSpec;
use crate::par::{map_indices, Execution};
use crate::ppboot::{ppboot_interval, BootstrapConfig, ConfidenceInterval};
use crate::resampling::{phase, RngStream};
use crate::{Error, Result};

pub const DEFAULT_FOLDS: usize = 10;
pub const DEFAULT_SPLIT_FRACTION: f64 = 0.5;

/// A fitted predictor.
pub trait Predictor: Send + Sync {
    fn predict(&self, features: ArrayView2<'_, f64>) -> Vec<f64>;
}

/// Anything that can fit a [`Predictor`] to labeled rows.
pub trait Learner: Sync {
    fn fit(&self, features: ArrayView2<'_, f64>, outcomes: &[f64]) -> Result<Box<dyn Predictor>>;
}

/// Built-in learners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum LearnerSpec {
    LinearLeastSquares {
        #[serde(default = "default_true")]
        intercept: bool,
    },
    LogisticIrls {
        #[serde(default = "default_true")]
        intercept: bool,
        /// Predict 0/1 labels (threshold 0.5) rather than probabilities.
        #[serde(default)]
        labels: bool,
    },
    Knn {
        k: usize,
    },
}

fn default_true() -> bool {
    true
}

impl LearnerSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            LearnerSpec::Knn { k: 0 } => Err(Error::argument("knn needs k >= 1")),
            _ => Ok(()),
        }
    }
}

struct LinearModel {
    beta: Vec<f64>,
    intercept: bool,
}

impl Predictor for LinearModel {
    fn predict(&self, x: ArrayView2<'_, f64>) -> Vec<f64> {
        let design = Design::new(x, self.intercept);
        (0..x.nrows())
            .map(|i| design.linear_predictor(i, &self.beta))
            .collect()
    }
}

struct LogisticModel {
    beta: Vec<f64>,
    intercept: bool,
    labels: bool,
}

impl Predictor for LogisticModel {
    fn predict(&self, x: ArrayView2<'_, f64>) -> Vec<f64> {
        let design = Design::new(x, self.intercept);
        (0..x.nrows())
            .map(|i| {
                let p = sigmoid(design.linear_predictor(i, &self.beta));
                if self.labels {
                    f64::from(u8::from(p >= 0.5))
                } else {
                    p
                }
            })
            .collect()
    }
}

/// Mean outcome of the `k` nearest training rows (Euclidean); ties in
/// distance go to the lower training index.
struct KnnModel {
    x: Array2<f64>,
    y: Vec<f64>,
    k: usize,
}

impl Predictor for KnnModel {
    fn predict(&self, q: ArrayView2<'_, f64>) -> Vec<f64> {
        let k = self.k.min(self.y.len());
        let mut dist: Vec<(f64, usize)> = Vec::with_capacity(self.y.len());
        q.outer_iter()
            .map(|row| {
                dist.clear();
                dist.extend(self.x.outer_iter().enumerate().map(|(i, t)| {
                    let d: f64 = t.iter().zip(row.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                    (d, i)
                }));
                let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
                if k < dist.len() {
                    dist.select_nth_unstable_by(k - 1, cmp);
                }
                let mut nearest = dist[..k].to_vec();
                nearest.sort_by(cmp);
                nearest.iter().map(|&(_, i)| self.y[i]).sum::<f64>() / k as f64
            })
            .collect()
    }
}

impl Learner for LearnerSpec {
    fn fit(&self, x: ArrayView2<'_, f64>, y: &[f64]) -> Result<Box<dyn Predictor>> {
        self.validate()?;
        match *self {
            LearnerSpec::LinearLeastSquares { intercept } => {
                let design = Design::new(x, intercept);
                if y.len() < design.cols() {
                    return Err(Error::argument("too few rows for a linear fit"));
                }
                let beta = regression::ols_fit(design, y)
                    .map_err(|f| Error::Degenerate(f.reason().to_owned()))?;
                Ok(Box::new(LinearModel { beta, intercept }))
            }
            LearnerSpec::LogisticIrls { intercept, labels } => {
                if y.iter().any(|&v| v != 0.0 && v != 1.0) {
                    return Err(Error::argument("logistic learner needs 0/1 outcomes"));
                }
                let beta = regression::logistic_fit(Design::new(x, intercept), y)
                    .map_err(|f| Error::Degenerate(f.reason().to_owned()))?;
                Ok(Box::new(LogisticModel {
                    beta,
                    intercept,
                    labels,
                }))
            }
            LearnerSpec::Knn { k } => Ok(Box::new(KnnModel {
                x: x.to_owned(),
                y: y.to_vec(),
                k,
            })),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    folds: usize,
    fold_of: Vec<usize>,
}

impl FoldAssignment {
    pub fn folds(&self) -> usize {
        self.folds
    }

    pub fn fold_of(&self) -> &[usize] {
        &self.fold_of
    }

    /// Rows outside fold `j`, ascending.
    pub fn training_rows(&self, j: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] != j).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.folds];
        for &f in &self.fold_of {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Uniformly random balanced partition of `0..n` into `k` folds.
pub fn partition_folds(n: usize, k: usize, stream: &RngStream) -> Result<FoldAssignment> {
    if k < 2 || k > n {
        return Err(Error::argument(format!(
            "fold count {k} must satisfy 2 <= K <= n = {n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream.rng());
    let mut fold_of = vec![0; n];
    for (pos, &row) in order.iter().enumerate() {
        fold_of[row] = pos % k;
    }
    Ok(FoldAssignment { folds: k, fold_of })
}

pub struct FoldModels {
    models: Vec<Box<dyn Predictor>>,
}

impl FoldModels {
    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn model(&self, j: usize) -> &dyn Predictor {
        self.models[j].as_ref()
    }

    /// Average prediction `f̄(x) = (1/K) Σ_j f^(j)(x)`.
    pub fn predict_mean(&self, x: ArrayView2<'_, f64>) -> Vec<f64> {
        let k = self.models.len() as f64;
        let mut acc = vec![0.0; x.nrows()];
        for m in &self.models {
            for (a, p) in acc.iter_mut().zip(m.predict(x)) {
                *a += p;
            }
        }
        acc.iter_mut().for_each(|a| *a /= k);
        acc
    }
}

/// Trains model `j` on all labeled rows not in fold `j`.
pub fn train_fold_models(
    labeled: &Observations,
    folds: &FoldAssignment,
    learner: &dyn Learner,
    exec: Execution,
) -> Result<FoldModels> {
    if folds.fold_of.len() != labeled.len() {
        return Err(Error::argument("fold assignment does not match the labeled rows"));
    }
    let fitted = map_indices(folds.folds, exec, |j| {
        let rows = folds.training_rows(j);
        if rows.is_empty() {
            return Err(Error::Training {
                fold: j,
                message: "empty training complement".into(),
            });
        }
        let x = labeled.features().select(Axis(0), &rows);
        let y: Vec<f64> = rows.iter().map(|&i| labeled.outcomes()[i]).collect();
        learner.fit(x.view(), &y).map_err(|e| Error::Training {
            fold: j,
            message: e.to_string(),
        })
    });
    Ok(FoldModels {
        models: fitted.into_iter().collect::<Result<_>>()?,
    })
}

/// Held-out predictions for labeled rows and averaged predictions for
/// unlabeled rows.
pub fn assemble_cross_predictions(
    labeled: &Observations,
    unlabeled: ArrayView2<'_, f64>,
    folds: &FoldAssignment,
    models: &FoldModels,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if models.len() != folds.folds {
        return Err(Error::argument("model count does not match the fold count"));
    }
    let mut labeled_pred = vec![0.0; labeled.len()];
    for j in 0..folds.folds {
        let rows: Vec<usize> = (0..labeled.len()).filter(|&i| folds.fold_of[i] == j).collect();
        if rows.is_empty() {
            continue;
        }
        let x = labeled.features().select(Axis(0), &rows);
        for (&i, p) in rows.iter().zip(models.model(j).predict(x.view())) {
            labeled_pred[i] = p;
        }
    }
    Ok((labeled_pred, models.predict_mean(unlabeled)))
}

/// Options for the two model-fitting variants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossfitConfig {
    #[serde(default = "default_folds")]
    pub folds: usize,
    pub learner: LearnerSpec,
    /// Fraction of labeled rows spent on training in the data-splitting
    /// baseline.
    #[serde(default = "default_split_fraction")]
    pub split_fraction: f64,
}

fn default_folds() -> usize {
    DEFAULT_FOLDS
}
fn default_split_fraction() -> f64 {
    DEFAULT_SPLIT_FRACTION
}

impl CrossfitConfig {
    pub fn new(learner: LearnerSpec) -> Self {
        Self {
            folds: DEFAULT_FOLDS,
            learner,
            split_fraction: DEFAULT_SPLIT_FRACTION,
        }
    }
}

fn build_datasets(
    labeled: Observations,
    unlabeled: ArrayView2<'_, f64>,
    labeled_pred: Vec<f64>,
    unlabeled_pred: Vec<f64>,
) -> Result<(LabeledDataset, UnlabeledDataset)> {
    let l = labeled.with_predictions(labeled_pred).map_err(|e| match e {
        Error::Validation(m) => Error::Degenerate(format!("fold model predictions: {m}")),
        other => other,
    })?;
    let u = UnlabeledDataset::new(unlabeled.to_owned(), unlabeled_pred).map_err(|e| match e {
        Error::Validation(m) => Error::Degenerate(format!("averaged model predictions: {m}")),
        other => other,
    })?;
    Ok((l, u))
}

/// The cross-fitted prediction columns for a labeled/unlabeled pair.
///
/// The fold partition is drawn from `stream/4`.
pub fn cross_fit_datasets(
    labeled: &Observations,
    unlabeled: ArrayView2<'_, f64>,
    folds: usize,
    learner: &dyn Learner,
    stream: &RngStream,
    exec: Execution,
) -> Result<(LabeledDataset, UnlabeledDataset)> {
    if unlabeled.ncols() != labeled.features().ncols() {
        return Err(Error::Validation("labeled and unlabeled feature counts differ".into()));
    }
    let assignment = partition_folds(labeled.len(), folds, &stream.child(phase::FOLDS))?;
    let models = train_fold_models(labeled, &assignment, learner, exec)?;
    let (lp, up) = assemble_cross_predictions(labeled, unlabeled, &assignment, &models)?;
    build_datasets(labeled.clone(), unlabeled, lp, up)
}

/// Cross-PPBoot interval: cross-fit the predictions, then run PPBoot on
/// them with the same `stream`.
pub fn cross_ppboot_interval(
    labeled: &Observations,
    unlabeled: ArrayView2<'_, f64>,
    spec: &EstimandSpec,
    cfg: &BootstrapConfig,
    folds: usize,
    learner: &dyn Learner,
    stream: &RngStream,
) -> Result<ConfidenceInterval> {
    cfg.validate()?;
    let (l, u) = cross_fit_datasets(labeled, unlabeled, folds, learner, stream, cfg.execution)?;
    ppboot_interval(&l, &u, spec, cfg, stream)
}

/// The data-splitting baseline: train one model on a random `fraction` of
/// the labeled rows (chosen from `stream/5`), then run PPBoot on the rest.
pub fn split_ppboot_interval(
    labeled: &Observations,
    unlabeled: ArrayView2<'_, f64>,
    spec: &EstimandSpec,
    cfg: &BootstrapConfig,
    fraction: f64,
    learner: &dyn Learner,
    stream: &RngStream,
) -> Result<ConfidenceInterval> {
    cfg.validate()?;
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::argument(format!("split fraction {fraction} is not in (0, 1)")));
    }
    let n = labeled.len();
    let train_n = ((fraction * n as f64).round() as usize).clamp(1, n.saturating_sub(2));
    if train_n < 1 || n - train_n < 2 {
        return Err(Error::argument(format!(
            "cannot split {n} labeled rows into a training part and >= 2 inference rows"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream.child(phase::MODEL_SPLIT).rng());
    let (train, infer) = order.split_at(train_n);
    let mut train = train.to_vec();
    let mut infer = infer.to_vec();
    train.sort_unstable();
    infer.sort_unstable();

    let pick = |rows: &[usize]| {
        Observations::new(
            labeled.features().select(Axis(0), rows),
            rows.iter().map(|&i| labeled.outcomes()[i]).collect(),
        )
    };
    let train_obs = pick(&train)?;
    let model = learner
        .fit(train_obs.features(), train_obs.outcomes())
        .map_err(|e| Error::Training {
            fold: 0,
            message: e.to_string(),
        })?;
    let infer_obs = pick(&infer)?;
    let lp = model.predict(infer_obs.features());
    let up = model.predict(unlabeled);
    let (l, u) = build_datasets(infer_obs, unlabeled, lp, up)?;
    ppboot_interval(&l, &u, spec, cfg, stream)
}
