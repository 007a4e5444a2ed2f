//! Synthetic fully-labeled datasets with a prediction column.
//!
//! Rows come from `stream/0`, predictions from `stream/1`, so swapping the
//! prediction model leaves the data itself unchanged.

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Bernoulli, Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::estimators::regression::sigmoid;
use crate::numeric::{exact_sum, sample_variance};
use crate::resampling::RngStream;
use crate::{Error, Result};

/// Data-generating process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Dgp {
    /// `Y = intercept + X·coef + ε`, `X` standard normal, `ε ~ N(0, noise_sd²)`.
    GaussianLinear {
        coef: Vec<f64>,
        noise_sd: f64,
        #[serde(default)]
        intercept: f64,
    },
    /// `Y ~ Bernoulli(p)` with one uniform feature independent of `Y`.
    BernoulliMean { p: f64 },
    /// Binary exposure (the single feature) and binary outcome with joint
    /// cell probabilities `p_{xy}`.
    BinaryPair {
        p11: f64,
        p10: f64,
        p01: f64,
        p00: f64,
    },
    /// `Y ~ Bernoulli(sigmoid(intercept + X·coef))`, `X` standard normal.
    Logistic {
        coef: Vec<f64>,
        #[serde(default)]
        intercept: f64,
    },
}

/// How the prediction column is produced from the outcomes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PredictionModel {
    /// Calibrated so the sample correlation with `Y` is about `rho`. Binary
    /// outcomes are flipped at random; continuous ones get Gaussian noise.
    NoisyTruth { rho: f64 },
    /// `Y + offset + N(0, noise_sd²)`.
    Biased {
        offset: f64,
        #[serde(default)]
        noise_sd: f64,
    },
    /// Independent draws from the outcome marginal.
    PureNoise,
    /// Predictions equal to the outcomes.
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub dgp: Dgp,
    pub predictions: PredictionModel,
    pub total_rows: usize,
}

fn check_prob(name: &str, p: f64, open: bool) -> Result<()> {
    let ok = if open { p > 0.0 && p < 1.0 } else { (0.0..=1.0).contains(&p) };
    if ok {
        Ok(())
    } else {
        Err(Error::argument(format!("{name} = {p} is not a valid probability")))
    }
}

fn check_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::argument(format!("{name} must be finite")))
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.total_rows < 10 {
            return Err(Error::argument("total_rows must be at least 10"));
        }
        match &self.dgp {
            Dgp::GaussianLinear { coef, noise_sd, intercept } => {
                if coef.is_empty() {
                    return Err(Error::argument("gaussian_linear needs at least one coefficient"));
                }
                coef.iter().try_for_each(|&c| check_finite("coef", c))?;
                check_finite("intercept", *intercept)?;
                if !(*noise_sd >= 0.0 && noise_sd.is_finite()) {
                    return Err(Error::argument("noise_sd must be a finite non-negative number"));
                }
            }
            Dgp::BernoulliMean { p } => check_prob("p", *p, true)?,
            Dgp::BinaryPair { p11, p10, p01, p00 } => {
                for (name, p) in [("p11", p11), ("p10", p10), ("p01", p01), ("p00", p00)] {
                    check_prob(name, *p, true)?;
                }
                if (p11 + p10 + p01 + p00 - 1.0).abs() > 1e-9 {
                    return Err(Error::argument("binary_pair probabilities must sum to 1"));
                }
            }
            Dgp::Logistic { coef, intercept } => {
                if coef.is_empty() {
                    return Err(Error::argument("logistic needs at least one coefficient"));
                }
                coef.iter().try_for_each(|&c| check_finite("coef", c))?;
                check_finite("intercept", *intercept)?;
            }
        }
        match self.predictions {
            PredictionModel::NoisyTruth { rho } => {
                if !(rho > 0.0 && rho <= 1.0) {
                    return Err(Error::argument(format!("rho = {rho} must be in (0, 1]")));
                }
            }
            PredictionModel::Biased { offset, noise_sd } => {
                check_finite("offset", offset)?;
                if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
                    return Err(Error::argument("noise_sd must be a finite non-negative number"));
                }
            }
            PredictionModel::PureNoise | PredictionModel::Oracle => {}
        }
        Ok(())
    }

    fn binary(&self) -> bool {
        !matches!(self.dgp, Dgp::GaussianLinear { .. })
    }
}

fn normal_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.sample(StandardNormal))
}

fn linear(x: &Array2<f64>, coef: &[f64], intercept: f64) -> Vec<f64> {
    x.outer_iter()
        .map(|row| intercept + row.iter().zip(coef).map(|(a, b)| a * b).sum::<f64>())
        .collect()
}

fn draw_rows(spec: &SyntheticSpec, rng: &mut impl Rng) -> (Array2<f64>, Vec<f64>) {
    let n = spec.total_rows;
    match &spec.dgp {
        Dgp::GaussianLinear { coef, noise_sd, intercept } => {
            let x = normal_matrix(n, coef.len(), rng);
            let mut y = linear(&x, coef, *intercept);
            let noise = Normal::new(0.0, *noise_sd).expect("validated sd");
            y.iter_mut().for_each(|v| *v += noise.sample(rng));
            (x, y)
        }
        Dgp::BernoulliMean { p } => {
            let coin = Bernoulli::new(*p).expect("validated p");
            let mut x = Array2::zeros((n, 1));
            let mut y = Vec::with_capacity(n);
            for i in 0..n {
                x[[i, 0]] = rng.random::<f64>();
                y.push(f64::from(u8::from(coin.sample(rng))));
            }
            (x, y)
        }
        Dgp::BinaryPair { p11, p10, p01, .. } => {
            let mut x = Array2::zeros((n, 1));
            let mut y = Vec::with_capacity(n);
            for i in 0..n {
                let u: f64 = rng.random();
                let (xe, ye) = if u < *p11 {
                    (1.0, 1.0)
                } else if u < p11 + p10 {
                    (1.0, 0.0)
                } else if u < p11 + p10 + p01 {
                    (0.0, 1.0)
                } else {
                    (0.0, 0.0)
                };
                x[[i, 0]] = xe;
                y.push(ye);
            }
            (x, y)
        }
        Dgp::Logistic { coef, intercept } => {
            let x = normal_matrix(n, coef.len(), rng);
            let y = linear(&x, coef, *intercept)
                .into_iter()
                .map(|t| f64::from(u8::from(rng.random::<f64>() < sigmoid(t))))
                .collect();
            (x, y)
        }
    }
}

/// Flip probability `ε` making `corr(Y xor Z, Y) = rho` for `Z ~ Bernoulli(ε)`
/// when `Y` has mean `p`.
fn flip_rate(p: f64, rho: f64) -> f64 {
    let corr = |eps: f64| {
        let q = p * (1.0 - eps) + (1.0 - p) * eps;
        (p * (1.0 - p)).sqrt() * (1.0 - 2.0 * eps) / (q * (1.0 - q)).sqrt()
    };
    let (mut lo, mut hi) = (0.0, 0.5);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if corr(mid) > rho {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn draw_predictions(spec: &SyntheticSpec, y: &[f64], rng: &mut impl Rng) -> Vec<f64> {
    let mean = exact_sum(y.iter().copied()) / y.len() as f64;
    let sd = sample_variance(y).sqrt();
    match spec.predictions {
        PredictionModel::Oracle => y.to_vec(),
        PredictionModel::Biased { offset, noise_sd } => {
            let noise = Normal::new(0.0, noise_sd).expect("validated sd");
            y.iter().map(|v| v + offset + noise.sample(rng)).collect()
        }
        PredictionModel::PureNoise if spec.binary() => {
            let coin = Bernoulli::new(mean.clamp(0.0, 1.0)).expect("mean of 0/1 values");
            y.iter().map(|_| f64::from(u8::from(coin.sample(rng)))).collect()
        }
        PredictionModel::PureNoise => {
            let marginal = Normal::new(mean, sd).expect("finite sd");
            y.iter().map(|_| marginal.sample(rng)).collect()
        }
        PredictionModel::NoisyTruth { rho } if rho >= 1.0 => y.to_vec(),
        PredictionModel::NoisyTruth { rho } if spec.binary() => {
            let eps = if mean > 0.0 && mean < 1.0 { flip_rate(mean, rho) } else { 0.0 };
            y.iter()
                .map(|&v| if rng.random::<f64>() < eps { 1.0 - v } else { v })
                .collect()
        }
        PredictionModel::NoisyTruth { rho } => {
            let noise = Normal::new(0.0, sd * (1.0 / (rho * rho) - 1.0).sqrt()).expect("finite sd");
            y.iter().map(|v| v + noise.sample(rng)).collect()
        }
    }
}

/// Draws a fully labeled dataset (features, outcomes and predictions).
pub fn generate_synthetic(spec: &SyntheticSpec, stream: &RngStream) -> Result<LabeledDataset> {
    spec.validate()?;
    let (x, y) = draw_rows(spec, &mut stream.child(0).rng());
    let f = draw_predictions(spec, &y, &mut stream.child(1).rng());
    LabeledDataset::new(x, y, f)
}
