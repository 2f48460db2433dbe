//! Binary logistic regression trained by fixed-iteration full-batch gradient descent.
//!
//! Training starts from all-zero parameters and runs exactly `iterations` steps with a
//! constant step size, so a fit is a pure function of its inputs and reproducible to
//! the bit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Dataset, Metric};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub learning_rate: f64,
    pub iterations: usize,
    pub l2_penalty: f64,
    pub fit_intercept: bool,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            iterations: 500,
            l2_penalty: 0.0,
            fit_intercept: true,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("iterations must be at least 1".into()));
        }
        if !(self.l2_penalty >= 0.0 && self.l2_penalty.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "l2_penalty must be non-negative, got {}",
                self.l2_penalty
            )));
        }
        Ok(())
    }
}

/// Fitted logistic-regression parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub config: LearnerConfig,
}

impl Model {
    /// The all-zero model, which predicts probability 0.5 everywhere.
    pub fn zeros(dim: usize, config: LearnerConfig) -> Self {
        Self {
            weights: vec![0.0; dim],
            intercept: 0.0,
            config,
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub(crate) fn logit(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.intercept
    }

    pub(crate) fn predict_label(&self, x: &[f64]) -> u8 {
        u8::from(sigmoid(self.logit(x)) >= 0.5)
    }

    /// One gradient step on a single example.
    pub(crate) fn sgd_step(&mut self, x: &[f64], y: u8, step: f64) {
        let residual = sigmoid(self.logit(x)) - f64::from(y);
        let l2 = self.config.l2_penalty;
        for (w, &xi) in self.weights.iter_mut().zip(x) {
            *w -= step * (residual * xi + l2 * *w);
        }
        if self.config.fit_intercept {
            self.intercept -= step * residual;
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Numerically stable logistic function.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

// Largest and smallest doubles strictly inside (0, 1).
const PROB_MAX: f64 = 1.0 - f64::EPSILON / 2.0;
const PROB_MIN: f64 = f64::MIN_POSITIVE;

/// Fits a model on every row of `data`.
pub fn train(data: &Dataset, config: &LearnerConfig) -> Result<Model> {
    let all: Vec<usize> = (0..data.len()).collect();
    train_rows(data, &all, config)
}

/// Fits a model on the listed rows of `data`, visiting them in the given order.
///
/// Produces bit-identical results to `train(&data.select(rows), config)`.
pub fn train_rows(data: &Dataset, rows: &[usize], config: &LearnerConfig) -> Result<Model> {
    config.validate()?;
    if rows.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let dim = data.dim();
    let n = rows.len() as f64;
    let mut model = Model::zeros(dim, *config);
    let mut grad = vec![0.0; dim];

    for _ in 0..config.iterations {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut grad_b = 0.0;
        for &i in rows {
            let x = data.row(i);
            let residual = sigmoid(model.logit(x)) - f64::from(data.labels()[i]);
            for (g, &xi) in grad.iter_mut().zip(x) {
                *g += residual * xi;
            }
            grad_b += residual;
        }
        for (w, g) in model.weights.iter_mut().zip(&grad) {
            *w -= config.learning_rate * (g / n + config.l2_penalty * *w);
        }
        if config.fit_intercept {
            model.intercept -= config.learning_rate * grad_b / n;
        }
    }
    Ok(model)
}

/// Regularized mean log-loss of `model` on `data`.
pub fn loss(model: &Model, data: &Dataset) -> f64 {
    let n = data.len() as f64;
    let nll: f64 = data
        .rows()
        .zip(data.labels())
        .map(|(x, &y)| {
            let z = model.logit(x);
            // log(1 + e^z) - y z, computed without overflow
            let softplus = if z > 0.0 {
                z + (-z).exp().ln_1p()
            } else {
                z.exp().ln_1p()
            };
            softplus - f64::from(y) * z
        })
        .sum();
    nll / n + 0.5 * model.config.l2_penalty * dot(&model.weights, &model.weights)
}

/// Positive-class probabilities for row-major `features` with `model.dim()` columns.
pub fn predict_proba(model: &Model, features: &[f64]) -> Result<Vec<f64>> {
    let dim = model.dim();
    if dim == 0 || !features.len().is_multiple_of(dim) {
        return Err(Error::DimensionMismatch(format!(
            "{} feature values do not form rows of width {dim}",
            features.len()
        )));
    }
    Ok(features
        .chunks_exact(dim)
        .map(|x| sigmoid(model.logit(x)).clamp(PROB_MIN, PROB_MAX))
        .collect())
}

/// Confusion-matrix counts for the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn from_predictions(predicted: impl IntoIterator<Item = u8>, actual: &[u8]) -> Self {
        let mut c = Confusion::default();
        for (p, &y) in predicted.into_iter().zip(actual) {
            match (p, y) {
                (1, 1) => c.tp += 1,
                (1, _) => c.fp += 1,
                (_, 1) => c.fn_ += 1,
                _ => c.tn += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// Metric value; precision and recall are 0.0 when their denominator is zero.
    pub fn metric(&self, metric: Metric) -> f64 {
        let ratio = |num: usize, den: usize| {
            if den == 0 {
                0.0
            } else {
                num as f64 / den as f64
            }
        };
        match metric {
            Metric::Accuracy => ratio(self.tp + self.tn, self.total()),
            Metric::Precision => ratio(self.tp, self.tp + self.fp),
            Metric::Recall => ratio(self.tp, self.tp + self.fn_),
        }
    }
}

/// Confusion counts of `model` on `data`, predicting 1 iff probability ≥ 0.5.
pub fn confusion(model: &Model, data: &Dataset) -> Result<Confusion> {
    if data.is_empty() {
        return Err(Error::EmptyEvaluationSet);
    }
    if data.dim() != model.dim() {
        return Err(Error::DimensionMismatch(format!(
            "model has {} weights, evaluation set has {} features",
            model.dim(),
            data.dim()
        )));
    }
    Ok(Confusion::from_predictions(
        data.rows().map(|x| model.predict_label(x)),
        data.labels(),
    ))
}

pub fn score(model: &Model, data: &Dataset, metric: Metric) -> Result<f64> {
    Ok(confusion(model, data)?.metric(metric))
}

/// Score of the predictor that outputs `class` for every row of `data`.
pub fn constant_score(data: &Dataset, class: u8, metric: Metric) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyEvaluationSet);
    }
    Ok(Confusion::from_predictions(std::iter::repeat(class), data.labels()).metric(metric))
}
