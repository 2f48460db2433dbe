//! Data valuation: exact Shapley enumeration, truncated Monte Carlo (TMC) Shapley,
//! gradient Shapley (G-Shapley) and leave-one-out values.
//!
//! All estimators value training points against a [`Utility`], the score `V(S)` of a
//! learner trained on subset `S`. [`ModelUtility`] is the production utility: a logistic
//! regression fitted on `S` and scored on a validation set, with the empty set and
//! single-class subsets scored by a constant predictor.
//!
//! Permutation estimators draw permutation `t` (1-based) from its own random stream
//! keyed by `(seed, t)` and evaluate permutations in parallel batches of
//! `convergence_window`. Batches are reduced in permutation order, so results do not
//! depend on the number of worker threads.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learner::{self, LearnerConfig, Model};
use crate::rng::{Domain, Stream};
use crate::types::{Dataset, Metric};

/// Largest training set accepted by [`exact_shapley`].
pub const MAX_EXACT_POINTS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "exact")]
    Exact,
    #[serde(rename = "tmc")]
    Tmc,
    #[serde(rename = "g-shapley")]
    GShapley,
    #[serde(rename = "loo")]
    Loo,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::Tmc => "tmc",
            Method::GShapley => "g-shapley",
            Method::Loo => "loo",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exact" => Ok(Method::Exact),
            "tmc" => Ok(Method::Tmc),
            "g-shapley" | "gshapley" | "g_shapley" => Ok(Method::GShapley),
            "loo" => Ok(Method::Loo),
            other => Err(Error::InvalidConfig(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValuationConfig {
    pub method: Method,
    pub metric: Metric,
    /// Absolute score gap to `V(D)` below which a permutation scan stops.
    pub truncation_tolerance: f64,
    pub convergence_threshold: f64,
    pub convergence_window: usize,
    pub min_permutations: usize,
    pub max_permutations: usize,
    pub seed: u64,
    /// Step size of the single-example updates used by G-Shapley.
    pub g_learning_rate: f64,
    pub learner: LearnerConfig,
}

impl Default for ValuationConfig {
    fn default() -> Self {
        Self {
            method: Method::Tmc,
            metric: Metric::Accuracy,
            truncation_tolerance: 0.01,
            convergence_threshold: 0.05,
            convergence_window: 100,
            min_permutations: 100,
            max_permutations: 10_000,
            seed: 0,
            g_learning_rate: 0.1,
            learner: LearnerConfig::default(),
        }
    }
}

impl ValuationConfig {
    pub fn validate(&self) -> Result<()> {
        self.learner.validate()?;
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.truncation_tolerance.is_nan() || self.truncation_tolerance < 0.0 {
            return bad(format!(
                "truncation_tolerance must be non-negative, got {}",
                self.truncation_tolerance
            ));
        }
        if self.convergence_threshold.is_nan() || self.convergence_threshold <= 0.0 {
            return bad(format!(
                "convergence_threshold must be positive, got {}",
                self.convergence_threshold
            ));
        }
        if self.convergence_window < 2 {
            return bad("convergence_window must be at least 2".into());
        }
        if self.min_permutations == 0 || self.min_permutations > self.max_permutations {
            return bad(format!(
                "need 1 <= min_permutations ({}) <= max_permutations ({})",
                self.min_permutations, self.max_permutations
            ));
        }
        if !(self.g_learning_rate > 0.0 && self.g_learning_rate.is_finite()) {
            return bad(format!(
                "g_learning_rate must be positive, got {}",
                self.g_learning_rate
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointValue {
    pub id: String,
    pub value: f64,
}

/// Per-point values with the run's diagnostics. `values` follows training-set order.
#[derive(Debug, Clone, PartialEq)]
pub struct ValuationResult {
    pub method: Method,
    pub metric: Metric,
    pub values: Vec<PointValue>,
    pub permutations_used: usize,
    pub converged: bool,
    pub full_score: f64,
    pub empty_score: f64,
    pub seed: u64,
}

impl ValuationResult {
    pub fn value_of(&self, id: &str) -> Option<f64> {
        self.values.iter().find(|v| v.id == id).map(|v| v.value)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.values.iter().map(|v| v.id.as_str())
    }

    pub fn raw_values(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.value).collect()
    }

    pub fn total(&self) -> f64 {
        self.values.iter().map(|v| v.value).sum()
    }
}

/// A cooperative game over `size()` players, indexed `0..size()`.
pub trait Utility: Sync {
    fn size(&self) -> usize;

    /// `V(S)` for the coalition `members`, given in ascending order.
    fn value(&self, members: &[usize]) -> Result<f64>;
}

/// `V(S)`: validation score of a logistic regression trained on `S`.
pub struct ModelUtility<'a> {
    pub train: &'a Dataset,
    pub validation: &'a Dataset,
    pub metric: Metric,
    pub learner: LearnerConfig,
}

impl<'a> ModelUtility<'a> {
    pub fn new(train: &'a Dataset, validation: &'a Dataset, config: &ValuationConfig) -> Result<Self> {
        if validation.is_empty() {
            return Err(Error::EmptyEvaluationSet);
        }
        if train.dim() != validation.dim() {
            return Err(Error::DimensionMismatch(format!(
                "training set has {} features, validation set has {}",
                train.dim(),
                validation.dim()
            )));
        }
        Ok(Self {
            train,
            validation,
            metric: config.metric,
            learner: config.learner,
        })
    }
}

impl Utility for ModelUtility<'_> {
    fn size(&self) -> usize {
        self.train.len()
    }

    fn value(&self, members: &[usize]) -> Result<f64> {
        score_rows(self.train, members, self.validation, self.metric, &self.learner)
    }
}

/// Score of the constant predictor for the validation majority label (ties go to 0).
pub fn empty_set_score(validation: &Dataset, metric: Metric) -> Result<f64> {
    let majority = u8::from(validation.positives() > validation.negatives());
    learner::constant_score(validation, majority, metric)
}

/// `V(subset)` scored on `validation` with the configured learner and metric.
pub fn subset_score(subset: &Dataset, validation: &Dataset, config: &ValuationConfig) -> Result<f64> {
    let all: Vec<usize> = (0..subset.len()).collect();
    ModelUtility::new(subset, validation, config)?.value(&all)
}

pub(crate) fn score_rows(
    train: &Dataset,
    rows: &[usize],
    eval: &Dataset,
    metric: Metric,
    learner_config: &LearnerConfig,
) -> Result<f64> {
    if eval.is_empty() {
        return Err(Error::EmptyEvaluationSet);
    }
    let Some(&first) = rows.first() else {
        return empty_set_score(eval, metric);
    };
    let labels = train.labels();
    let class = labels[first];
    if rows.iter().all(|&i| labels[i] == class) {
        return learner::constant_score(eval, class, metric);
    }
    let model = learner::train_rows(train, rows, learner_config)?;
    learner::score(&model, eval, metric)
}

/// Shapley values of `utility` by enumerating every coalition.
///
/// Each marginal `V(S ∪ {i}) − V(S)` is weighted by `1 / (n · C(n−1, |S|))`.
pub fn exact_values<U: Utility + ?Sized>(utility: &U) -> Result<Vec<f64>> {
    let n = utility.size();
    if n > MAX_EXACT_POINTS {
        return Err(Error::TooLargeForExact {
            n,
            max: MAX_EXACT_POINTS,
        });
    }
    let coalitions = 1usize << n;
    let scores = (0..coalitions)
        .into_par_iter()
        .map(|mask| {
            let members: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
            utility.value(&members)
        })
        .collect::<Result<Vec<f64>>>()?;

    let weights: Vec<f64> = (0..n)
        .map(|s| 1.0 / (n as f64 * binomial(n.saturating_sub(1), s)))
        .collect();
    Ok((0..n)
        .map(|i| {
            let bit = 1usize << i;
            (0..coalitions)
                .filter(|mask| mask & bit == 0)
                .map(|mask| weights[mask.count_ones() as usize] * (scores[mask | bit] - scores[mask]))
                .sum()
        })
        .collect())
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

/// Output of a permutation-sampling estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct PermutationEstimate {
    pub values: Vec<f64>,
    pub permutations: usize,
    pub converged: bool,
}

/// Runs the shared permutation scaffolding: `walk` maps a permutation to the marginal
/// contribution of every player (indexed by player, not by position).
fn sample_permutations<F>(n: usize, config: &ValuationConfig, walk: F) -> Result<PermutationEstimate>
where
    F: Fn(&[usize]) -> Result<Vec<f64>> + Sync,
{
    let window = config.convergence_window;
    let mut sums = vec![0.0; n];
    let mut previous: Option<Vec<f64>> = None;
    let mut done = 0usize;

    while done < config.max_permutations {
        let batch = window.min(config.max_permutations - done);
        let marginals = (done + 1..=done + batch)
            .into_par_iter()
            .map(|t| {
                let perm = Stream::new(config.seed, Domain::Permutation, t as u64).permutation(n);
                walk(&perm)
            })
            .collect::<Result<Vec<Vec<f64>>>>()?;
        for m in &marginals {
            for (s, x) in sums.iter_mut().zip(m) {
                *s += x;
            }
        }
        done += batch;

        if batch < window {
            break;
        }
        let current: Vec<f64> = sums.iter().map(|s| s / done as f64).collect();
        if let Some(prev) = &previous {
            if done >= config.min_permutations
                && mean_relative_change(&current, prev) < config.convergence_threshold
            {
                return Ok(PermutationEstimate {
                    values: current,
                    permutations: done,
                    converged: true,
                });
            }
        }
        previous = Some(current);
    }

    Ok(PermutationEstimate {
        values: sums.iter().map(|s| s / done as f64).collect(),
        permutations: done,
        converged: false,
    })
}

fn mean_relative_change(current: &[f64], previous: &[f64]) -> f64 {
    if current.is_empty() {
        return 0.0;
    }
    current
        .iter()
        .zip(previous)
        .map(|(c, p)| (c - p).abs() / (c.abs() + 1e-12))
        .sum::<f64>()
        / current.len() as f64
}

/// Truncated Monte Carlo estimate of the Shapley values of `utility`.
pub fn tmc_values<U: Utility + ?Sized>(utility: &U, config: &ValuationConfig) -> Result<PermutationEstimate> {
    config.validate()?;
    let n = utility.size();
    let empty = utility.value(&[])?;
    let all: Vec<usize> = (0..n).collect();
    let full = utility.value(&all)?;
    let tolerance = config.truncation_tolerance;

    sample_permutations(n, config, |perm| {
        let mut marginals = vec![0.0; n];
        let mut members: Vec<usize> = Vec::with_capacity(n);
        let mut previous = empty;
        for &player in perm {
            let at = members.partition_point(|&m| m < player);
            members.insert(at, player);
            let current = utility.value(&members)?;
            marginals[player] = current - previous;
            previous = current;
            if (current - full).abs() < tolerance {
                break;
            }
        }
        Ok(marginals)
    })
}

/// Checks the shared preconditions and returns `(V(D), V(∅))`.
fn anchor_scores(utility: &ModelUtility<'_>) -> Result<(f64, f64)> {
    let all: Vec<usize> = (0..utility.size()).collect();
    Ok((utility.value(&all)?, utility.value(&[])?))
}

fn package(
    train: &Dataset,
    config: &ValuationConfig,
    method: Method,
    values: Vec<f64>,
    anchors: (f64, f64),
    permutations_used: usize,
    converged: bool,
) -> ValuationResult {
    ValuationResult {
        method,
        metric: config.metric,
        values: train
            .ids()
            .iter()
            .zip(values)
            .map(|(id, value)| PointValue {
                id: id.clone(),
                value,
            })
            .collect(),
        permutations_used,
        converged,
        full_score: anchors.0,
        empty_score: anchors.1,
        seed: config.seed,
    }
}

fn require_points(train: &Dataset) -> Result<()> {
    if train.is_empty() {
        Err(Error::EmptyTrainingSet)
    } else {
        Ok(())
    }
}

/// Exact data Shapley values by enumerating all `2^n` training subsets (`n` ≤ 12).
pub fn exact_shapley(train: &Dataset, validation: &Dataset, config: &ValuationConfig) -> Result<ValuationResult> {
    config.validate()?;
    if train.len() > MAX_EXACT_POINTS {
        return Err(Error::TooLargeForExact {
            n: train.len(),
            max: MAX_EXACT_POINTS,
        });
    }
    require_points(train)?;
    let utility = ModelUtility::new(train, validation, config)?;
    let values = exact_values(&utility)?;
    let anchors = anchor_scores(&utility)?;
    Ok(package(train, config, Method::Exact, values, anchors, 0, true))
}

pub fn tmc_shapley(train: &Dataset, validation: &Dataset, config: &ValuationConfig) -> Result<ValuationResult> {
    config.validate()?;
    require_points(train)?;
    let utility = ModelUtility::new(train, validation, config)?;
    let estimate = tmc_values(&utility, config)?;
    let anchors = anchor_scores(&utility)?;
    Ok(package(
        train,
        config,
        Method::Tmc,
        estimate.values,
        anchors,
        estimate.permutations,
        estimate.converged,
    ))
}

/// Permutation Shapley where each prefix score comes from a single logistic model that
/// takes one gradient step per arriving point instead of being refit.
pub fn g_shapley(train: &Dataset, validation: &Dataset, config: &ValuationConfig) -> Result<ValuationResult> {
    config.validate()?;
    require_points(train)?;
    let utility = ModelUtility::new(train, validation, config)?;
    let anchors = anchor_scores(&utility)?;
    let empty = anchors.1;
    let n = train.len();

    let estimate = sample_permutations(n, config, |perm| {
        let mut marginals = vec![0.0; n];
        let mut model = Model::zeros(train.dim(), config.learner);
        let mut previous = empty;
        for &i in perm {
            model.sgd_step(train.row(i), train.labels()[i], config.g_learning_rate);
            let current = learner::score(&model, validation, config.metric)?;
            marginals[i] = current - previous;
            previous = current;
        }
        Ok(marginals)
    })?;

    Ok(package(
        train,
        config,
        Method::GShapley,
        estimate.values,
        anchors,
        estimate.permutations,
        estimate.converged,
    ))
}

/// Leave-one-out values `V(D) − V(D ∖ {i})`.
pub fn loo_values(train: &Dataset, validation: &Dataset, config: &ValuationConfig) -> Result<ValuationResult> {
    config.validate()?;
    require_points(train)?;
    let utility = ModelUtility::new(train, validation, config)?;
    let anchors = anchor_scores(&utility)?;
    let n = train.len();
    let values = (0..n)
        .into_par_iter()
        .map(|i| {
            let rest: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            Ok(anchors.0 - utility.value(&rest)?)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(package(train, config, Method::Loo, values, anchors, 0, true))
}

/// Dispatches on `config.method`.
pub fn value(train: &Dataset, validation: &Dataset, config: &ValuationConfig) -> Result<ValuationResult> {
    match config.method {
        Method::Exact => exact_shapley(train, validation, config),
        Method::Tmc => tmc_shapley(train, validation, config),
        Method::GShapley => g_shapley(train, validation, config),
        Method::Loo => loo_values(train, validation, config),
    }
}
