//! Rankings by value, removal curves and cumulative-mislabel curves.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learner::LearnerConfig;
use crate::rng::{Domain, Stream};
use crate::shapley::{self, Method, ValuationResult};
use crate::types::{Dataset, Metric};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    MostValuableFirst,
    LeastValuableFirst,
    Random,
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "most" | "most_valuable_first" | "descending" => Ok(Direction::MostValuableFirst),
            "least" | "least_valuable_first" | "ascending" => Ok(Direction::LeastValuableFirst),
            "random" => Ok(Direction::Random),
            other => Err(Error::InvalidConfig(format!("unknown direction `{other}`"))),
        }
    }
}

/// Which valuation produced a ranking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RankingSource {
    #[serde(rename = "exact")]
    Exact,
    #[serde(rename = "tmc")]
    Tmc,
    #[serde(rename = "g-shapley")]
    GShapley,
    #[serde(rename = "loo")]
    Loo,
    #[serde(rename = "random")]
    Random,
}

impl From<Method> for RankingSource {
    fn from(m: Method) -> Self {
        match m {
            Method::Exact => RankingSource::Exact,
            Method::Tmc => RankingSource::Tmc,
            Method::GShapley => RankingSource::GShapley,
            Method::Loo => RankingSource::Loo,
        }
    }
}

/// An ordering of every training id, in removal/inspection order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub order: Vec<String>,
    pub direction: Direction,
    pub source: RankingSource,
}

impl Ranking {
    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

/// Orders the valued ids. Ties are broken by ascending id; `seed` is only used for
/// [`Direction::Random`].
pub fn rank_points(result: &ValuationResult, direction: Direction, seed: u64) -> Ranking {
    if direction == Direction::Random {
        return random_ranking(result.ids().map(str::to_owned).collect(), seed);
    }
    let mut entries: Vec<(&str, f64)> = result.values.iter().map(|v| (v.id.as_str(), v.value)).collect();
    entries.sort_by(|a, b| {
        let by_value = match direction {
            Direction::MostValuableFirst => b.1.total_cmp(&a.1),
            _ => a.1.total_cmp(&b.1),
        };
        by_value.then_with(|| a.0.cmp(b.0))
    });
    Ranking {
        order: entries.into_iter().map(|(id, _)| id.to_owned()).collect(),
        direction,
        source: result.method.into(),
    }
}

/// Uniformly shuffled ordering of `ids`.
pub fn random_ranking(mut ids: Vec<String>, seed: u64) -> Ranking {
    Stream::new(seed, Domain::Ranking, 0).shuffle(&mut ids);
    Ranking {
        order: ids,
        direction: Direction::Random,
        source: RankingSource::Random,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalSet {
    Validation,
    Test,
}

impl FromStr for EvalSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "validation" | "val" => Ok(EvalSet::Validation),
            "test" => Ok(EvalSet::Test),
            other => Err(Error::InvalidConfig(format!("unknown evaluation set `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveSettings {
    pub step_fraction: f64,
    /// Removal stops after this fraction of the training set.
    pub max_fraction: f64,
    pub learner: LearnerConfig,
    pub metrics: Vec<Metric>,
    pub eval_set: EvalSet,
}

impl Default for CurveSettings {
    fn default() -> Self {
        Self {
            step_fraction: 0.01,
            max_fraction: 1.0,
            learner: LearnerConfig::default(),
            metrics: Metric::ALL.to_vec(),
            eval_set: EvalSet::Test,
        }
    }
}

/// Scores after removing growing prefixes of a ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct RemovalCurve {
    pub fractions: Vec<f64>,
    pub scores: BTreeMap<Metric, Vec<f64>>,
    pub ranking: Ranking,
    pub eval_set: EvalSet,
    pub step_fraction: f64,
}

impl RemovalCurve {
    pub fn len(&self) -> usize {
        self.fractions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fractions.is_empty()
    }

    pub fn metric(&self, metric: Metric) -> Option<&[f64]> {
        self.scores.get(&metric).map(Vec::as_slice)
    }

    /// Score recorded at the largest fraction not exceeding `fraction`.
    pub fn score_at(&self, metric: Metric, fraction: f64) -> Option<f64> {
        let idx = self.fractions.iter().rposition(|&f| f <= fraction + 1e-12)?;
        self.scores.get(&metric).map(|s| s[idx])
    }
}

/// Number of points removed at `fraction` of `n`, rounding down.
///
/// A 1e-9 slack absorbs binary representation error so that e.g. 0.29 · 100 removes 29.
fn removal_count(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64) + 1e-9).floor().min(n as f64) as usize
}

/// Retrains after removing the first `⌊k · step · n⌋` ranked ids for `k = 0, 1, …`.
///
/// The curve ends at `max_fraction`, or earlier once the retained set is empty or holds
/// a single class; that final point records the constant-predictor score.
pub fn removal_curve(
    train: &Dataset,
    eval_set: &Dataset,
    ranking: &Ranking,
    settings: &CurveSettings,
) -> Result<RemovalCurve> {
    let step = settings.step_fraction;
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "step_fraction must lie in (0, 1], got {step}"
        )));
    }
    if !(0.0..=1.0).contains(&settings.max_fraction) {
        return Err(Error::InvalidConfig(format!(
            "max_fraction must lie in [0, 1], got {}",
            settings.max_fraction
        )));
    }
    if settings.metrics.is_empty() {
        return Err(Error::InvalidConfig("no metrics requested".into()));
    }
    settings.learner.validate()?;
    if eval_set.is_empty() {
        return Err(Error::EmptyEvaluationSet);
    }
    if train.dim() != eval_set.dim() {
        return Err(Error::DimensionMismatch(format!(
            "training set has {} features, evaluation set has {}",
            train.dim(),
            eval_set.dim()
        )));
    }
    let positions = ranking_positions(train, ranking)?;
    let n = train.len();

    // Plan the steps first: the last one is where the retained set runs out of points or
    // classes, or where max_fraction is reached.
    let mut plan: Vec<(f64, Vec<usize>)> = Vec::new();
    for k in 0usize.. {
        let fraction = k as f64 * step;
        if fraction > settings.max_fraction + 1e-9 {
            break;
        }
        let removed = removal_count(fraction, n);
        let mut kept: Vec<usize> = positions[removed..].to_vec();
        kept.sort_unstable();
        let exhausted = {
            let labels = train.labels();
            kept.first()
                .is_none_or(|&f| kept.iter().all(|&i| labels[i] == labels[f]))
        };
        plan.push((fraction.min(1.0), kept));
        if exhausted || removed == n {
            break;
        }
    }

    let rows = plan
        .par_iter()
        .map(|(_, kept)| {
            settings
                .metrics
                .iter()
                .map(|&m| shapley::score_rows(train, kept, eval_set, m, &settings.learner))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut scores: BTreeMap<Metric, Vec<f64>> = BTreeMap::new();
    for row in &rows {
        for (&m, &s) in settings.metrics.iter().zip(row) {
            scores.entry(m).or_default().push(s);
        }
    }
    Ok(RemovalCurve {
        fractions: plan.iter().map(|(f, _)| *f).collect(),
        scores,
        ranking: ranking.clone(),
        eval_set: settings.eval_set,
        step_fraction: step,
    })
}

/// Training-set row index of each ranked id, in ranking order.
fn ranking_positions(train: &Dataset, ranking: &Ranking) -> Result<Vec<usize>> {
    if ranking.len() != train.len() {
        return Err(Error::RankingMismatch(format!(
            "ranking has {} ids, training set has {}",
            ranking.len(),
            train.len()
        )));
    }
    let index: HashMap<&str, usize> = train
        .ids()
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let mut seen = HashSet::with_capacity(ranking.len());
    ranking
        .order
        .iter()
        .map(|id| {
            let &i = index
                .get(id.as_str())
                .ok_or_else(|| Error::RankingMismatch(format!("unknown id `{id}`")))?;
            if !seen.insert(i) {
                return Err(Error::RankingMismatch(format!("id `{id}` ranked twice")));
            }
            Ok(i)
        })
        .collect()
}

/// Running count of flagged ids over the first `k` ranked ids, `k = 0..=n`.
pub fn cumulative_mislabel_curve(ranking: &Ranking, flags: &HashMap<String, bool>) -> Result<Vec<usize>> {
    let mut curve = Vec::with_capacity(ranking.len() + 1);
    curve.push(0);
    let mut count = 0;
    for id in &ranking.order {
        let &flagged = flags.get(id).ok_or_else(|| Error::MissingFlag(id.clone()))?;
        count += usize::from(flagged);
        curve.push(count);
    }
    Ok(curve)
}

/// Spearman rank correlation with average ranks for ties. Returns 0 when either input
/// is constant.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    pearson(&ra, &rb)
}

fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&i, &j| xs[i].total_cmp(&xs[j]));
    let mut ranks = vec![0.0; xs.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && xs[order[end]] == xs[order[start]] {
            end += 1;
        }
        let rank = (start + end - 1) as f64 / 2.0 + 1.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma).powi(2);
        vb += (y - mb).powi(2);
    }
    if va == 0.0 || vb == 0.0 {
        0.0
    } else {
        cov / (va * vb).sqrt()
    }
}

/// Flag counts among the `k` most valuable, `k` least valuable and `k` random ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditSummary {
    pub k: usize,
    pub n: usize,
    pub total_flagged: usize,
    pub most_valuable: usize,
    pub least_valuable: usize,
    pub random: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Audit {
    pub summary: AuditSummary,
    /// Cumulative flag counts in ascending, descending and random value order.
    pub ascending: Vec<usize>,
    pub descending: Vec<usize>,
    pub random: Vec<usize>,
}

impl fmt::Display for AuditSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "flagged: {} of {}", self.total_flagged, self.n)?;
        writeln!(f, "{:>4} most valuable:  {}", self.k, self.most_valuable)?;
        writeln!(f, "{:>4} least valuable: {}", self.k, self.least_valuable)?;
        write!(f, "{:>4} random:         {}", self.k, self.random)
    }
}

/// Mislabel audit of a valuation against known flags.
pub fn audit(result: &ValuationResult, flags: &HashMap<String, bool>, k: usize, seed: u64) -> Result<Audit> {
    let n = result.values.len();
    if k > n {
        return Err(Error::InvalidConfig(format!(
            "k = {k} exceeds the {n} valued points"
        )));
    }
    let ascending = cumulative_mislabel_curve(&rank_points(result, Direction::LeastValuableFirst, seed), flags)?;
    let descending = cumulative_mislabel_curve(&rank_points(result, Direction::MostValuableFirst, seed), flags)?;
    let random = cumulative_mislabel_curve(&rank_points(result, Direction::Random, seed), flags)?;
    Ok(Audit {
        summary: AuditSummary {
            k,
            n,
            total_flagged: ascending[n],
            most_valuable: descending[k],
            least_valuable: ascending[k],
            random: random[k],
        },
        ascending,
        descending,
        random,
    })
}
