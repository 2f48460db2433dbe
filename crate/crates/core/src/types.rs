//! Shared domain types: datasets, metrics and train/validation/test splits.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A dataset as read from an external source, before any invariant checks.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawDataset {
    pub ids: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<i64>,
    /// Expected feature dimension; taken from the first row when absent.
    pub dim: Option<usize>,
}

/// Binary-labelled feature matrix. Immutable once validated.
///
/// Features are stored row-major; row `i` belongs to `ids[i]` and `labels[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    ids: Vec<String>,
    features: Vec<f64>,
    dim: usize,
    labels: Vec<u8>,
}

impl Dataset {
    /// Builds a dataset from row vectors, checking every invariant.
    pub fn new(ids: Vec<String>, rows: Vec<Vec<f64>>, labels: Vec<u8>) -> Result<Self> {
        let dim = rows.first().map(Vec::len);
        validate_dataset(RawDataset {
            ids,
            rows,
            labels: labels.into_iter().map(i64::from).collect(),
            dim,
        })
    }

    /// An empty dataset with feature dimension `dim`.
    pub fn empty(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::DimensionMismatch(
                "feature dimension must be at least 1".into(),
            ));
        }
        Ok(Self {
            ids: Vec::new(),
            features: Vec::new(),
            dim,
            labels: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// Row-major feature storage, `len() * dim()` entries.
    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.features.chunks_exact(self.dim)
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&y| y == 1).count()
    }

    pub fn negatives(&self) -> usize {
        self.len() - self.positives()
    }

    /// Position of `id`, if present.
    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }

    /// New dataset holding the given rows, in the given order.
    ///
    /// Panics if an index is out of bounds or repeated.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let mut seen = HashSet::with_capacity(indices.len());
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        let mut ids = Vec::with_capacity(indices.len());
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            assert!(seen.insert(i), "row {i} selected twice");
            features.extend_from_slice(self.row(i));
            ids.push(self.ids[i].clone());
            labels.push(self.labels[i]);
        }
        Dataset {
            ids,
            features,
            dim: self.dim,
            labels,
        }
    }

    pub fn to_raw(&self) -> RawDataset {
        RawDataset {
            ids: self.ids.clone(),
            rows: self.rows().map(<[f64]>::to_vec).collect(),
            labels: self.labels.iter().map(|&y| i64::from(y)).collect(),
            dim: Some(self.dim),
        }
    }
}

/// Checks every dataset invariant and returns the validated dataset.
pub fn validate_dataset(raw: RawDataset) -> Result<Dataset> {
    let RawDataset {
        ids,
        rows,
        labels,
        dim,
    } = raw;
    let dim = match (dim, rows.first()) {
        (Some(d), _) => d,
        (None, Some(first)) => first.len(),
        (None, None) => {
            return Err(Error::DimensionMismatch(
                "empty dataset without a feature dimension".into(),
            ))
        }
    };
    if dim == 0 {
        return Err(Error::DimensionMismatch(
            "feature dimension must be at least 1".into(),
        ));
    }
    if ids.len() != rows.len() || labels.len() != rows.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} ids, {} feature rows, {} labels",
            ids.len(),
            rows.len(),
            labels.len()
        )));
    }

    let mut seen = HashSet::with_capacity(ids.len());
    let mut features = Vec::with_capacity(rows.len() * dim);
    let mut bin_labels = Vec::with_capacity(labels.len());
    for (row, ((id, values), &label)) in ids.iter().zip(&rows).zip(&labels).enumerate() {
        if !seen.insert(id.as_str()) {
            return Err(Error::DuplicateId(id.clone()));
        }
        if values.len() != dim {
            return Err(Error::DimensionMismatch(format!(
                "row {row} (id `{id}`) has {} features, expected {dim}",
                values.len()
            )));
        }
        if let Some(column) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteFeature {
                row,
                id: id.clone(),
                column,
            });
        }
        let label = match label {
            0 => 0,
            1 => 1,
            other => {
                return Err(Error::NonBinaryLabel {
                    row,
                    id: id.clone(),
                    label: other,
                })
            }
        };
        features.extend_from_slice(values);
        bin_labels.push(label);
    }

    Ok(Dataset {
        ids,
        features,
        dim,
        labels: bin_labels,
    })
}

/// Performance measure for a binary classifier.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Accuracy,
    Precision,
    Recall,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Accuracy, Metric::Precision, Metric::Recall];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::Precision => "precision",
            Metric::Recall => "recall",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "accuracy" => Ok(Metric::Accuracy),
            "precision" => Ok(Metric::Precision),
            "recall" => Ok(Metric::Recall),
            other => Err(Error::InvalidConfig(format!("unknown metric `{other}`"))),
        }
    }
}

/// Disjoint training, validation and held-out test sets.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Dataset,
    pub validation: Dataset,
    pub test: Dataset,
}

impl Split {
    pub fn new(train: Dataset, validation: Dataset, test: Dataset) -> Result<Self> {
        if train.dim() != validation.dim() || train.dim() != test.dim() {
            return Err(Error::DimensionMismatch(format!(
                "split dimensions differ: train {}, validation {}, test {}",
                train.dim(),
                validation.dim(),
                test.dim()
            )));
        }
        let mut seen: HashSet<&str> = HashSet::new();
        for id in train.ids().iter().chain(validation.ids()).chain(test.ids()) {
            if !seen.insert(id) {
                return Err(Error::DuplicateId(id.clone()));
            }
        }
        Ok(Self {
            train,
            validation,
            test,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(labels: Vec<i64>) -> RawDataset {
        RawDataset {
            ids: vec!["a".into(), "b".into(), "c".into()],
            rows: vec![vec![0.0, 1.0], vec![1.0, 2.0], vec![2.0, 3.0]],
            labels,
            dim: None,
        }
    }

    #[test]
    fn accepts_well_formed() {
        let ds = validate_dataset(raw(vec![0, 1, 0])).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.dim(), 2);
        assert_eq!(ds.row(1), &[1.0, 2.0]);
        assert_eq!(ds.positives(), 1);
    }

    #[test]
    fn rejects_non_binary_label() {
        match validate_dataset(raw(vec![0, 2, 1])) {
            Err(Error::NonBinaryLabel { row: 1, label: 2, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_nan() {
        let mut r = raw(vec![0, 1, 0]);
        r.rows[2][1] = f64::NAN;
        match validate_dataset(r) {
            Err(Error::NonFiniteFeature { id, row: 2, column: 1 }) => assert_eq!(id, "c"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_ragged_and_duplicates() {
        let mut r = raw(vec![0, 1, 0]);
        r.rows[1].push(9.0);
        assert!(matches!(validate_dataset(r), Err(Error::DimensionMismatch(_))));

        let mut r = raw(vec![0, 1, 0]);
        r.labels.pop();
        assert!(matches!(validate_dataset(r), Err(Error::DimensionMismatch(_))));

        let mut r = raw(vec![0, 1, 0]);
        r.ids[2] = "a".into();
        assert!(matches!(validate_dataset(r), Err(Error::DuplicateId(id)) if id == "a"));
    }

    #[test]
    fn empty_needs_dimension() {
        assert!(validate_dataset(RawDataset::default()).is_err());
        let ds = validate_dataset(RawDataset {
            dim: Some(4),
            ..Default::default()
        })
        .unwrap();
        assert!(ds.is_empty());
        assert_eq!(ds.dim(), 4);
    }

    #[test]
    fn validation_is_idempotent() {
        let ds = validate_dataset(raw(vec![1, 1, 0])).unwrap();
        let again = validate_dataset(ds.to_raw()).unwrap();
        assert_eq!(ds, again);
    }

    #[test]
    fn split_rejects_overlap() {
        let ds = validate_dataset(raw(vec![1, 1, 0])).unwrap();
        let a = ds.select(&[0, 1]);
        let b = ds.select(&[1]);
        let c = ds.select(&[2]);
        assert!(matches!(Split::new(a.clone(), b, c.clone()), Err(Error::DuplicateId(_))));
        assert!(Split::new(a, ds.select(&[]), c).is_ok());
    }
}
