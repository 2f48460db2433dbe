//! Data Shapley valuation of training points for binary classifiers.
//!
//! The crate values each training point by its contribution to a logistic-regression
//! classifier's validation score ([`shapley`]), then uses the values to run removal
//! curves and mislabel audits ([`evaluation`]), χ² tests of the audit tables
//! ([`stats`]) and class-activation heatmaps ([`heatmap`]). [`ingest`] holds the file
//! formats and the stratified splitter.

pub mod error;
pub mod evaluation;
pub mod heatmap;
pub mod ingest;
pub mod learner;
pub mod rng;
pub mod shapley;
pub mod stats;
pub mod synthetic;
pub mod types;

pub use error::{Error, Result};
pub use learner::{LearnerConfig, Model};
pub use shapley::{Method, ValuationConfig, ValuationResult};
pub use types::{Dataset, Metric, Split};
