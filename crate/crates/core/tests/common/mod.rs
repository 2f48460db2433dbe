#![allow(dead_code)]

use datum_worth::synthetic::{gaussian_classes, GaussianSpec, NoisyDataset};
use datum_worth::Dataset;

/// Small noisy training set plus a clean validation set drawn with the same seed.
pub fn small_fixture(n: usize, flips: usize, seed: u64) -> (NoisyDataset, Dataset) {
    let train = gaussian_classes(
        &GaussianSpec {
            n,
            dim: 2,
            separation: 2.0,
            flip_fraction: flips as f64 / n as f64,
            seed,
            stream: 0,
        },
        "t",
    )
    .unwrap();
    let validation = gaussian_classes(
        &GaussianSpec {
            n: 40,
            dim: 2,
            separation: 2.0,
            flip_fraction: 0.0,
            seed,
            stream: 1,
        },
        "v",
    )
    .unwrap()
    .data;
    (train, validation)
}

/// Appends a bitwise copy of row `source` under a new id.
pub fn with_duplicate(data: &Dataset, source: usize) -> Dataset {
    let mut raw = data.to_raw();
    raw.ids.push(format!("{}-copy", raw.ids[source]));
    raw.rows.push(raw.rows[source].clone());
    raw.labels.push(raw.labels[source]);
    datum_worth::types::validate_dataset(raw).unwrap()
}

pub fn mean_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}
