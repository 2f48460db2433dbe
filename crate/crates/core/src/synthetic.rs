//! Synthetic two-class Gaussian data with injected label noise, for experiments
//! where the mislabeled points are known.

use crate::error::{Error, Result};
use crate::rng::{Domain, Stream};
use crate::types::Dataset;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianSpec {
    pub n: usize,
    pub dim: usize,
    /// Class means sit at `±separation / 2` on every axis; noise is unit-variance.
    pub separation: f64,
    /// Fraction of points whose label is flipped, rounded to the nearest count.
    pub flip_fraction: f64,
    pub seed: u64,
    /// Random stream index, so several sets can share one seed.
    pub stream: u64,
}

impl Default for GaussianSpec {
    fn default() -> Self {
        Self {
            n: 200,
            dim: 5,
            separation: 1.5,
            flip_fraction: 0.2,
            seed: 0,
            stream: 0,
        }
    }
}

/// A generated dataset plus which points carry a flipped label.
#[derive(Debug, Clone)]
pub struct NoisyDataset {
    pub data: Dataset,
    pub flipped: Vec<bool>,
}

impl NoisyDataset {
    pub fn flipped_ids(&self) -> impl Iterator<Item = &str> {
        self.data
            .ids()
            .iter()
            .zip(&self.flipped)
            .filter(|(_, &f)| f)
            .map(|(id, _)| id.as_str())
    }
}

/// Draws `n` points with alternating true classes, then flips the labels of a uniformly
/// chosen `round(flip_fraction · n)` of them.
pub fn gaussian_classes(spec: &GaussianSpec, id_prefix: &str) -> Result<NoisyDataset> {
    if spec.dim == 0 {
        return Err(Error::InvalidConfig("dimension must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&spec.flip_fraction) {
        return Err(Error::InvalidConfig(format!(
            "flip_fraction must lie in [0, 1], got {}",
            spec.flip_fraction
        )));
    }
    let mut rng = Stream::new(spec.seed, Domain::Synthetic, spec.stream);
    let half = spec.separation / 2.0;
    let mut rows = Vec::with_capacity(spec.n);
    let mut labels = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let class = (i % 2) as u8;
        let center = if class == 1 { half } else { -half };
        rows.push((0..spec.dim).map(|_| center + rng.normal()).collect::<Vec<f64>>());
        labels.push(class);
    }
    let flips = (spec.flip_fraction * spec.n as f64).round() as usize;
    let mut order: Vec<usize> = (0..spec.n).collect();
    rng.partial_shuffle(&mut order, flips);
    let mut flipped = vec![false; spec.n];
    for &i in &order[..flips] {
        flipped[i] = true;
        labels[i] ^= 1;
    }
    let ids = (0..spec.n).map(|i| format!("{id_prefix}{i:05}")).collect();
    Ok(NoisyDataset {
        data: Dataset::new(ids, rows, labels)?,
        flipped,
    })
}
