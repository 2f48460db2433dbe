//! Class-activation heatmaps: the classifier-weighted sum of final convolutional
//! feature maps.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// `K` feature maps of identical `height × width` shape, stored map-major then row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMapStack {
    maps: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
    pub label: String,
}

impl FeatureMapStack {
    pub fn new(maps: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if maps == 0 || height == 0 || width == 0 {
            return Err(Error::DimensionMismatch(format!(
                "feature map stack must be non-empty, got {maps}x{height}x{width}"
            )));
        }
        let expected = maps
            .checked_mul(height)
            .and_then(|v| v.checked_mul(width))
            .ok_or_else(|| Error::DimensionMismatch("feature map stack too large".into()))?;
        if data.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                actual: data.len(),
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteFeature {
                row: i / width,
                id: format!("map {}", i / (height * width)),
                column: i % width,
            });
        }
        Ok(Self {
            maps,
            height,
            width,
            data,
            label: String::new(),
        })
    }

    /// Builds a stack from nested `[map][row][col]` grids.
    pub fn from_grids(grids: &[Vec<Vec<f64>>]) -> Result<Self> {
        let height = grids.first().map_or(0, Vec::len);
        let width = grids.first().and_then(|g| g.first()).map_or(0, Vec::len);
        for (k, g) in grids.iter().enumerate() {
            if g.len() != height || g.iter().any(|row| row.len() != width) {
                return Err(Error::DimensionMismatch(format!(
                    "map {k} is not {height}x{width}"
                )));
            }
        }
        let data = grids.iter().flatten().flatten().copied().collect();
        Self::new(grids.len(), height, width, data)
    }

    pub fn maps(&self) -> usize {
        self.maps
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn map(&self, k: usize) -> &[f64] {
        let size = self.height * self.width;
        &self.data[k * size..(k + 1) * size]
    }
}

/// Final-layer classifier weight for each feature map.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassWeights(Vec<f64>);

impl ClassWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if let Some(i) = weights.iter().position(|w| !w.is_finite()) {
            return Err(Error::NonFiniteFeature {
                row: i,
                id: "weights".into(),
                column: 0,
            });
        }
        Ok(Self(weights))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub height: usize,
    pub width: usize,
    /// Row-major grid values.
    pub grid: Vec<f64>,
    pub normalized: bool,
}

impl Heatmap {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.grid[row * self.width + col]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.grid.chunks_exact(self.width)
    }

    /// One CSV line per grid row, values at full precision.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.rows() {
            let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    /// Plain-text PGM (P2) with 8-bit levels `⌊255 · v⌋` of the normalized grid.
    pub fn to_pgm(&self) -> String {
        let norm = if self.normalized {
            self.clone()
        } else {
            normalize_heatmap(self)
        };
        let mut out = format!("P2\n{} {}\n255\n", self.width, self.height);
        for row in norm.rows() {
            let line: Vec<String> = row.iter().map(|&v| quantize(v).to_string()).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }
}

fn quantize(v: f64) -> u8 {
    (v * 255.0).floor().clamp(0.0, 255.0) as u8
}

/// `M = Σ_k w_k f_k`, elementwise over the map grid.
pub fn compute_heatmap(stack: &FeatureMapStack, weights: &ClassWeights) -> Result<Heatmap> {
    if weights.len() != stack.maps() {
        return Err(Error::LengthMismatch {
            expected: stack.maps(),
            actual: weights.len(),
        });
    }
    let mut grid = vec![0.0; stack.height * stack.width];
    for (k, &w) in weights.as_slice().iter().enumerate() {
        for (g, &f) in grid.iter_mut().zip(stack.map(k)) {
            *g += w * f;
        }
    }
    Ok(Heatmap {
        height: stack.height,
        width: stack.width,
        grid,
        normalized: false,
    })
}

/// Min-max rescale to `[0, 1]`; a constant grid maps to 0.5 everywhere.
pub fn normalize_heatmap(map: &Heatmap) -> Heatmap {
    let (lo, hi) = map
        .grid
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    let grid = if range > 0.0 && range.is_finite() {
        map.grid.iter().map(|&v| (v - lo) / range).collect()
    } else {
        vec![0.5; map.grid.len()]
    };
    Heatmap {
        grid,
        normalized: true,
        ..*map
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k2_stack() -> FeatureMapStack {
        FeatureMapStack::from_grids(&[
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        ])
        .unwrap()
    }

    #[test]
    fn weighted_sum_fixture() {
        let h = compute_heatmap(&k2_stack(), &ClassWeights::new(vec![1.0, 2.0]).unwrap()).unwrap();
        assert_eq!(h.grid, [1.0, 2.0, 2.0, 1.0]);
        assert!(!h.normalized);
    }

    #[test]
    fn zero_and_one_hot_weights() {
        let stack = k2_stack();
        let h = compute_heatmap(&stack, &ClassWeights::new(vec![0.0, 0.0]).unwrap()).unwrap();
        assert!(h.grid.iter().all(|&v| v == 0.0));
        let h = compute_heatmap(&stack, &ClassWeights::new(vec![0.0, 1.0]).unwrap()).unwrap();
        assert_eq!(h.grid, stack.map(1));
    }

    #[test]
    fn weight_length_must_match() {
        assert!(matches!(
            compute_heatmap(&k2_stack(), &ClassWeights::new(vec![1.0]).unwrap()),
            Err(Error::LengthMismatch { expected: 2, actual: 1 })
        ));
    }

    #[test]
    fn stack_validation() {
        assert!(FeatureMapStack::new(0, 7, 7, vec![]).is_err());
        assert!(FeatureMapStack::new(1, 2, 2, vec![1.0; 3]).is_err());
        assert!(FeatureMapStack::new(1, 1, 2, vec![1.0, f64::INFINITY]).is_err());
        assert!(FeatureMapStack::from_grids(&[vec![vec![1.0]], vec![vec![1.0, 2.0]]]).is_err());
        assert!(ClassWeights::new(vec![f64::NAN]).is_err());
    }

    fn grid(values: &[f64]) -> Heatmap {
        Heatmap { height: 2, width: 2, grid: values.to_vec(), normalized: false }
    }

    #[test]
    fn normalization_cases() {
        assert_eq!(normalize_heatmap(&grid(&[0.0, 10.0, 5.0, 10.0])).grid, [0.0, 1.0, 0.5, 1.0]);
        assert_eq!(normalize_heatmap(&grid(&[3.0; 4])).grid, [0.5; 4]);
        let unit = grid(&[0.0, 0.25, 1.0, 0.75]);
        assert_eq!(normalize_heatmap(&unit).grid, unit.grid);
        assert!(normalize_heatmap(&unit).normalized);
    }

    #[test]
    fn pgm_quantization() {
        let pgm = normalize_heatmap(&grid(&[3.0; 4])).to_pgm();
        assert_eq!(pgm, "P2\n2 2\n255\n127 127\n127 127\n");
        let pgm = grid(&[0.0, 10.0, 5.0, 10.0]).to_pgm();
        assert_eq!(pgm, "P2\n2 2\n255\n0 255\n127 255\n");
    }

    #[test]
    fn csv_output() {
        assert_eq!(grid(&[1.0, 2.0, 2.0, 0.1]).to_csv(), "1.0,2.0\n2.0,0.1\n");
    }
}
