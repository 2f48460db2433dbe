//! Seeded random streams.
//!
//! Every stream is ChaCha20 keyed by `seed` (little-endian, key bytes 0..8) and a domain
//! tag (little-endian, key bytes 8..16), with the remaining key bytes zero; the stream
//! index selects the ChaCha stream. Outputs are 64-bit words as produced by
//! `rand_chacha::ChaCha20Rng`. Bounded integers use rejection sampling and shuffles use
//! Fisher–Yates, so all derived sequences are reproducible from this description alone.

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

/// Separates the random streams used by different parts of the engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Permutation = 1,
    Split = 2,
    Ranking = 3,
    Synthetic = 4,
}

pub struct Stream {
    inner: ChaCha20Rng,
}

impl Stream {
    pub fn new(seed: u64, domain: Domain, index: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        key[8..16].copy_from_slice(&(domain as u64).to_le_bytes());
        let mut inner = ChaCha20Rng::from_seed(key);
        inner.set_stream(index);
        Self { inner }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform integer in `0..bound`. `bound` must be positive.
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "empty range");
        // Reject the lowest 2^64 mod bound values so every residue is equally likely.
        let threshold = bound.wrapping_neg() % bound;
        loop {
            let x = self.next_u64();
            if x >= threshold {
                return x % bound;
            }
        }
    }

    /// Uniform float in `[0, 1)` with 53 random bits.
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal draw (Box–Muller, one output per call).
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.unit();
        let u2 = self.unit();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// In-place Fisher–Yates shuffle, drawing from the back of the slice.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }

    /// Moves a uniform sample of `k` items to the front of `items`
    /// (partial Fisher–Yates from the front).
    pub fn partial_shuffle<T>(&mut self, items: &mut [T], k: usize) {
        let len = items.len();
        assert!(k <= len);
        for i in 0..k {
            let j = i + self.below((len - i) as u64) as usize;
            items.swap(i, j);
        }
    }

    /// A uniformly random permutation of `0..n`.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut p: Vec<usize> = (0..n).collect();
        self.shuffle(&mut p);
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = {
            let mut s = Stream::new(7, Domain::Permutation, 3);
            (0..4).map(|_| s.next_u64()).collect()
        };
        let b: Vec<u64> = {
            let mut s = Stream::new(7, Domain::Permutation, 3);
            (0..4).map(|_| s.next_u64()).collect()
        };
        assert_eq!(a, b);
        for (seed, domain, index) in [
            (8, Domain::Permutation, 3),
            (7, Domain::Split, 3),
            (7, Domain::Permutation, 4),
        ] {
            let mut s = Stream::new(seed, domain, index);
            assert_ne!(a[0], s.next_u64());
        }
    }

    #[test]
    fn permutation_is_a_permutation() {
        let mut s = Stream::new(1, Domain::Ranking, 0);
        let mut p = s.permutation(50);
        p.sort_unstable();
        assert_eq!(p, (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn below_is_roughly_uniform() {
        let mut s = Stream::new(42, Domain::Split, 0);
        let mut counts = [0usize; 6];
        for _ in 0..60_000 {
            counts[s.below(6) as usize] += 1;
        }
        for c in counts {
            assert!((9_000..11_000).contains(&c), "{counts:?}");
        }
    }

    #[test]
    fn normal_moments() {
        let mut s = Stream::new(5, Domain::Split, 9);
        let xs: Vec<f64> = (0..50_000).map(|_| s.normal()).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
        assert!(mean.abs() < 0.02);
        assert!((var - 1.0).abs() < 0.03);
    }
}
