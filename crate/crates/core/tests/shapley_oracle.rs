mod common;

use std::collections::HashMap;

use common::{mean_abs_diff, small_fixture, with_duplicate};
use datum_worth::evaluation::spearman;
use datum_worth::learner;
use datum_worth::shapley::{
    empty_set_score, exact_shapley, g_shapley, loo_values, subset_score, tmc_shapley, Method,
    ValuationConfig,
};
use datum_worth::{Dataset, Metric};

fn exact_config() -> ValuationConfig {
    ValuationConfig {
        method: Method::Exact,
        ..Default::default()
    }
}

/// Permutation-average Shapley values over all `n!` orderings, scoring each prefix by
/// materializing the subset. Independent of the engine's coalition enumeration.
fn permutation_oracle(train: &Dataset, validation: &Dataset, config: &ValuationConfig) -> Vec<f64> {
    let n = train.len();
    let mut cache: HashMap<u32, f64> = HashMap::new();
    let mut score = |mask: u32| -> f64 {
        *cache.entry(mask).or_insert_with(|| {
            let rows: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
            subset_score(&train.select(&rows), validation, config).unwrap()
        })
    };
    let mut totals = vec![0.0; n];
    let mut count = 0usize;
    let mut perm: Vec<usize> = (0..n).collect();
    loop {
        let mut mask = 0u32;
        let mut prev = score(0);
        for &p in &perm {
            mask |= 1 << p;
            let cur = score(mask);
            totals[p] += cur - prev;
            prev = cur;
        }
        count += 1;
        if !next_permutation(&mut perm) {
            break;
        }
    }
    totals.iter().map(|t| t / count as f64).collect()
}

fn next_permutation(p: &mut [usize]) -> bool {
    let Some(i) = (1..p.len()).rev().find(|&i| p[i - 1] < p[i]) else {
        return false;
    };
    let j = (i..p.len()).rev().find(|&j| p[j] > p[i - 1]).unwrap();
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

#[test]
fn exact_matches_permutation_oracle() {
    for (n, flips, seed) in [(4, 1, 1), (6, 2, 100), (6, 2, 101), (7, 2, 7)] {
        let (train, val) = small_fixture(n, flips, seed);
        let cfg = exact_config();
        let exact = exact_shapley(&train.data, &val, &cfg).unwrap();
        let oracle = permutation_oracle(&train.data, &val, &cfg);
        for (e, o) in exact.raw_values().iter().zip(&oracle) {
            assert!((e - o).abs() < 1e-12, "n={n} seed={seed}: {e} vs {o}");
        }
    }
}

#[test]
fn exact_golden_six_point_fixture() {
    // Regression values for the 6-point, 2-flip fixture (seed 100); the permutation
    // oracle agrees with them to 1e-12.
    let expected = [
        0.0024999999999999988,
        -0.005416666666666671,
        0.10999999999999999,
        -0.1408333333333333,
        0.04916666666666667,
        0.0845833333333333,
    ];
    let (train, val) = small_fixture(6, 2, 100);
    let r = exact_shapley(&train.data, &val, &exact_config()).unwrap();
    for (v, e) in r.raw_values().iter().zip(expected) {
        assert!((v - e).abs() < 1e-12, "{v} vs {e}");
    }
}

#[test]
fn efficiency_and_symmetry() {
    for (n, seed) in [(4, 3), (6, 4), (8, 5), (11, 6)] {
        let (train, val) = small_fixture(n, 1, seed);
        let data = with_duplicate(&train.data, 0);
        let r = exact_shapley(&data, &val, &exact_config()).unwrap();
        assert!((r.total() - (r.full_score - r.empty_score)).abs() < 1e-9);
        let phi = r.raw_values();
        assert!((phi[0] - phi[n]).abs() < 1e-9, "{} vs {}", phi[0], phi[n]);
    }
}

#[test]
fn single_point_values() {
    let (train, val) = small_fixture(1, 0, 9);
    let cfg = ValuationConfig {
        min_permutations: 10,
        max_permutations: 30,
        convergence_window: 10,
        ..Default::default()
    };
    let v1 = subset_score(&train.data, &val, &cfg).unwrap();
    let v0 = empty_set_score(&val, Metric::Accuracy).unwrap();
    for r in [
        exact_shapley(&train.data, &val, &cfg).unwrap(),
        tmc_shapley(&train.data, &val, &cfg).unwrap(),
        loo_values(&train.data, &val, &cfg).unwrap(),
    ] {
        assert_eq!(r.values[0].value, v1 - v0, "{}", r.method);
    }
}

#[test]
fn tmc_converges_to_exact() {
    for (n, seed) in [(4, 11), (6, 12), (8, 13)] {
        let (train, val) = small_fixture(n, 2, seed);
        let exact = exact_shapley(&train.data, &val, &exact_config()).unwrap();
        let cfg = ValuationConfig {
            method: Method::Tmc,
            truncation_tolerance: 0.0,
            min_permutations: 5000,
            max_permutations: 5000,
            seed,
            ..Default::default()
        };
        let tmc = tmc_shapley(&train.data, &val, &cfg).unwrap();
        assert_eq!(tmc.permutations_used, 5000);
        let mae = mean_abs_diff(&tmc.raw_values(), &exact.raw_values());
        assert!(mae < 0.02, "n={n}: mae {mae}");
        assert_eq!(tmc.full_score, exact.full_score);
        assert_eq!(tmc.empty_score, exact.empty_score);
    }
}

#[test]
fn loo_matches_independent_retraining() {
    for (n, seed) in [(5, 21), (6, 22), (9, 23)] {
        let (train, val) = small_fixture(n, 2, seed);
        let cfg = ValuationConfig::default();
        let r = loo_values(&train.data, &val, &cfg).unwrap();
        let full = learner::score(&learner::train(&train.data, &cfg.learner).unwrap(), &val, Metric::Accuracy).unwrap();
        for i in 0..n {
            let rest: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            let subset = train.data.select(&rest);
            let without = if subset.positives() == 0 || subset.negatives() == 0 {
                subset_score(&subset, &val, &cfg).unwrap()
            } else {
                learner::score(&learner::train(&subset, &cfg.learner).unwrap(), &val, Metric::Accuracy).unwrap()
            };
            assert_eq!(r.values[i].value.to_bits(), (full - without).to_bits());
        }
    }
}

#[test]
fn loo_identical_points_get_identical_values() {
    let (train, val) = small_fixture(6, 1, 30);
    let data = with_duplicate(&train.data, 2);
    let r = loo_values(&data, &val, &ValuationConfig::default()).unwrap();
    assert_eq!(r.values[2].value, r.values[6].value);
}

#[test]
fn g_shapley_tracks_exact_ranking() {
    let mut total = 0.0;
    let mut count = 0;
    for seed in 100..105 {
        let (train, val) = small_fixture(6, 2, seed);
        let exact = exact_shapley(&train.data, &val, &exact_config()).unwrap();
        for s in 0..10 {
            let cfg = ValuationConfig {
                method: Method::GShapley,
                seed: s,
                min_permutations: 500,
                max_permutations: 500,
                ..Default::default()
            };
            let g = g_shapley(&train.data, &val, &cfg).unwrap();
            total += spearman(&g.raw_values(), &exact.raw_values());
            count += 1;
        }
    }
    assert!(total / count as f64 > 0.5);
}

#[test]
fn g_shapley_duplicates_agree_within_sampling_error() {
    let (train, val) = small_fixture(5, 1, 40);
    let data = with_duplicate(&train.data, 1);
    let mut diffs = Vec::new();
    for s in 0..10 {
        let cfg = ValuationConfig {
            method: Method::GShapley,
            seed: s,
            min_permutations: 400,
            max_permutations: 400,
            ..Default::default()
        };
        let r = g_shapley(&data, &val, &cfg).unwrap();
        diffs.push(r.values[1].value - r.values[5].value);
    }
    let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
    let sd = (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (diffs.len() - 1) as f64).sqrt();
    // The mean difference over seeds is within three standard errors of zero.
    assert!(mean.abs() <= 3.0 * sd / (diffs.len() as f64).sqrt() + 1e-12, "mean {mean}, sd {sd}");
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let (train, val) = small_fixture(10, 2, 50);
    let run = |threads: usize, method: Method| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let cfg = ValuationConfig {
            method,
            seed: 5,
            min_permutations: 40,
            max_permutations: 90,
            convergence_window: 20,
            ..Default::default()
        };
        pool.install(|| datum_worth::shapley::value(&train.data, &val, &cfg).unwrap())
    };
    for method in [Method::Tmc, Method::GShapley, Method::Exact, Method::Loo] {
        let one = run(1, method);
        let many = run(6, method);
        assert_eq!(one, many, "{method}");
        for (a, b) in one.values.iter().zip(&many.values) {
            assert_eq!(a.value.to_bits(), b.value.to_bits());
        }
    }
}

#[test]
fn flipped_points_are_valued_lower() {
    let mut wins = 0;
    for seed in 0..10 {
        let (train, val) = small_fixture(10, 2, 1000 + seed);
        let r = exact_shapley(&train.data, &val, &exact_config()).unwrap();
        let (mut flipped, mut clean) = (Vec::new(), Vec::new());
        for (v, &f) in r.values.iter().zip(&train.flipped) {
            if f { flipped.push(v.value) } else { clean.push(v.value) }
        }
        let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
        if mean(&flipped) < mean(&clean) {
            wins += 1;
        }
    }
    assert!(wins >= 9, "flipped points valued lower in only {wins}/10 seeds");
}
