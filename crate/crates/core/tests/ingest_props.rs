use std::collections::{BTreeMap, HashSet};

use datum_worth::evaluation::{Direction, EvalSet, Ranking, RankingSource, RemovalCurve};
use datum_worth::ingest::{
    curve_from_json, curve_to_json, dataset_to_csv, parse_dataset, stratified_split,
    valuation_from_json, valuation_to_json, SplitSize, SplitSpec,
};
use datum_worth::shapley::{Method, PointValue, ValuationResult};
use datum_worth::synthetic::{gaussian_classes, GaussianSpec};
use datum_worth::Metric;
use proptest::prelude::*;

fn finite() -> impl Strategy<Value = f64> {
    prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO
}

fn method() -> impl Strategy<Value = Method> {
    prop_oneof![Just(Method::Exact), Just(Method::Tmc), Just(Method::GShapley), Just(Method::Loo)]
}

proptest! {
    #[test]
    fn valuation_json_round_trips(
        values in prop::collection::vec(finite(), 0..20),
        method in method(),
        seed in any::<u64>(),
        full in finite(),
        empty in finite(),
        perms in 0usize..100_000,
        converged in any::<bool>(),
    ) {
        let r = ValuationResult {
            method,
            metric: Metric::Recall,
            values: values.iter().enumerate().map(|(i, &value)| PointValue { id: format!("id-{i}"), value }).collect(),
            permutations_used: perms,
            converged,
            full_score: full,
            empty_score: empty,
            seed,
        };
        let back = valuation_from_json(&valuation_to_json(&r)).unwrap();
        for (a, b) in r.values.iter().zip(&back.values) {
            prop_assert_eq!(a.value.to_bits(), b.value.to_bits());
        }
        prop_assert_eq!(back, r);
    }

    #[test]
    fn curve_json_round_trips(
        scores in prop::collection::vec((finite(), finite()), 1..12),
        step in 0.001f64..1.0,
    ) {
        let n = scores.len();
        let mut map = BTreeMap::new();
        map.insert(Metric::Accuracy, scores.iter().map(|s| s.0).collect());
        map.insert(Metric::Precision, scores.iter().map(|s| s.1).collect());
        let curve = RemovalCurve {
            fractions: (0..n).map(|k| k as f64 * step).collect(),
            scores: map,
            ranking: Ranking {
                order: (0..n).map(|i| format!("r{i}")).collect(),
                direction: Direction::Random,
                source: RankingSource::Random,
            },
            eval_set: EvalSet::Validation,
            step_fraction: step,
        };
        prop_assert_eq!(curve_from_json(&curve_to_json(&curve)).unwrap(), curve);
    }

    #[test]
    fn dataset_csv_round_trips(rows in prop::collection::vec((prop::collection::vec(finite(), 3), 0u8..2), 0..20)) {
        let ids = (0..rows.len()).map(|i| format!("row,{i}")).collect();
        let (feats, labels): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
        let raw = datum_worth::types::RawDataset { ids, rows: feats, labels: labels.into_iter().map(i64::from).collect(), dim: Some(3) };
        let ds = datum_worth::types::validate_dataset(raw).unwrap();
        prop_assert_eq!(parse_dataset(dataset_to_csv(&ds).as_bytes()).unwrap(), ds);
    }

    #[test]
    fn splits_partition_with_exact_counts(seed in any::<u64>(), tp in 0usize..10, vp in 0usize..10, sp in 0usize..10) {
        let pool = gaussian_classes(&GaussianSpec { n: 200, dim: 1, flip_fraction: 0.0, seed: 1, ..Default::default() }, "p").unwrap().data;
        let spec = SplitSpec {
            train: SplitSize { size: 30, positives: tp },
            validation: SplitSize { size: 15, positives: vp },
            test: SplitSize { size: 20, positives: sp },
            seed,
        };
        let split = stratified_split(&pool, &spec).unwrap();
        for (ds, part) in [(&split.train, spec.train), (&split.validation, spec.validation), (&split.test, spec.test)] {
            prop_assert_eq!(ds.len(), part.size);
            prop_assert_eq!(ds.positives(), part.positives);
        }
        let all: HashSet<&String> = split.train.ids().iter().chain(split.validation.ids()).chain(split.test.ids()).collect();
        prop_assert_eq!(all.len(), 65);
    }
}
