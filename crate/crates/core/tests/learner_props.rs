use datum_worth::learner::{self, loss, train, LearnerConfig, Model};
use datum_worth::{Dataset, Metric};
use proptest::prelude::*;

fn dataset_strategy() -> impl Strategy<Value = Dataset> {
    (1usize..4, 2usize..16).prop_flat_map(|(dim, n)| {
        (
            prop::collection::vec(prop::collection::vec(-3.0f64..3.0, dim), n),
            prop::collection::vec(0u8..2, n),
        )
            .prop_map(|(rows, labels)| {
                let ids = (0..rows.len()).map(|i| format!("p{i}")).collect();
                Dataset::new(ids, rows, labels).unwrap()
            })
    })
}

fn config_strategy() -> impl Strategy<Value = LearnerConfig> {
    (0.01f64..=0.5, 1usize..200, prop_oneof![Just(0.0), 0.0f64..0.5], any::<bool>()).prop_map(
        |(learning_rate, iterations, l2_penalty, fit_intercept)| LearnerConfig {
            learning_rate,
            iterations,
            l2_penalty,
            fit_intercept,
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn training_is_deterministic(data in dataset_strategy(), cfg in config_strategy()) {
        let a = train(&data, &cfg).unwrap();
        let b = train(&data, &cfg).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.weights.iter().all(|w| w.is_finite()));
        prop_assert_eq!(a.weights.len(), data.dim());
        if !cfg.fit_intercept {
            prop_assert_eq!(a.intercept, 0.0);
        }
    }

    #[test]
    fn loss_does_not_increase(data in dataset_strategy(), cfg in config_strategy()) {
        let start = loss(&Model::zeros(data.dim(), cfg), &data);
        let end = loss(&train(&data, &cfg).unwrap(), &data);
        prop_assert!(end <= start + 1e-12, "{} -> {}", start, end);
    }

    #[test]
    fn label_flip_with_negated_features_mirrors_model(data in dataset_strategy(), cfg in config_strategy()) {
        let mut raw = data.to_raw();
        for row in &mut raw.rows {
            row.iter_mut().for_each(|x| *x = -*x);
        }
        raw.labels.iter_mut().for_each(|y| *y = 1 - *y);
        let mirrored = datum_worth::types::validate_dataset(raw).unwrap();

        let m = train(&data, &cfg).unwrap();
        let mm = train(&mirrored, &cfg).unwrap();
        for (a, b) in m.weights.iter().zip(&mm.weights) {
            prop_assert!((a - b).abs() < 1e-9);
        }
        prop_assert!((m.intercept + mm.intercept).abs() < 1e-9);

        // Predictions mirror wherever the margin is not razor-thin.
        let clear = data.rows().all(|x| {
            let z: f64 = x.iter().zip(&m.weights).map(|(a, b)| a * b).sum::<f64>() + m.intercept;
            z.abs() > 1e-6
        });
        if clear {
            prop_assert_eq!(
                learner::score(&m, &data, Metric::Accuracy).unwrap(),
                learner::score(&mm, &mirrored, Metric::Accuracy).unwrap()
            );
        }
    }

    #[test]
    fn metrics_stay_in_unit_interval(data in dataset_strategy(), cfg in config_strategy()) {
        let m = train(&data, &cfg).unwrap();
        for metric in Metric::ALL {
            let s = learner::score(&m, &data, metric).unwrap();
            prop_assert!((0.0..=1.0).contains(&s));
        }
        for p in learner::predict_proba(&m, data.features()).unwrap() {
            prop_assert!(p > 0.0 && p < 1.0);
        }
    }
}
