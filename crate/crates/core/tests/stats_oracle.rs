use datum_worth::stats::{chi_square_sf, chi_square_test, regularized_upper_gamma, ContingencyTable};
use proptest::prelude::*;

/// (dof, statistic, upper-tail p) from an independent reference implementation
/// (scipy.stats.chi2.sf), generated before this crate's gamma routines were written.
const REFERENCE: [(u64, f64, f64); 25] = [
    (1, 0.5, 0.47950012218695337),
    (1, 3.841458820694124, 0.04999999999999989),
    (1, 10.0, 0.001565402258002549),
    (2, 0.1, 0.951229424500714),
    (2, 5.991464547107979, 0.05000000000000007),
    (3, 1.0, 0.8012519569012009),
    (3, 7.814727903251178, 0.05),
    (4, 2.5, 0.6446357929354278),
    (4, 20.0, 0.0004993992273873336),
    (5, 0.01, 0.9999994699729957),
    (5, 11.070497693516351, 0.05000000000000007),
    (6, 30.0, 3.930844818448459e-05),
    (7, 3.3, 0.8559330472514932),
    (8, 15.507313055865453, 0.050000000000000024),
    (9, 1.0, 0.9994375026978325),
    (10, 18.307038053275146, 0.05000000000000005),
    (12, 5.0, 0.9579789618046939),
    (15, 40.0, 0.00045349813510223386),
    (20, 10.0, 0.9681719426937951),
    (25, 100.0, 6.274266201376244e-11),
    (30, 29.0, 0.5175966978958983),
    (50, 67.5, 0.050040651716103376),
    (1, 1e-06, 0.9992021155721779),
    (3, 60.0, 5.878230727906921e-13),
    (100, 90.0, 0.7531979655998298),
];

#[test]
fn survival_function_matches_reference() {
    for (dof, x, p) in REFERENCE {
        let got = chi_square_sf(x, dof);
        assert!((got - p).abs() <= 1e-10, "dof {dof}, x {x}: {got} vs {p}");
        let general = regularized_upper_gamma(dof as f64 / 2.0, x / 2.0);
        assert!((general - p).abs() <= 1e-10, "gamma route, dof {dof}, x {x}: {general} vs {p}");
    }
}

#[test]
fn reference_statistics_for_published_tables() {
    // Statistics and p-values from scipy.stats.chi2_contingency(correction=False).
    let cases: [(&[[u64; 2]], f64, f64); 4] = [
        (&[[13, 87], [22, 78], [4, 96]], 14.323607427055704, 0.0007756542326762646),
        (&[[65, 35], [22, 78], [20, 80]], 56.33625490291028, 5.844369724050604e-13),
        (&[[13, 87], [100, 0], [5, 95]], 232.69696405289622, 2.954583567573488e-51),
        (&[[22, 0], [2, 11], [50, 2]], 58.5542139772909, 1.9280308946907148e-13),
    ];
    for (rows, stat, p) in cases {
        let t = ContingencyTable::new(rows.iter().map(|r| r.to_vec()).collect()).unwrap();
        let r = chi_square_test(&t).unwrap();
        assert!((r.statistic - stat).abs() < 1e-9 * stat);
        assert!((r.p_value - p).abs() <= 1e-10 && (r.p_value - p).abs() <= 1e-8 * p, "{} vs {p}", r.p_value);
    }
}

fn table_strategy() -> impl Strategy<Value = Vec<Vec<u64>>> {
    (2usize..5, 2usize..5).prop_flat_map(|(r, c)| prop::collection::vec(prop::collection::vec(1u64..60, c), r))
}

proptest! {
    #[test]
    fn p_value_decreases_with_statistic(dof in 1u64..40, a in 0.0f64..150.0, b in 0.0f64..150.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(chi_square_sf(hi, dof) <= chi_square_sf(lo, dof));
    }

    #[test]
    fn dof_two_is_exponential(x in 0.0f64..200.0) {
        prop_assert_eq!(chi_square_sf(x, 2), (-x / 2.0).exp());
    }

    #[test]
    fn invariant_under_row_and_column_permutation(counts in table_strategy(), rs in any::<u64>(), cs in any::<u64>()) {
        let t = ContingencyTable::new(counts.clone()).unwrap();
        let r = counts.len();
        let c = counts[0].len();
        let mut rows: Vec<usize> = (0..r).collect();
        let mut cols: Vec<usize> = (0..c).collect();
        rows.rotate_left((rs % r as u64) as usize);
        cols.rotate_left((cs % c as u64) as usize);
        if rs % 2 == 1 { rows.reverse(); }
        let permuted = t.sub_table(&rows, &cols).unwrap();
        let a = chi_square_test(&t).unwrap();
        let b = chi_square_test(&permuted).unwrap();
        prop_assert_eq!(a.dof, b.dof);
        prop_assert!((a.statistic - b.statistic).abs() <= 1e-9 * (1.0 + a.statistic));
        prop_assert!((a.p_value - b.p_value).abs() <= 1e-12);
    }
}
