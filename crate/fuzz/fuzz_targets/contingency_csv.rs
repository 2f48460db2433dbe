#![no_main]

use datum_worth::ingest::parse_contingency_csv;
use datum_worth::stats::chi_square_test;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(table) = parse_contingency_csv(text) {
        if let Ok(r) = chi_square_test(&table) {
            assert!(r.statistic >= 0.0);
            assert!((0.0..=1.0).contains(&r.p_value), "p = {}", r.p_value);
        }
    }
});
