#![no_main]

use datum_worth::ingest::{curve_from_json, curve_to_json};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(c) = curve_from_json(text) {
        let again = curve_from_json(&curve_to_json(&c)).expect("re-parse");
        assert_eq!(c, again);
    }
});
