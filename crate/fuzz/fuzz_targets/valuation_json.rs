#![no_main]

use datum_worth::ingest::{valuation_from_json, valuation_to_json};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(r) = valuation_from_json(text) {
        let again = valuation_from_json(&valuation_to_json(&r)).expect("re-parse");
        assert_eq!(r, again);
    }
});
