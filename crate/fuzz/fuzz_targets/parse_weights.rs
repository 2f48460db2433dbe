#![no_main]

use datum_worth::ingest::parse_weights;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(w) = parse_weights(data) {
        assert!(w.as_slice().iter().all(|v| v.is_finite()));
    }
});
