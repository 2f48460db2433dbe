#![no_main]

use datum_worth::ingest::{dataset_to_csv, parse_dataset};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // Anything accepted must survive a write/read round trip unchanged.
    if let Ok(ds) = parse_dataset(data) {
        let again = parse_dataset(dataset_to_csv(&ds).as_bytes()).expect("re-parse");
        assert_eq!(ds, again);
    }
});
