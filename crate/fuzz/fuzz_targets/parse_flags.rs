#![no_main]

use datum_worth::ingest::parse_flags;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    let _ = parse_flags(text);
});
