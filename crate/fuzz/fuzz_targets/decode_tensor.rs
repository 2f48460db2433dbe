#![no_main]

use datum_worth::ingest::{decode_tensor, encode_tensor};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok((dims, values)) = decode_tensor(data) {
        assert_eq!(dims.iter().product::<usize>(), values.len());
        assert_eq!(encode_tensor(&dims, &values), data);
    }
});
