#![no_main]

use datum_worth::ingest::{parse_stack, stack_to_binary, stack_to_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // Dispatches to the CSV or binary reader depending on the magic bytes.
    if let Ok(stack) = parse_stack(data) {
        assert_eq!(parse_stack(&stack_to_binary(&stack)).expect("binary"), stack);
        assert_eq!(parse_stack(stack_to_csv(&stack).as_bytes()).expect("csv"), stack);
    }
});
