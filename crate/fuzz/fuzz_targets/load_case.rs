#![no_main]

use gridh_core::model::{load_case_str, serialize_case, Snapshot};
use libfuzzer_sys::fuzz_target;

// Case files are the only untrusted input the library parses.  Arbitrary
// bytes must never panic the loader; any case it accepts must survive a
// serialize/parse round trip and snapshot construction.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(case) = load_case_str(text) else { return };
    let out = serialize_case(&case);
    let again = load_case_str(&out).expect("serialized case must re-parse");
    assert_eq!(out, serialize_case(&again), "round trip must be a fixed point");
    let _ = Snapshot::new(case, "fuzz");
});
