#![no_main]

use entangle_sense::protocols::PulseSequence;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(seq) = PulseSequence::from_json(text) {
            let again = PulseSequence::from_json(&seq.to_json()).expect("round trip");
            assert_eq!(seq.segments.len(), again.segments.len());
        }
    }
});
