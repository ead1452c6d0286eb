#![no_main]

use entangle_sense::scenario::locate::LineIndex;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let index = LineIndex::build(text);
        let lines = text.lines().count().max(1);
        for path in ["coupling.d_hz", "nuclear.polarization", "ladder.measured.amplitudes[3]", ""] {
            if let Some(l) = index.line_of(path) {
                assert!(l >= 1 && l <= lines + text.matches('\n').count() + 1);
            }
        }
    }
});
