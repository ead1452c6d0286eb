#![no_main]

use entangle_sense::scenario::ScenarioConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(config) = ScenarioConfig::from_json(text) {
            let _ = config.diagnostics(true, None);
        }
        let _ = ScenarioConfig::load(text);
    }
});
