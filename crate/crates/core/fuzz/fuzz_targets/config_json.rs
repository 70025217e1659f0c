#![no_main]

use libfuzzer_sys::fuzz_target;
use qwfc_core::experiment::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = ExperimentConfig::from_json(text) {
        let again = ExperimentConfig::from_json(&cfg.to_json()).expect("accepted config must round-trip");
        assert_eq!(again.hash(), cfg.hash());
    }
});
