#![no_main]

use libfuzzer_sys::fuzz_target;
use music_imaging::config::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(config) = ExperimentConfig::from_json(text) {
            assert_eq!(
                ExperimentConfig::from_json(&config.to_json()).unwrap(),
                config
            );
        }
    }
});
