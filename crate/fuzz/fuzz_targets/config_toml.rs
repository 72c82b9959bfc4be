#![no_main]

use libfuzzer_sys::fuzz_target;
use tricoin::config::RunConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(config) = RunConfig::from_toml_str(text) {
            config
                .scenario
                .validate()
                .expect("loaded configs are valid");
        }
    }
});
