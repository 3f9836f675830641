#![no_main]

use libfuzzer_sys::fuzz_target;
use markabsa_core::experiment::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = ExperimentConfig::parse(text, std::path::Path::new("/base")) {
        let _ = cfg.validate();
    }
});
