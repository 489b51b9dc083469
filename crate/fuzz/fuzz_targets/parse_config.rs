#![no_main]

use libfuzzer_sys::fuzz_target;
use palpsim::config::SimConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = SimConfig::parse(text) {
            assert_eq!(SimConfig::parse(&cfg.to_text()).unwrap(), cfg);
        }
    }
});
