#![no_main]

use footstep_harness::config::RunConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = RunConfig::from_toml(text) {
        let again = RunConfig::from_toml(&cfg.to_toml()).expect("round trip");
        assert_eq!(again, cfg);
    }
});
