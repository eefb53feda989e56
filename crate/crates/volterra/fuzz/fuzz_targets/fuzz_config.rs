#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = volterra::config::parse_config_str(text) {
            let _ = volterra::config::grid_from_config(&cfg);
        }
    }
});
