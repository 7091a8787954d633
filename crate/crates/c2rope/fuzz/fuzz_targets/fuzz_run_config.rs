#![no_main]

use c2rope::config::RunConfig;
use libfuzzer_sys::fuzz_target;

// Parsing must never panic, and any config it accepts must survive the
// canonical-render round trip unchanged.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = RunConfig::parse(text) {
        let rendered = cfg.to_config_text();
        let back = RunConfig::parse(&rendered).expect("canonical render must parse");
        assert_eq!(back, cfg);
        let _ = cfg.validate();
    }
});
