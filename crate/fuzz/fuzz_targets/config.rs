#![no_main]

use evigraph::Config;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(cfg) = Config::parse_onto(Config::desk(), text) else { return };
    if cfg.validate().is_err() {
        return;
    }
    let json = serde_json::to_string(&cfg).expect("config serializes");
    assert_eq!(Config::parse(&json).expect("reparse"), cfg);
});
