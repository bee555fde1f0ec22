#![no_main]

use evigraph::data::Prediction;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(p) = serde_json::from_slice::<Prediction>(data) else { return };
    let Ok(text) = serde_json::to_string(&p) else { return };
    let again: Prediction = serde_json::from_str(&text).expect("reparse");
    assert_eq!(again, p);
});
