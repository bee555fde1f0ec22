#![no_main]

use evigraph::checkpoint::Checkpoint;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(ck) = Checkpoint::parse(text) else { return };
    let again = Checkpoint::parse(&ck.to_json()).expect("reparse");
    assert_eq!(again.to_json(), ck.to_json());
    ck.into_model().expect("checked checkpoint builds a model");
});
