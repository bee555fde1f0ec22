#![no_main]

use evigraph::data::Instance;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(line) = std::str::from_utf8(data) else { return };
    let Ok(inst) = Instance::from_json_line(line) else { return };
    let again = Instance::from_json_line(&inst.to_json_line()).expect("reparse");
    assert_eq!(again, inst);
});
