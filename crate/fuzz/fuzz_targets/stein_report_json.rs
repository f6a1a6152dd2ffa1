#![no_main]

use interplab::SteinReport;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(r) = SteinReport::from_json(text) {
        assert_eq!(SteinReport::from_json(&r.to_json()).expect("own output parses"), r);
    }
});
