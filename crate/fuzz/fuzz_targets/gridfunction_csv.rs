#![no_main]

use interplab::GridFunction;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(g) = GridFunction::from_csv(text) {
        let again = GridFunction::from_csv(&g.to_csv("t")).expect("own output parses");
        assert_eq!(again.len(), g.len());
        assert_eq!(again.dim(), g.dim());
    }
});
