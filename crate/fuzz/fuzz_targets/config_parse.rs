#![no_main]

use interplab_cli::config::{parse_text, Node};
use libfuzzer_sys::fuzz_target;

// Validation must return a path-tagged error or a value, never panic.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(value) = parse_text(text) else {
        return;
    };
    let root = Node::root(&value);
    let _ = root.couple();
    let _ = root.params();
    let _ = root.space();
    let _ = root.matrix();
    let _ = root.vector(None);
    if let Ok(obj) = root.object(&["couple", "params", "x", "a", "space"]) {
        for key in ["couple", "params", "x", "a", "space"] {
            if let Some(child) = obj.opt(key) {
                let node = child.node();
                let _ = node.couple();
                let _ = node.params();
                let _ = node.vector(None);
                let _ = node.matrix();
                let _ = node.space();
            }
        }
    }
});
