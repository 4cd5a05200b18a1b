#![no_main]

use dgnet_core::mesh::{parse_json, to_json};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        // Anything accepted must survive a round trip.
        if let Ok(mesh) = parse_json(text) {
            let again = parse_json(&to_json(&mesh)).expect("re-parse of serialized mesh");
            assert_eq!(again.elements, mesh.elements);
        }
    }
});
