#![no_main]

use dgnet_core::mesh::parse_gmsh;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = parse_gmsh(text);
    }
});
