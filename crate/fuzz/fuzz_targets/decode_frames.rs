#![no_main]

use dgnet_core::io::{decode_frames, encode_frames};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(frames) = decode_frames(data) {
        assert_eq!(encode_frames(&frames), data);
    }
});
