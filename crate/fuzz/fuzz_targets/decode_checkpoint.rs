#![no_main]

use dgnet_core::surrogate::SurrogateParams;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(params) = SurrogateParams::decode(data) {
        assert_eq!(SurrogateParams::decode(&params.encode()).expect("re-decode").encode(), params.encode());
    }
});
