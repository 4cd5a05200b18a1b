#![no_main]

use dgnet_cli::commands::solve::SolveConfig;
use dgnet_cli::commands::train::TrainFile;
use dgnet_cli::config::{parse_set, parse_text, resolve};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    for toml in [true, false] {
        if let Ok(root) = parse_text(text, toml) {
            let _ = resolve::<SolveConfig>(root.clone(), Vec::new());
            let _ = resolve::<TrainFile>(root, Vec::new());
        }
    }
    if let Ok(set) = parse_set(text) {
        let _ = resolve::<SolveConfig>(serde_json::Value::Object(Default::default()), vec![set]);
    }
});
