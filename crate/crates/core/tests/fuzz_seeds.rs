//! The checked-in fuzz seeds are valid inputs for their parsers.

use std::path::PathBuf;

use dgnet_core::io::{decode_frames, encode_frames};
use dgnet_core::mesh::{parse_gmsh, parse_json, parse_uniform_1d};
use dgnet_core::surrogate::SurrogateParams;

fn seeds(target: &str) -> Vec<(PathBuf, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .map(|p| {
            let bytes = std::fs::read(&p).unwrap();
            (p, bytes)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

fn text(bytes: &[u8]) -> &str {
    std::str::from_utf8(bytes).unwrap()
}

#[test]
fn mesh_seeds_parse() {
    for (p, b) in seeds("parse_gmsh") {
        parse_gmsh(text(&b)).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
    for (p, b) in seeds("parse_mesh_json") {
        parse_json(text(&b)).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
    for (p, b) in seeds("parse_uniform_1d") {
        parse_uniform_1d(text(&b)).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
}

#[test]
fn binary_seeds_decode_and_round_trip() {
    for (p, b) in seeds("decode_checkpoint") {
        let params = SurrogateParams::decode(&b).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        assert_eq!(params.encode(), b);
    }
    for (p, b) in seeds("decode_frames") {
        let frames = decode_frames(&b).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        assert_eq!(encode_frames(&frames), b);
    }
}
