//! Binary snapshot frames, dataset directories and CSV export.
//!
//! A frame is the magic `DGF1`, little-endian `u32` K, N_p and m, the time
//! as `f64`, then the `K·m·N_p` nodal values as `f64` in state layout.
//! Frame files are frames back to back.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::dg::{Discretization, StateField};
use crate::error::{DgError, Result};
use crate::physics::MAX_VARS;
use crate::training::{DatasetMeta, SnapshotDataset};

pub const FRAME_MAGIC: &[u8; 4] = b"DGF1";
const HEADER_LEN: usize = 24;
const MAX_NP: usize = 1024;

pub fn encode_frame(u: &StateField<f64>, out: &mut Vec<u8>) {
    out.reserve(HEADER_LEN + 8 * u.data.len());
    out.extend_from_slice(FRAME_MAGIC);
    for n in [u.k, u.np, u.m] {
        out.extend_from_slice(&(n as u32).to_le_bytes());
    }
    out.extend_from_slice(&u.t.to_le_bytes());
    for v in &u.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn encode_frames<'a>(frames: impl IntoIterator<Item = &'a StateField<f64>>) -> Vec<u8> {
    let mut out = Vec::new();
    for u in frames {
        encode_frame(u, &mut out);
    }
    out
}

/// Decodes one frame from the front of `bytes`; returns it and the rest.
pub fn decode_frame(bytes: &[u8]) -> Result<(StateField<f64>, &[u8])> {
    let bad = |m: &str| DgError::Format(format!("frame: {m}"));
    if bytes.len() < HEADER_LEN {
        return Err(bad("truncated header"));
    }
    if &bytes[..4] != FRAME_MAGIC {
        return Err(bad("bad magic"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().expect("4 bytes")) as usize;
    let (k, np, m) = (word(0), word(1), word(2));
    let t = f64::from_le_bytes(bytes[16..24].try_into().expect("8 bytes"));
    if m == 0 || m > MAX_VARS || np == 0 || np > MAX_NP || k == 0 {
        return Err(bad("shape out of range"));
    }
    let n = k
        .checked_mul(np)
        .and_then(|v| v.checked_mul(m))
        .filter(|n| n.checked_mul(8).is_some_and(|b| b <= bytes.len() - HEADER_LEN))
        .ok_or_else(|| bad("truncated body"))?;
    let body = &bytes[HEADER_LEN..HEADER_LEN + 8 * n];
    let data = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    Ok((StateField::from_data(k, np, m, data, t)?, &bytes[HEADER_LEN + 8 * n..]))
}

/// Decodes a whole frame file. All frames must share one shape.
pub fn decode_frames(mut bytes: &[u8]) -> Result<Vec<StateField<f64>>> {
    let mut out: Vec<StateField<f64>> = Vec::new();
    while !bytes.is_empty() {
        let (u, rest) = decode_frame(bytes)?;
        if out.first().is_some_and(|f| !f.same_shape(&u)) {
            return Err(DgError::Format("frame: shape changes within file".into()));
        }
        out.push(u);
        bytes = rest;
    }
    Ok(out)
}

pub fn write_frames(path: &Path, frames: &[StateField<f64>]) -> Result<()> {
    fs::write(path, encode_frames(frames))?;
    Ok(())
}

pub fn read_frames(path: &Path) -> Result<Vec<StateField<f64>>> {
    decode_frames(&fs::read(path)?)
}

/// Writes `meta.json`, `snapshots.dgf` and `stage1.dgf` into `dir`.
pub fn save_dataset(dir: &Path, ds: &SnapshotDataset) -> Result<()> {
    fs::create_dir_all(dir)?;
    let meta = serde_json::to_string_pretty(&ds.meta).map_err(|e| DgError::Format(e.to_string()))?;
    fs::write(dir.join("meta.json"), meta + "\n")?;
    write_frames(&dir.join("snapshots.dgf"), &ds.snapshots)?;
    write_frames(&dir.join("stage1.dgf"), &ds.stage1)?;
    Ok(())
}

pub fn load_dataset(dir: &Path) -> Result<SnapshotDataset> {
    let meta: DatasetMeta = serde_json::from_str(&fs::read_to_string(dir.join("meta.json"))?)
        .map_err(|e| DgError::Format(format!("{}: {e}", dir.join("meta.json").display())))?;
    let snapshots = read_frames(&dir.join("snapshots.dgf"))?;
    let stage1 = read_frames(&dir.join("stage1.dgf"))?;
    if snapshots.len() != stage1.len() + 1 || snapshots.first().zip(stage1.first()).is_some_and(|(a, b)| !a.same_shape(b)) {
        return Err(DgError::Format(format!("{}: stage and snapshot files disagree", dir.display())));
    }
    Ok(SnapshotDataset { meta, snapshots, stage1 })
}

/// Nodal values as CSV: `element,node,x,y,u0,…`.
pub fn write_state_csv(w: &mut impl Write, disc: &Discretization, u: &StateField<f64>) -> Result<()> {
    write!(w, "element,node,x,y")?;
    for q in 0..u.m {
        write!(w, ",u{q}")?;
    }
    writeln!(w)?;
    for k in 0..u.k {
        for l in 0..u.np {
            let x = disc.node(k, l);
            write!(w, "{k},{l},{},{}", x[0], x[1])?;
            for q in 0..u.m {
                write!(w, ",{}", u.data[u.idx(k, q, l)])?;
            }
            writeln!(w)?;
        }
    }
    Ok(())
}

/// Header line plus one row per record.
pub fn write_csv<R: AsRef<[f64]>>(w: &mut impl Write, header: &[&str], rows: impl IntoIterator<Item = R>) -> Result<()> {
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        let cells: Vec<String> = row.as_ref().iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}
