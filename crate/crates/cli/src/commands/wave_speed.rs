use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use dgnet_core::analysis::{advection_oracle_flux, learned_flux, wave_speed_profile, WavePlane};
use serde::{Deserialize, Serialize};

use super::{load_checkpoint, Common, Overrides};
use crate::config;
use crate::output::{resolve_dir, Run};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WaveSpeedConfig {
    /// Learned flux to probe; the linear-advection oracle when absent.
    pub checkpoint: Option<PathBuf>,
    /// Spatial dimension of the oracle.
    pub dim: usize,
    /// Normal advection speed of the oracle.
    pub speed: f64,
    /// Samples per free axis.
    pub resolution: usize,
}

impl Default for WaveSpeedConfig {
    fn default() -> Self {
        Self { checkpoint: None, dim: 1, speed: 1.0, resolution: 201 }
    }
}

/// Normalized linearized wave speed of a learned or oracle flux.
#[derive(Debug, Args)]
pub struct WaveSpeedArgs {
    #[command(flatten)]
    pub common: Common,
    /// Trained surrogate checkpoint (.ckpt).
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Samples per free axis.
    #[arg(long)]
    pub resolution: Option<usize>,
}

pub fn planes_csv(planes: &[WavePlane]) -> String {
    let mut csv = String::from("plane,fixed,sign,cell,value\n");
    for (i, p) in planes.iter().enumerate() {
        for (c, v) in p.values.iter().enumerate() {
            let _ = writeln!(csv, "{i},{},{},{c},{}", p.fixed, p.sign, super::cell(*v));
        }
    }
    csv
}

pub fn run(args: WaveSpeedArgs) -> Result<()> {
    let overrides = Overrides::default()
        .opt("checkpoint", &args.checkpoint)
        .opt("resolution", &args.resolution)
        .finish(&args.common);
    let (cfg, resolved): (WaveSpeedConfig, _) = config::load(args.common.config.as_deref(), overrides)?;
    let planes = match &cfg.checkpoint {
        Some(path) => {
            let params = load_checkpoint(Some(path))?;
            let flux = learned_flux(&params);
            wave_speed_profile(params.dim, cfg.resolution, &flux)?
        }
        None => wave_speed_profile(cfg.dim, cfg.resolution, &advection_oracle_flux(cfg.speed))?,
    };
    let mut run = Run::create(resolve_dir(args.common.out.as_deref(), "wave-speed"), "wave-speed", resolved)?;
    run.write("wave_speed.csv", planes_csv(&planes).as_bytes())?;
    let manifest = run.finish()?;
    eprintln!("wrote {}", manifest.display());
    Ok(())
}
