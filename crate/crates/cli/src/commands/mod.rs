pub mod analyze;
pub mod convergence;
pub mod generate;
pub mod histogram;
pub mod solve;
pub mod train;
pub mod wave_speed;

use std::path::{Path, PathBuf};

use clap::Args;
use dgnet_core::surrogate::SurrogateParams;
use dgnet_core::DgError;
use serde::Serialize;

use crate::config::{parse_set, Override};

/// Options shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML or JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set train.epochs=100`.
    #[arg(long = "set", value_name = "KEY=VALUE", value_parser = parse_set)]
    pub set: Vec<Override>,
    /// Output directory [default: $DGNET_OUTPUT_ROOT/<command> or runs/<command>].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Flag overrides, applied before `--set`.
#[derive(Default)]
pub struct Overrides(Vec<Override>);

impl Overrides {
    pub fn opt<T: Serialize>(mut self, key: &str, v: &Option<T>) -> Self {
        if let Some(v) = v {
            self.0.push((key.into(), serde_json::to_value(v).expect("flag values serialize")));
        }
        self
    }

    pub fn finish(mut self, common: &Common) -> Vec<Override> {
        self.0.extend(common.set.iter().cloned());
        self.0
    }
}

pub fn load_checkpoint(path: Option<&Path>) -> Result<SurrogateParams, DgError> {
    let path = path.ok_or_else(|| DgError::Config("a checkpoint path is required".into()))?;
    let bytes = std::fs::read(path)
        .map_err(|e| DgError::Config(format!("cannot read checkpoint {}: {e}", path.display())))?;
    SurrogateParams::decode(&bytes)
}

/// Formats optional values for CSV; `None` becomes an empty cell.
pub fn cell(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}
