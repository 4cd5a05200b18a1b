use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use clap::Args;
use dgnet_core::io::load_dataset;
use dgnet_core::training::{train, SnapshotDataset, TrainConfig, Validation};
use dgnet_core::DgError;
use serde::{Deserialize, Serialize};

use super::{cell, Common, Overrides};
use crate::case::Case;
use crate::config::{self, CaseConfig};
use crate::output::{resolve_dir, Run};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainFile {
    /// Must describe the mesh the datasets were generated on.
    pub case: CaseConfig,
    /// Dataset directories written by `generate-data`.
    pub datasets: Vec<PathBuf>,
    /// Dataset directory whose snapshots select the best epoch.
    pub validation: Option<PathBuf>,
    pub train: TrainConfig,
}

impl Default for TrainFile {
    fn default() -> Self {
        Self {
            case: CaseConfig { elements: 50, ..CaseConfig::default() },
            datasets: Vec::new(),
            validation: None,
            train: TrainConfig::default(),
        }
    }
}

/// Train a DGNet surrogate on recorded trajectories.
#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    /// naive or model-constrained.
    #[arg(long)]
    pub mode: Option<String>,
    /// Comma-separated dataset directories.
    #[arg(long, value_delimiter = ',')]
    pub datasets: Option<Vec<PathBuf>>,
    /// Dataset directory used for model selection.
    #[arg(long)]
    pub validation: Option<PathBuf>,
    /// Training epochs.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Relative noise level of the data randomization.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Random seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Elements (1D) or cells per side (2D).
    #[arg(long = "K")]
    pub elements: Option<usize>,
}

fn load(path: &Path, case: &Case) -> Result<SnapshotDataset> {
    let ds = load_dataset(path).with_context(|| format!("loading dataset {}", path.display()))?;
    let u = &ds.snapshots[0];
    let shape = (case.disc.num_elements(), case.disc.basis.np, case.physics().nvars());
    if (u.k, u.np, u.m) != shape {
        return Err(DgError::Config(format!(
            "dataset {} has shape {:?}, the case expects {:?}",
            path.display(),
            (u.k, u.np, u.m),
            shape
        ))
        .into());
    }
    Ok(ds)
}

pub fn run(args: TrainArgs) -> Result<()> {
    let overrides = Overrides::default()
        .opt("train.mode", &args.mode)
        .opt("datasets", &args.datasets)
        .opt("validation", &args.validation)
        .opt("train.epochs", &args.epochs)
        .opt("train.delta", &args.delta)
        .opt("train.seed", &args.seed)
        .opt("case.elements", &args.elements)
        .finish(&args.common);
    let (cfg, resolved): (TrainFile, _) = config::load(args.common.config.as_deref(), overrides)?;
    if cfg.datasets.is_empty() {
        return Err(DgError::Config("at 'datasets': at least one dataset is required".into()).into());
    }
    let case = Case::build(&cfg.case)?;
    let datasets = cfg.datasets.iter().map(|p| load(p, &case)).collect::<Result<Vec<_>>>()?;
    let dt = datasets[0].dt();
    if datasets.iter().any(|d| d.dt() != dt) {
        return Err(DgError::Config("datasets use different time steps".into()).into());
    }
    let validation = match &cfg.validation {
        Some(p) => load(p, &case)?,
        None => datasets[0].clone(),
    };
    if validation.dt() != dt {
        return Err(DgError::Config("validation dataset uses a different time step".into()).into());
    }
    let validation = Validation { snapshots: validation.snapshots, dt };

    let mut run = Run::create(resolve_dir(args.common.out.as_deref(), "train"), "train", resolved)?;
    run.seed("train.seed", cfg.train.seed);
    let start = Instant::now();
    let mut timing = String::from("epoch,seconds\n");
    let outcome = train(&case.setup(), &cfg.train, &datasets, &validation, &mut |r| {
        if let Some(v) = r.validation {
            let secs = start.elapsed().as_secs_f64();
            let _ = writeln!(timing, "{},{secs:.3}", r.epoch);
            eprintln!("epoch {:>6}  loss {:<12}  validation {v:.6}  ({secs:.1} s)", r.epoch, cell(r.loss));
        }
    })?;

    let mut history = String::from("epoch,loss,validation,best,skipped\n");
    for r in &outcome.history {
        let _ = writeln!(history, "{},{},{},{},{}", r.epoch, cell(r.loss), cell(r.validation), cell(r.best), r.skipped);
    }
    run.write("history.csv", history.as_bytes())?;
    // Wall times vary between runs and stay out of the artifact list.
    std::fs::write(run.path("timing.csv"), timing)?;
    run.write("best.ckpt", &outcome.best.encode())?;
    run.write("last.ckpt", &outcome.last.encode())?;
    run.write(
        "summary.csv",
        format!("best_epoch,best_validation\n{},{}\n", outcome.best_epoch, outcome.best_error).as_bytes(),
    )?;
    let manifest = run.finish()?;
    eprintln!("best validation {:.6} at epoch {}; wrote {}", outcome.best_error, outcome.best_epoch, manifest.display());
    Ok(())
}
