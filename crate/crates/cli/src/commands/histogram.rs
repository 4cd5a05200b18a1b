use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use dgnet_core::analysis::{input_density_histogram, DensityHistogram};
use dgnet_core::io::load_dataset;
use dgnet_core::training::{generate_dataset, DatasetMeta};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Common, Overrides};
use crate::case::Case;
use crate::config::{self, step_count, CaseConfig};
use crate::output::{resolve_dir, Run};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HistogramConfig {
    pub case: CaseConfig,
    /// Dataset directories; when empty the case is solved to `t_final`.
    pub datasets: Vec<PathBuf>,
    pub t_final: f64,
    pub dt: f64,
    /// Randomization level of the enriched histogram.
    pub delta: f64,
    /// Noise redraws per snapshot.
    pub epochs: usize,
    pub bins: usize,
    pub seed: u64,
}

impl Default for HistogramConfig {
    fn default() -> Self {
        Self {
            case: CaseConfig { elements: 50, ..CaseConfig::default() },
            datasets: Vec::new(),
            t_final: 0.15,
            dt: 1e-4,
            delta: 0.02,
            epochs: 1,
            bins: 200,
            seed: 0,
        }
    }
}

/// Density of normalized face inputs, clean and randomized.
#[derive(Debug, Args)]
pub struct HistogramArgs {
    #[command(flatten)]
    pub common: Common,
    /// Catalog id, e.g. sod, lax, sod-family-3, vortex, config12.
    #[arg(long)]
    pub problem: Option<String>,
    /// Comma-separated dataset directories.
    #[arg(long, value_delimiter = ',')]
    pub datasets: Option<Vec<PathBuf>>,
    /// Relative noise level of the data randomization.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Histogram cells per axis.
    #[arg(long)]
    pub bins: Option<usize>,
    /// Random seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Clean and randomized histograms of the configured snapshots.
pub fn histograms(cfg: &HistogramConfig) -> Result<(DensityHistogram, DensityHistogram)> {
    let case = Case::build(&cfg.case)?;
    let mut snapshots = Vec::new();
    if cfg.datasets.is_empty() {
        let n = step_count(cfg.t_final, cfg.dt)?;
        let meta = DatasetMeta {
            problem: cfg.case.problem.clone(),
            gamma: cfg.case.gamma,
            elements: case.disc.num_elements(),
            order: cfg.case.order,
            dt: cfg.dt,
            flux: cfg.case.flux,
            quadrature: cfg.case.quadrature,
        };
        snapshots = generate_dataset(&case.setup(), &case.initial(), cfg.dt, n, meta)?.snapshots;
    }
    for p in &cfg.datasets {
        snapshots.extend(load_dataset(p).with_context(|| format!("loading dataset {}", p.display()))?.snapshots);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let phys = case.physics();
    let clean = input_density_histogram(&case.disc, &snapshots, &phys, &case.bcs, 0.0, 1, cfg.bins, &mut rng)?;
    let noisy = input_density_histogram(&case.disc, &snapshots, &phys, &case.bcs, cfg.delta, cfg.epochs.max(1), cfg.bins, &mut rng)?;
    Ok((clean, noisy))
}

pub fn run(args: HistogramArgs) -> Result<()> {
    let overrides = Overrides::default()
        .opt("case.problem", &args.problem)
        .opt("datasets", &args.datasets)
        .opt("delta", &args.delta)
        .opt("bins", &args.bins)
        .opt("seed", &args.seed)
        .finish(&args.common);
    let (cfg, resolved): (HistogramConfig, _) = config::load(args.common.config.as_deref(), overrides)?;
    let (clean, noisy) = histograms(&cfg)?;
    let mut run = Run::create(resolve_dir(args.common.out.as_deref(), "histogram"), "histogram", resolved)?;
    run.seed("seed", cfg.seed);
    let (a, b) = (clean.occupied(), noisy.occupied());
    let cells: BTreeSet<_> = a.union(&b).copied().collect();
    let mut csv = String::from("set,cell,clean,randomized\n");
    for (set, c) in cells {
        let _ = writeln!(csv, "{set},{c},{},{}", clean.counts[set][c], noisy.counts[set][c]);
    }
    run.write("histogram.csv", csv.as_bytes())?;
    let missing = a.difference(&b).count();
    run.write(
        "summary.csv",
        format!("clean_occupied,randomized_occupied,clean_only\n{},{},{missing}\n", a.len(), b.len()).as_bytes(),
    )?;
    let manifest = run.finish()?;
    eprintln!("occupied cells: clean {}, randomized {}; wrote {}", a.len(), b.len(), manifest.display());
    Ok(())
}
