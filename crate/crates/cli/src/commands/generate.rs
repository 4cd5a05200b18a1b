use anyhow::Result;
use clap::Args;
use dgnet_core::io::save_dataset;
use dgnet_core::physics::sod_family;
use dgnet_core::training::{generate_dataset, DatasetMeta};
use serde::{Deserialize, Serialize};

use super::{Common, Overrides};
use crate::case::Case;
use crate::config::{self, step_count, CaseConfig};
use crate::output::{resolve_dir, Run};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerateConfig {
    /// Mesh and discretization; `case.problem` is replaced by each entry of `problems`.
    pub case: CaseConfig,
    /// Catalog ids; `sod-family` expands to its eight members.
    pub problems: Vec<String>,
    pub t_final: f64,
    pub dt: f64,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        Self {
            case: CaseConfig { elements: 50, ..CaseConfig::default() },
            problems: vec!["sod-family".into(), "sod".into()],
            t_final: 0.15,
            dt: 1e-4,
        }
    }
}

/// Record DG training trajectories (snapshots and first stages).
#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Comma-separated catalog ids.
    #[arg(long, value_delimiter = ',')]
    pub problems: Option<Vec<String>>,
    /// Elements (1D) or cells per side (2D).
    #[arg(long = "K")]
    pub elements: Option<usize>,
    /// Polynomial order.
    #[arg(long = "N")]
    pub order: Option<usize>,
    /// Final time.
    #[arg(long = "T")]
    pub t_final: Option<f64>,
    /// Time step.
    #[arg(long)]
    pub dt: Option<f64>,
}

pub fn expand(problems: &[String]) -> Vec<String> {
    let mut out = Vec::new();
    for p in problems {
        if p == "sod-family" {
            out.extend((0..sod_family().len()).map(|i| format!("sod-family-{i}")));
        } else {
            out.push(p.clone());
        }
    }
    out
}

pub fn run(args: GenerateArgs) -> Result<()> {
    let overrides = Overrides::default()
        .opt("problems", &args.problems)
        .opt("case.elements", &args.elements)
        .opt("case.order", &args.order)
        .opt("t_final", &args.t_final)
        .opt("dt", &args.dt)
        .finish(&args.common);
    let (cfg, resolved): (GenerateConfig, _) = config::load(args.common.config.as_deref(), overrides)?;
    let n = step_count(cfg.t_final, cfg.dt)?;
    let mut run = Run::create(resolve_dir(args.common.out.as_deref(), "generate-data"), "generate-data", resolved)?;
    for id in expand(&cfg.problems) {
        let case_cfg = CaseConfig { problem: id.clone(), ..cfg.case.clone() };
        let case = Case::build(&case_cfg)?;
        let meta = DatasetMeta {
            problem: id.clone(),
            gamma: cfg.case.gamma,
            elements: case.disc.num_elements(),
            order: cfg.case.order,
            dt: cfg.dt,
            flux: cfg.case.flux,
            quadrature: cfg.case.quadrature,
        };
        let ds = generate_dataset(&case.setup(), &case.initial(), cfg.dt, n, meta)?;
        save_dataset(&run.path(&id), &ds)?;
        for file in ["meta.json", "snapshots.dgf", "stage1.dgf"] {
            run.record(format!("{id}/{file}"));
        }
        eprintln!("{id}: {n} steps");
    }
    let manifest = run.finish()?;
    eprintln!("wrote {}", manifest.display());
    Ok(())
}
