use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use dgnet_core::dg::StateField;
use dgnet_core::io::{encode_frames, write_csv, write_state_csv};
use dgnet_core::surrogate::{DgNetTangent, SurrogateMode};
use dgnet_core::time::{integrate, ImplicitConfig, Scheme, Tangent};
use serde::{Deserialize, Serialize};

use super::{load_checkpoint, Common, Overrides};
use crate::case::Case;
use crate::config::{self, step_count, CaseConfig};
use crate::output::{resolve_dir, Run};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    Dg,
    Dgnet,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveConfig {
    pub case: CaseConfig,
    pub engine: Engine,
    pub scheme: Scheme,
    pub t_final: f64,
    pub dt: f64,
    /// Surrogate weights for the `dgnet` engine.
    pub checkpoint: Option<PathBuf>,
    pub surrogate: SurrogateMode,
    /// Keep every this many steps; 0 keeps the initial and final states.
    pub output_every: usize,
    pub implicit: ImplicitConfig,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            case: CaseConfig::default(),
            engine: Engine::Dg,
            scheme: Scheme::SspRk2,
            t_final: 0.25,
            dt: 1e-4,
            checkpoint: None,
            surrogate: SurrogateMode::Learned,
            output_every: 0,
            implicit: ImplicitConfig::default(),
        }
    }
}

/// Integrate one problem with the DG solver or a trained surrogate.
#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub common: Common,
    /// Spatial operator: the DG solver or a trained surrogate.
    #[arg(long, value_enum)]
    pub engine: Option<Engine>,
    /// ssp-rk2 or backward-euler.
    #[arg(long)]
    pub scheme: Option<String>,
    /// Catalog id, e.g. sod, lax, sod-family-3, vortex, config12.
    #[arg(long)]
    pub problem: Option<String>,
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
    /// Trained surrogate checkpoint (.ckpt).
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Mesh file (.msh, .json or .txt).
    #[arg(long)]
    pub mesh: Option<PathBuf>,
}

fn run_with<F: Tangent>(cfg: &SolveConfig, case: &Case, tangent: &F, run: &mut Run) -> Result<()> {
    let n = step_count(cfg.t_final, cfg.dt)?;
    let mut frames: Vec<StateField<f64>> = Vec::new();
    let mut count = 0usize;
    let last = integrate(&case.initial(), cfg.dt, n, cfg.scheme, tangent, &case.limiter, &cfg.implicit, &mut |u| {
        if count == 0 || (cfg.output_every > 0 && count.is_multiple_of(cfg.output_every)) {
            frames.push(u.clone());
        }
        count += 1;
        Ok(())
    })?;
    if frames.last().is_none_or(|f| f.t != last.t) {
        frames.push(last.clone());
    }
    run.write("snapshots.dgf", &encode_frames(&frames))?;
    let mut csv = Vec::new();
    write_state_csv(&mut csv, &case.disc, &last)?;
    run.write("final.csv", &csv)?;
    let totals = case.disc.integrate(&last);
    let mut header = vec!["steps".to_string(), "t".to_string()];
    header.extend((0..last.m).map(|q| format!("total_u{q}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut row = vec![n as f64, last.t];
    row.extend(totals);
    let mut csv = Vec::new();
    write_csv(&mut csv, &header, [row])?;
    run.write("summary.csv", &csv)?;
    Ok(())
}

pub fn run(args: SolveArgs) -> Result<()> {
    let overrides = Overrides::default()
        .opt("engine", &args.engine)
        .opt("scheme", &args.scheme)
        .opt("case.problem", &args.problem)
        .opt("case.elements", &args.elements)
        .opt("case.order", &args.order)
        .opt("case.mesh", &args.mesh)
        .opt("t_final", &args.t_final)
        .opt("dt", &args.dt)
        .opt("checkpoint", &args.checkpoint)
        .finish(&args.common);
    let (cfg, resolved): (SolveConfig, _) = config::load(args.common.config.as_deref(), overrides)?;
    let case = Case::build(&cfg.case)?;
    let mut run = Run::create(resolve_dir(args.common.out.as_deref(), "solve"), "solve", resolved)?;
    match cfg.engine {
        Engine::Dg => run_with(&cfg, &case, &case.setup().dg(), &mut run)?,
        Engine::Dgnet => {
            let params = match cfg.surrogate {
                SurrogateMode::Learned => {
                    let p = load_checkpoint(cfg.checkpoint.as_deref())?;
                    p.check(&case.disc)?;
                    p
                }
                SurrogateMode::FluxOracle => dgnet_core::surrogate::SurrogateParams::zeros(
                    case.disc.dim(),
                    case.disc.basis.np,
                    1,
                    false,
                ),
            };
            let tangent = DgNetTangent {
                disc: &case.disc,
                physics: case.physics(),
                bcs: &case.bcs,
                params: &params,
                mode: cfg.surrogate,
            };
            run_with(&cfg, &case, &tangent, &mut run)?;
        }
    }
    let manifest = run.finish()?;
    eprintln!("wrote {}", manifest.display());
    Ok(())
}
