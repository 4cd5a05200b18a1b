use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use dgnet_core::analysis::{error_indicator, relative_l2};
use dgnet_core::io::encode_frames;
use dgnet_core::surrogate::SurrogateMode;
use dgnet_core::time::{integrate, ImplicitConfig, Scheme};
use dgnet_core::training::rollout;
use serde::{Deserialize, Serialize};

use super::{load_checkpoint, Common, Overrides};
use crate::case::Case;
use crate::config::{self, step_count, CaseConfig};
use crate::output::{resolve_dir, Run};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalyzeConfig {
    pub case: CaseConfig,
    pub checkpoint: Option<PathBuf>,
    pub t_final: f64,
    pub dt: f64,
    /// Components in the error; all when empty.
    pub components: Vec<usize>,
    /// Also evaluate the per-step DG vs surrogate map distance.
    pub indicator: bool,
}

impl Default for AnalyzeConfig {
    fn default() -> Self {
        Self {
            case: CaseConfig { elements: 50, ..CaseConfig::default() },
            checkpoint: None,
            t_final: 0.25,
            dt: 1e-4,
            components: Vec::new(),
            indicator: true,
        }
    }
}

/// Compare a surrogate rollout against the DG solution.
#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub common: Common,
    /// Trained surrogate checkpoint (.ckpt).
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Catalog id, e.g. sod, lax, sod-family-3, vortex, config12.
    #[arg(long)]
    pub problem: Option<String>,
    /// Elements (1D) or cells per side (2D).
    #[arg(long = "K")]
    pub elements: Option<usize>,
    /// Final time.
    #[arg(long = "T")]
    pub t_final: Option<f64>,
    /// Time step.
    #[arg(long)]
    pub dt: Option<f64>,
}

pub fn run(args: AnalyzeArgs) -> Result<()> {
    let overrides = Overrides::default()
        .opt("checkpoint", &args.checkpoint)
        .opt("case.problem", &args.problem)
        .opt("case.elements", &args.elements)
        .opt("t_final", &args.t_final)
        .opt("dt", &args.dt)
        .finish(&args.common);
    let (cfg, resolved): (AnalyzeConfig, _) = config::load(args.common.config.as_deref(), overrides)?;
    let case = Case::build(&cfg.case)?;
    let params = load_checkpoint(cfg.checkpoint.as_deref())?;
    params.check(&case.disc)?;
    let n = step_count(cfg.t_final, cfg.dt)?;
    let setup = case.setup();
    let u0 = case.initial();

    let mut reference = Vec::with_capacity(n + 1);
    integrate(&u0, cfg.dt, n, Scheme::SspRk2, &setup.dg(), &case.limiter, &ImplicitConfig::default(), &mut |u| {
        reference.push(u.clone());
        Ok(())
    })?;
    let pred = rollout(&setup, &params, &u0, cfg.dt, n)?;
    let components = if cfg.components.is_empty() { (0..u0.m).collect() } else { cfg.components.clone() };
    let errors = relative_l2(&case.disc, &pred[1..], &reference[1..], &components)?;

    let mut run = Run::create(resolve_dir(args.common.out.as_deref(), "analyze"), "analyze", resolved)?;
    let mut csv = String::from("step,t,mean");
    for q in &components {
        let _ = write!(csv, ",u{q}");
    }
    csv.push('\n');
    for (i, mean) in errors.per_step.iter().enumerate() {
        let _ = write!(csv, "{},{},{mean}", i + 1, pred[i + 1].t);
        for c in &errors.per_component {
            let _ = write!(csv, ",{}", c[i]);
        }
        csv.push('\n');
    }
    run.write("errors.csv", csv.as_bytes())?;
    run.write("rollout.dgf", &encode_frames(&pred))?;

    if cfg.indicator {
        let sur = setup.surrogate(&params, SurrogateMode::Learned);
        let ind = error_indicator(&case.disc, &pred, cfg.dt, &setup.dg(), &sur, &case.limiter)?;
        let mut csv = String::from("step,indicator,cumulative\n");
        let mut acc = 0.0;
        for (i, f) in ind.values.iter().enumerate() {
            acc += f;
            let _ = writeln!(csv, "{},{f},{acc}", i + 1);
        }
        run.write("indicator.csv", csv.as_bytes())?;
        if let Some(step) = ind.truncated_at {
            eprintln!("indicator stopped at step {step}: the DG map failed there");
        }
    }
    let last = *errors.per_step.last().unwrap_or(&0.0);
    run.write(
        "summary.csv",
        format!("mean_error,max_error,final_error\n{},{},{last}\n", errors.mean(), errors.max()).as_bytes(),
    )?;
    let manifest = run.finish()?;
    eprintln!("mean relative L2 error {:.6}; wrote {}", errors.mean(), manifest.display());
    Ok(())
}
