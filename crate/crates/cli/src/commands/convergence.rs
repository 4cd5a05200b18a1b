use std::fmt::Write as _;

use anyhow::Result;
use clap::Args;
use dgnet_core::analysis::convergence_rate;
use dgnet_core::dg::QuadratureMode;
use dgnet_core::physics::{vortex_exact, FluxScheme};
use dgnet_core::time::{integrate, ImplicitConfig, Scheme};
use dgnet_core::DgError;
use serde::{Deserialize, Serialize};

use super::{Common, Overrides};
use crate::case::Case;
use crate::config::{self, step_count, CaseConfig};
use crate::output::{resolve_dir, Run};

/// Reference length `h` of level 0 of the vortex meshes.
pub fn vortex_h(level: usize) -> f64 {
    4.5 * 2f64.sqrt() / 8.0 / (1u64 << level) as f64
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceConfig {
    pub problem: String,
    pub gamma: f64,
    pub orders: Vec<usize>,
    /// Mesh levels; level `l` has reference length `h / 2^l`.
    pub levels: Vec<usize>,
    pub t_final: f64,
    pub dt: f64,
    pub quadrature: QuadratureMode,
    pub flux: FluxScheme,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            problem: "vortex".into(),
            gamma: 1.4,
            orders: vec![1, 2, 3],
            levels: vec![0, 1, 2],
            t_final: 0.1,
            dt: 0.002,
            quadrature: QuadratureMode::OverIntegration,
            flux: FluxScheme::LaxFriedrichs,
        }
    }
}

/// Mesh-refinement study against the exact isentropic vortex.
#[derive(Debug, Args)]
pub struct ConvergenceArgs {
    #[command(flatten)]
    pub common: Common,
    /// Catalog id, e.g. sod, lax, sod-family-3, vortex, config12.
    #[arg(long)]
    pub problem: Option<String>,
    /// Comma-separated polynomial orders.
    #[arg(long, value_delimiter = ',')]
    pub orders: Option<Vec<usize>>,
    /// Levels as `h,h/2,h/4` or `0,1,2`.
    #[arg(long, value_delimiter = ',', value_parser = parse_level)]
    pub levels: Option<Vec<usize>>,
    /// Final time.
    #[arg(long = "T")]
    pub t_final: Option<f64>,
    /// Time step.
    #[arg(long)]
    pub dt: Option<f64>,
}

/// `h` → 0, `h/2` → 1, `h/4` → 2, …; plain integers are levels.
pub fn parse_level(s: &str) -> Result<usize, String> {
    let s = s.trim();
    if let Ok(l) = s.parse::<usize>() {
        return Ok(l);
    }
    match s.strip_prefix('h') {
        Some("") => Ok(0),
        Some(rest) => {
            let d: u64 = rest
                .strip_prefix('/')
                .and_then(|d| d.parse().ok())
                .ok_or_else(|| format!("bad level '{s}'"))?;
            if d.is_power_of_two() {
                Ok(d.trailing_zeros() as usize)
            } else {
                Err(format!("level '{s}' is not h over a power of two"))
            }
        }
        None => Err(format!("bad level '{s}'")),
    }
}

/// One mesh/order pair of the study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergencePoint {
    pub order: usize,
    pub level: usize,
    pub h: f64,
    pub elements: usize,
    /// `‖ρ_h − ρ‖_{L²}` at the final time.
    pub error: f64,
}

pub fn density_error(cfg: &ConvergenceConfig, order: usize, level: usize) -> Result<ConvergencePoint> {
    if cfg.problem != "vortex" {
        return Err(DgError::Config(format!("at 'problem': only 'vortex' has an exact solution (got '{}')", cfg.problem)).into());
    }
    let case = Case::build(&CaseConfig {
        problem: cfg.problem.clone(),
        gamma: cfg.gamma,
        order,
        level,
        quadrature: cfg.quadrature,
        flux: cfg.flux,
        limiter: Some(false),
        ..CaseConfig::default()
    })?;
    let n = step_count(cfg.t_final, cfg.dt)?;
    let tangent = case.setup().dg();
    let u = integrate(&case.initial(), cfg.dt, n, Scheme::SspRk2, &tangent, &case.limiter, &ImplicitConfig::default(), &mut |_| Ok(()))?;
    let gamma = cfg.gamma;
    let mut diff = case.disc.interpolate(u.m, |x| vortex_exact(x, u.t, gamma));
    diff.axpy(-1.0, &u);
    Ok(ConvergencePoint {
        order,
        level,
        h: vortex_h(level),
        elements: case.disc.num_elements(),
        error: case.disc.l2_sq(&diff, 0).sqrt(),
    })
}

pub fn run(args: ConvergenceArgs) -> Result<()> {
    let overrides = Overrides::default()
        .opt("problem", &args.problem)
        .opt("orders", &args.orders)
        .opt("levels", &args.levels)
        .opt("t_final", &args.t_final)
        .opt("dt", &args.dt)
        .finish(&args.common);
    let (cfg, resolved): (ConvergenceConfig, _) = config::load(args.common.config.as_deref(), overrides)?;
    let mut run = Run::create(resolve_dir(args.common.out.as_deref(), "convergence"), "convergence", resolved)?;
    let mut table = String::from("order,level,h,elements,error,rate\n");
    let mut fits = String::from("order,rate\n");
    for &order in &cfg.orders {
        let mut points: Vec<ConvergencePoint> = Vec::new();
        for &level in &cfg.levels {
            let p = density_error(&cfg, order, level)?;
            let rate = points.last().map(|q| (q.error / p.error).ln() / (q.h / p.h).ln());
            let _ = writeln!(table, "{},{},{},{},{},{}", order, level, p.h, p.elements, p.error, super::cell(rate));
            eprintln!("N={order} level {level}: error {:.4e}", p.error);
            points.push(p);
        }
        if points.len() >= 2 {
            let h: Vec<f64> = points.iter().map(|p| p.h).collect();
            let e: Vec<f64> = points.iter().map(|p| p.error).collect();
            let _ = writeln!(fits, "{order},{}", convergence_rate(&h, &e)?);
        }
    }
    run.write("errors.csv", table.as_bytes())?;
    run.write("rates.csv", fits.as_bytes())?;
    let manifest = run.finish()?;
    eprintln!("wrote {}", manifest.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_syntax() {
        assert_eq!(parse_level("h").unwrap(), 0);
        assert_eq!(parse_level("h/2").unwrap(), 1);
        assert_eq!(parse_level("h/4").unwrap(), 2);
        assert_eq!(parse_level("3").unwrap(), 3);
        assert!(parse_level("h/3").is_err());
        assert!(parse_level("x").is_err());
    }

    #[test]
    fn reference_length() {
        assert!((vortex_h(0) - 0.795495).abs() < 1e-6);
        assert!((vortex_h(2) - vortex_h(0) / 4.0).abs() < 1e-15);
    }
}
