//! Assembles mesh, discretization, boundary conditions and limiter for a
//! catalog problem.

use std::path::Path;

use dgnet_core::dg::{Discretization, StateField};
use dgnet_core::limiter::Limiter;
use dgnet_core::mesh::{parse_mesh, rectangle, uniform_1d, vortex_mesh, Mesh, MeshFormat, Split};
use dgnet_core::physics::{BoundaryConfig, FluxModel, Physics, Problem};
use dgnet_core::training::TrainingSetup;
use dgnet_core::{DgError, Result};

use crate::config::CaseConfig;

pub struct Case {
    pub problem: Problem,
    pub model: FluxModel,
    pub disc: Discretization,
    pub bcs: BoundaryConfig,
    pub limiter: Limiter,
}

fn mesh_format(path: &Path) -> Result<MeshFormat> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("msh") => Ok(MeshFormat::GmshAsciiV2),
        Some("json") => Ok(MeshFormat::InternalJson),
        Some("txt") | Some("1d") => Ok(MeshFormat::Uniform1d),
        _ => Err(DgError::Config(format!("{}: cannot infer mesh format (use .msh, .json or .txt)", path.display()))),
    }
}

fn default_mesh(problem: &Problem, cfg: &CaseConfig) -> Result<Mesh> {
    let k = cfg.elements;
    match problem {
        Problem::Riemann { .. } | Problem::Sine => uniform_1d(0.0, 1.0, k),
        Problem::Vortex => vortex_mesh(cfg.level),
        Problem::DoubleMach => rectangle(0.0, 4.0, 0.0, 1.0, 4 * k, k, Split::Diagonal),
        Problem::Quadrants { .. } | Problem::FreeStream { .. } => rectangle(0.0, 1.0, 0.0, 1.0, k, k, Split::Diagonal),
    }
}

impl Case {
    pub fn build(cfg: &CaseConfig) -> Result<Self> {
        let problem = Problem::from_id(&cfg.problem)?;
        let dim = problem.dim();
        let physics = match problem {
            Problem::Sine => Physics::advection(dim, [1.0, 0.0]),
            _ => Physics::euler(dim, cfg.gamma),
        };
        let mesh = match &cfg.mesh {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| DgError::Config(format!("cannot read mesh {}: {e}", path.display())))?;
                parse_mesh(&text, mesh_format(path)?)?
            }
            None => default_mesh(&problem, cfg)?,
        };
        let bcs = problem.default_boundary(&physics, &mesh.boundary_tags());
        let disc = Discretization::new(mesh, cfg.order, cfg.quadrature, &bcs.periodic_pairs()?)?;
        if disc.dim() != dim {
            return Err(DgError::Config(format!("problem '{}' is {dim}D but the mesh is {}D", cfg.problem, disc.dim())));
        }
        let limit = cfg.limiter.unwrap_or(matches!(
            problem,
            Problem::Riemann { .. } | Problem::Quadrants { .. } | Problem::DoubleMach
        ));
        let limiter = Limiter::for_problem(&disc, limit)?;
        Ok(Self { problem, model: FluxModel::new(physics, cfg.flux), disc, bcs, limiter })
    }

    pub fn physics(&self) -> Physics {
        self.model.physics
    }

    pub fn initial(&self) -> StateField<f64> {
        let phys = self.physics();
        self.disc.interpolate(phys.nvars(), |x| self.problem.initial_state(&phys, x))
    }

    pub fn setup(&self) -> TrainingSetup<'_> {
        TrainingSetup { disc: &self.disc, model: self.model, bcs: &self.bcs, limiter: &self.limiter }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sod_defaults() {
        let case = Case::build(&CaseConfig { elements: 10, ..Default::default() }).unwrap();
        assert_eq!(case.disc.num_elements(), 10);
        assert!(case.limiter.enabled);
        let u = case.initial();
        assert_eq!((u.k, u.np, u.m), (10, 2, 3));
    }

    #[test]
    fn vortex_uses_level_mesh_without_limiter() {
        let case = Case::build(&CaseConfig { problem: "vortex".into(), ..Default::default() }).unwrap();
        assert_eq!(case.disc.num_elements(), 64);
        assert!(!case.limiter.enabled);
    }

    #[test]
    fn unknown_problem_is_rejected() {
        assert!(Case::build(&CaseConfig { problem: "nope".into(), ..Default::default() }).is_err());
    }
}
