use std::f64::consts::PI;
use std::sync::Arc;

use super::{BoundaryConfig, BoundaryKind, Physics, Vars};
use crate::error::{DgError, Result};

/// Vortex strength of the isentropic vortex.
const VORTEX_BETA: f64 = 5.0;

/// Initial-condition catalog. States are stored as primitives and converted
/// on evaluation.
#[derive(Debug, Clone, PartialEq)]
pub enum Problem {
    /// 1D Riemann problem, `(ρ, u, p)` on each side of `x0`.
    Riemann { left: [f64; 3], right: [f64; 3], x0: f64 },
    /// Four constant states `(ρ, u, v, p)` on the quadrants of `[0,1]²`
    /// ordered lower-left, upper-left, lower-right, upper-right.
    Quadrants { states: [[f64; 4]; 4] },
    /// Uniform flow with `ρ = γ`, `|u| = M`, `p = 1` at angle `alpha` (radians).
    FreeStream { mach: f64, alpha: f64 },
    DoubleMach,
    Vortex,
    /// Scalar `sin(2π x)` for linear advection.
    Sine,
}

/// Training initial conditions of the 1D shock-tube family:
/// `ρ_L × ρ_R × p_L ∈ {0.7, 1.3} × {0.05, 0.2} × {0.8, 1.2}`, `p_R = 0.1`, `u = 0`.
pub fn sod_family() -> Vec<Problem> {
    let mut out = Vec::with_capacity(8);
    for rl in [0.7, 1.3] {
        for rr in [0.05, 0.2] {
            for pl in [0.8, 1.2] {
                out.push(Problem::Riemann { left: [rl, 0.0, pl], right: [rr, 0.0, 0.1], x0: 0.5 });
            }
        }
    }
    out
}

impl Problem {
    pub fn from_id(id: &str) -> Result<Self> {
        let unknown = || DgError::UnknownProblem(id.to_string());
        Ok(match id {
            "sod" => Self::Riemann { left: [1.0, 0.0, 1.0], right: [0.125, 0.0, 0.1], x0: 0.5 },
            "sod-as-printed" => Self::Riemann { left: [1.0, 0.0, 1.0], right: [0.1, 0.0, 0.125], x0: 0.5 },
            "lax" => Self::Riemann { left: [0.445, 0.698, 3.528], right: [0.5, 0.0, 0.571], x0: 0.5 },
            "config6" => Self::Quadrants {
                states: [
                    [1.0, -0.75, 0.5, 1.0],
                    [2.0, 0.75, 0.5, 1.0],
                    [3.0, -0.75, -0.5, 1.0],
                    [1.0, 0.75, -0.5, 1.0],
                ],
            },
            "config12" => Self::Quadrants {
                states: [
                    [0.8, 0.0, 0.0, 1.0],
                    [1.0, 0.7276, 0.0, 1.0],
                    [1.0, 0.0, 0.7276, 1.0],
                    [0.5313, 0.0, 0.0, 0.4],
                ],
            },
            "double-mach" => Self::DoubleMach,
            "vortex" => Self::Vortex,
            "sine" => Self::Sine,
            _ => {
                if let Some(rest) = id.strip_prefix("sod-family-") {
                    let i: usize = rest.parse().map_err(|_| unknown())?;
                    return sod_family().into_iter().nth(i).ok_or_else(unknown);
                }
                if let Some(rest) = id.strip_prefix("freestream") {
                    let mut parts = rest.split(':').skip(1);
                    let mach = parts.next().map_or(Ok(3.0), str::parse).map_err(|_| unknown())?;
                    let deg: f64 = parts.next().map_or(Ok(0.0), str::parse).map_err(|_| unknown())?;
                    if parts.next().is_some() || !rest.is_empty() && !rest.starts_with(':') {
                        return Err(unknown());
                    }
                    return Ok(Self::FreeStream { mach, alpha: deg.to_radians() });
                }
                return Err(unknown());
            }
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Riemann { .. } | Self::Sine => 1,
            _ => 2,
        }
    }

    /// Conservative initial state at `x`.
    pub fn initial_state(&self, phys: &Physics, x: [f64; 2]) -> Vars<f64> {
        let gamma = phys.gamma().unwrap_or(1.4);
        match self {
            Self::Riemann { left, right, x0 } => phys.from_primitive(if x[0] < *x0 { left } else { right }),
            Self::Quadrants { states } => {
                let i = usize::from(x[0] >= 0.5) * 2 + usize::from(x[1] >= 0.5);
                let s = states[i];
                phys.from_primitive(&[s[0], s[1], s[2], s[3]])
            }
            Self::FreeStream { mach, alpha } => freestream(phys, gamma, *mach, *alpha),
            Self::DoubleMach => double_mach(phys, x, 0.0),
            Self::Vortex => vortex_exact(x, 0.0, gamma),
            Self::Sine => {
                let mut u = [0.0; 4];
                u[0] = (2.0 * PI * x[0]).sin();
                u
            }
        }
    }

    /// Default boundary conditions for the problem on a mesh with `tags`.
    pub fn default_boundary(&self, phys: &Physics, tags: &[String]) -> BoundaryConfig {
        let gamma = phys.gamma().unwrap_or(1.4);
        match self {
            Self::Riemann { .. } | Self::Quadrants { .. } => BoundaryConfig::uniform(tags, BoundaryKind::Outflow),
            Self::Sine => {
                if tags.iter().any(|t| t == "left") && tags.iter().any(|t| t == "right") {
                    BoundaryConfig::new()
                        .with("left", BoundaryKind::Periodic("right".into()))
                        .with("right", BoundaryKind::Periodic("left".into()))
                } else {
                    BoundaryConfig::uniform(tags, BoundaryKind::Outflow)
                }
            }
            Self::FreeStream { mach, alpha } => {
                BoundaryConfig::uniform(tags, BoundaryKind::Inflow(freestream(phys, gamma, *mach, *alpha)))
            }
            Self::Vortex => BoundaryConfig::uniform(
                tags,
                BoundaryKind::ExactDirichlet(Arc::new(move |x, t| vortex_exact(x, t, gamma))),
            ),
            Self::DoubleMach => {
                let p = *phys;
                let mut cfg = BoundaryConfig::uniform(tags, BoundaryKind::Outflow);
                cfg.kinds.insert(
                    "top".into(),
                    BoundaryKind::ExactDirichlet(Arc::new(move |x, t| double_mach(&p, x, t))),
                );
                cfg.kinds.insert("left".into(), BoundaryKind::Inflow(double_mach(phys, [0.0, 0.0], 0.0)));
                cfg
            }
        }
    }
}

fn freestream(phys: &Physics, gamma: f64, mach: f64, alpha: f64) -> Vars<f64> {
    if phys.dim == 1 {
        phys.from_primitive(&[gamma, mach, 1.0])
    } else {
        phys.from_primitive(&[gamma, mach * alpha.cos(), mach * alpha.sin(), 1.0])
    }
}

/// Double Mach reflection: a Mach-10 shock at 60° to the wall, positioned at
/// `x_s(y, t) = 1/6 + (y + 20t)/√3`.
fn double_mach(phys: &Physics, x: [f64; 2], t: f64) -> Vars<f64> {
    let xs = 1.0 / 6.0 + (x[1] + 20.0 * t) / 3f64.sqrt();
    let (c, s) = ((PI / 6.0).cos(), (PI / 6.0).sin());
    if x[0] < xs {
        phys.from_primitive(&[8.0, 8.25 * c, -8.25 * s, 116.5])
    } else {
        phys.from_primitive(&[1.4, 0.0, 0.0, 1.0])
    }
}

/// Exact isentropic vortex advected with unit speed in `x₁`, centered at
/// `(5 + t, 0)`, strength 5.
pub fn vortex_exact(x: [f64; 2], t: f64, gamma: f64) -> Vars<f64> {
    let (dx, dy) = (x[0] - t - 5.0, x[1]);
    let e = (1.0 - dx * dx - dy * dy).exp();
    let b = VORTEX_BETA;
    let u = 1.0 - b * e * dy / (2.0 * PI);
    let v = b * e * dx / (2.0 * PI);
    let rho = (1.0 - (gamma - 1.0) * b * b * e * e / (16.0 * gamma * PI * PI)).powf(1.0 / (gamma - 1.0));
    let p = rho.powf(gamma);
    [rho, rho * u, rho * v, p / (gamma - 1.0) + 0.5 * rho * (u * u + v * v)]
}
