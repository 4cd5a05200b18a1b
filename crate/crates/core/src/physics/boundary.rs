use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use super::{Physics, Vars, MAX_VARS};
use crate::error::{DgError, Result};
use crate::real::Real;

/// Conservative state as a function of position and time.
pub type ExactFn = Arc<dyn Fn([f64; 2], f64) -> Vars<f64> + Send + Sync>;

#[derive(Clone)]
pub enum BoundaryKind {
    /// Fixed conservative state.
    Inflow(Vars<f64>),
    /// Ghost equals the interior trace.
    Outflow,
    /// Normal momentum mirrored, density and energy copied.
    Reflective,
    /// Ghost from a space-time function.
    ExactDirichlet(ExactFn),
    /// Glued to the faces carrying the named tag.
    Periodic(String),
}

impl fmt::Debug for BoundaryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Inflow(u) => f.debug_tuple("Inflow").field(u).finish(),
            Self::Outflow => f.write_str("Outflow"),
            Self::Reflective => f.write_str("Reflective"),
            Self::ExactDirichlet(_) => f.write_str("ExactDirichlet(..)"),
            Self::Periodic(t) => f.debug_tuple("Periodic").field(t).finish(),
        }
    }
}

impl BoundaryKind {
    /// Ghost state seen across a boundary face.
    pub fn ghost<T: Real>(&self, phys: &Physics, interior: &[T], n: [f64; 2], x: [f64; 2], t: f64) -> Vars<T> {
        let mut g = [T::zero(); MAX_VARS];
        let m = phys.nvars();
        match self {
            Self::Inflow(state) => {
                for q in 0..m {
                    g[q] = T::from_f64(state[q]);
                }
            }
            Self::Outflow | Self::Periodic(_) => g[..m].copy_from_slice(&interior[..m]),
            Self::Reflective => {
                g[..m].copy_from_slice(&interior[..m]);
                if phys.gamma().is_some() {
                    let mut mn = T::zero();
                    for i in 0..phys.dim {
                        mn += interior[1 + i].scale(n[i]);
                    }
                    for i in 0..phys.dim {
                        g[1 + i] -= (mn + mn).scale(n[i]);
                    }
                }
            }
            Self::ExactDirichlet(f) => {
                let s = f(x, t);
                for q in 0..m {
                    g[q] = T::from_f64(s[q]);
                }
            }
        }
        g
    }

    /// `∂ghost/∂interior` as a dense `m × m` matrix (row-major, padded).
    pub fn ghost_jacobian(&self, phys: &Physics, n: [f64; 2]) -> [[f64; MAX_VARS]; MAX_VARS] {
        let m = phys.nvars();
        let mut j = [[0.0; MAX_VARS]; MAX_VARS];
        match self {
            Self::Inflow(_) | Self::ExactDirichlet(_) => {}
            Self::Outflow | Self::Periodic(_) => {
                for (q, row) in j.iter_mut().enumerate().take(m) {
                    row[q] = 1.0;
                }
            }
            Self::Reflective => {
                for (q, row) in j.iter_mut().enumerate().take(m) {
                    row[q] = 1.0;
                }
                if phys.gamma().is_some() {
                    for a in 0..phys.dim {
                        for b in 0..phys.dim {
                            j[1 + a][1 + b] -= 2.0 * n[a] * n[b];
                        }
                    }
                }
            }
        }
        j
    }
}

/// Boundary tag → condition.
#[derive(Debug, Clone, Default)]
pub struct BoundaryConfig {
    pub kinds: BTreeMap<String, BoundaryKind>,
}

impl BoundaryConfig {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, tag: impl Into<String>, kind: BoundaryKind) -> Self {
        self.kinds.insert(tag.into(), kind);
        self
    }

    /// Every tag gets the same condition.
    pub fn uniform(tags: &[String], kind: BoundaryKind) -> Self {
        Self { kinds: tags.iter().map(|t| (t.clone(), kind.clone())).collect() }
    }

    pub fn get(&self, tag: &str) -> Result<&BoundaryKind> {
        self.kinds.get(tag).ok_or_else(|| DgError::MissingBoundary(tag.into()))
    }

    /// Periodic tag pairs, each reported once.
    pub fn periodic_pairs(&self) -> Result<Vec<(String, String)>> {
        let mut pairs = Vec::new();
        for (a, kind) in &self.kinds {
            if let BoundaryKind::Periodic(b) = kind {
                match self.kinds.get(b) {
                    Some(BoundaryKind::Periodic(back)) if back == a => {
                        if a < b {
                            pairs.push((a.clone(), b.clone()));
                        }
                    }
                    None => pairs.push((a.clone(), b.clone())),
                    _ => {
                        return Err(DgError::PeriodicMismatch {
                            a: a.clone(),
                            b: b.clone(),
                            reason: "partner tag has a different condition".into(),
                        })
                    }
                }
            }
        }
        Ok(pairs)
    }

    /// Checks that every tag in `tags` has a condition.
    pub fn covers(&self, tags: &[String]) -> Result<()> {
        for t in tags {
            self.get(t)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflective_mirrors_normal_velocity() {
        let p = Physics::euler(2, 1.4);
        let n = [0.0, 1.0];
        let tangential = p.from_primitive(&[1.0, 3.0, 0.0, 1.0]);
        let g = BoundaryKind::Reflective.ghost(&p, &tangential, n, [0.0; 2], 0.0);
        assert_eq!(g, tangential);
        let normal = p.from_primitive(&[1.0, 0.0, 2.0, 1.0]);
        let g = BoundaryKind::Reflective.ghost(&p, &normal, n, [0.0; 2], 0.0);
        let w = p.to_primitive(&g);
        assert_eq!((w[1], w[2]), (0.0, -2.0));
        assert_eq!(g[3], normal[3]);
    }

    #[test]
    fn outflow_copies() {
        let p = Physics::euler(1, 1.4);
        let u = p.from_primitive(&[0.3, 0.2, 0.9]);
        assert_eq!(BoundaryKind::Outflow.ghost(&p, &u, [1.0, 0.0], [0.0; 2], 0.0), u);
    }

    #[test]
    fn periodic_pairs_reported_once() {
        let cfg = BoundaryConfig::new()
            .with("left", BoundaryKind::Periodic("right".into()))
            .with("right", BoundaryKind::Periodic("left".into()));
        assert_eq!(cfg.periodic_pairs().unwrap(), vec![("left".to_string(), "right".to_string())]);
    }
}
