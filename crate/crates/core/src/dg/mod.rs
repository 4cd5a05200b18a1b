//! Nodal DG discretization: reference operators, face bookkeeping and the
//! spatial operator `F(û)`.

mod operators;
mod state;
mod tangent;

pub use operators::{DGOperators, Mat, OverIntegration, QuadratureMode};
pub use state::StateField;
pub use tangent::{dg_tangent, face_states, resolve_boundaries};

use crate::basis::NodalBasis;
use crate::error::Result;
use crate::mesh::{build_connectivity, geometric_factors, map_point, Connectivity, ElementGeometry, FaceLink, Mesh};
use crate::physics::Vars;

/// What lies across a face.
#[derive(Debug, Clone, PartialEq)]
pub enum Neighbor {
    Interior { element: usize, face: usize },
    /// Index into [`Connectivity::boundary_faces`].
    Boundary { index: usize },
}

/// Physical coordinates of one set of face points and their pairing with
/// the neighbor's points.
#[derive(Debug, Clone)]
pub struct FacePoints {
    pub x: Vec<[f64; 2]>,
    /// Entry `j` is the neighbor-side index of point `j` (empty on boundaries).
    pub perm: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct FaceInfo {
    pub normal: [f64; 2],
    /// `sJ / J`.
    pub scale: f64,
    pub neighbor: Neighbor,
    /// Collocation face nodes.
    pub nodes: FacePoints,
    /// Face quadrature points (over-integration only).
    pub quad: Option<FacePoints>,
}

/// Everything about a mesh and basis that the spatial operator needs.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub mesh: Mesh,
    pub basis: NodalBasis,
    pub conn: Connectivity,
    pub geom: ElementGeometry,
    pub ops: DGOperators,
    /// Physical node coordinates, `k * N_p + l`.
    pub nodes: Vec<[f64; 2]>,
    /// Indexed by `k * nfaces + e`.
    pub faces: Vec<FaceInfo>,
}

impl Discretization {
    pub fn new(mesh: Mesh, order: usize, mode: QuadratureMode, periodic: &[(String, String)]) -> Result<Self> {
        let basis = NodalBasis::new(mesh.dim, order)?;
        let conn = build_connectivity(&mesh, periodic)?;
        let geom = geometric_factors(&mesh)?;
        let ops = DGOperators::new(&basis, mode);
        let np = basis.np;
        let nf = basis.nfaces;
        let nk = mesh.num_elements();

        let mut nodes = Vec::with_capacity(nk * np);
        for k in 0..nk {
            nodes.extend(basis.nodes.iter().map(|&r| map_point(&mesh, k, r)));
        }

        let mut faces = Vec::with_capacity(nk * nf);
        for k in 0..nk {
            for e in 0..nf {
                let (neighbor, reversed) = match conn.link(k, e) {
                    FaceLink::Interior { element, face, reversed, .. } => {
                        (Neighbor::Interior { element: *element, face: *face }, *reversed)
                    }
                    FaceLink::Boundary { index } => (Neighbor::Boundary { index: *index }, false),
                };
                let interior = matches!(neighbor, Neighbor::Interior { .. });
                let points = |refs: Vec<[f64; 2]>, params: &[f64]| FacePoints {
                    x: refs.into_iter().map(|r| map_point(&mesh, k, r)).collect(),
                    perm: if interior { crate::mesh::pair_params(params, reversed) } else { Vec::new() },
                };
                let node_refs = basis.face_nodes[e].iter().map(|&i| basis.nodes[i]).collect();
                let quad = ops
                    .over
                    .as_ref()
                    .map(|_| points(basis.face_quadrature[e].points.clone(), &basis.face_quadrature[e].params));
                faces.push(FaceInfo {
                    normal: geom.normal(k, e),
                    scale: geom.face_scale(k, e),
                    nodes: points(node_refs, &basis.face_params[e]),
                    quad,
                    neighbor,
                });
            }
        }
        Ok(Self { mesh, basis, conn, geom, ops, nodes, faces })
    }

    pub fn num_elements(&self) -> usize {
        self.mesh.num_elements()
    }

    pub fn dim(&self) -> usize {
        self.mesh.dim
    }

    #[inline]
    pub fn face(&self, k: usize, e: usize) -> &FaceInfo {
        &self.faces[k * self.basis.nfaces + e]
    }

    #[inline]
    pub fn node(&self, k: usize, l: usize) -> [f64; 2] {
        self.nodes[k * self.basis.np + l]
    }

    /// Element centroid.
    pub fn centroid(&self, k: usize) -> [f64; 2] {
        let el = &self.mesh.elements[k];
        let n = el.len() as f64;
        let mut c = [0.0; 2];
        for &v in el {
            c[0] += self.mesh.vertices[v][0] / n;
            c[1] += self.mesh.vertices[v][1] / n;
        }
        c
    }

    /// Nodal interpolant of `f`. Each node is evaluated a hair inside its
    /// element so that discontinuities on element interfaces stay sharp.
    pub fn interpolate(&self, m: usize, f: impl Fn([f64; 2]) -> Vars<f64>) -> StateField<f64> {
        let mut u = StateField::zeros(self.num_elements(), self.basis.np, m);
        for k in 0..self.num_elements() {
            let c = self.centroid(k);
            for l in 0..self.basis.np {
                let x = self.node(k, l);
                let xe = [x[0] + 1e-10 * (c[0] - x[0]), x[1] + 1e-10 * (c[1] - x[1])];
                let s = f(xe);
                for (q, &v) in s.iter().enumerate().take(m) {
                    let i = u.idx(k, q, l);
                    u.data[i] = v;
                }
            }
        }
        u
    }

    /// Element means, indexed `k * m + q`.
    pub fn element_means(&self, u: &StateField<f64>) -> Vec<f64> {
        let w = self.basis.mean_weights();
        let mut out = Vec::with_capacity(u.k * u.m);
        for k in 0..u.k {
            for q in 0..u.m {
                out.push(u.var(k, q).iter().zip(&w).map(|(a, b)| a * b).sum());
            }
        }
        out
    }

    /// `Σ_k 1ᵀ M^k v^k` per variable: the domain integral of a nodal field.
    pub fn integrate(&self, v: &StateField<f64>) -> Vec<f64> {
        let col: Vec<f64> = (0..self.basis.np).map(|l| self.basis.mass.column(l).sum()).collect();
        let mut out = vec![0.0; v.m];
        for k in 0..v.k {
            let j = self.geom.jacobian[k];
            for (q, o) in out.iter_mut().enumerate() {
                *o += j * v.var(k, q).iter().zip(&col).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        out
    }

    /// `M^k e^k` for every element and variable.
    pub fn mass_apply(&self, e: &StateField<f64>) -> StateField<f64> {
        let np = self.basis.np;
        let mut out = StateField::zeros_like(e);
        for k in 0..e.k {
            let j = self.geom.jacobian[k];
            for q in 0..e.m {
                let src = e.var(k, q);
                let base = out.idx(k, q, 0);
                for r in 0..np {
                    let row: f64 = (0..np).map(|c| self.basis.mass[(r, c)] * src[c]).sum();
                    out.data[base + r] = j * row;
                }
            }
        }
        out
    }

    /// `‖e_q‖²_{L²(Ω)} = Σ_k e_qᵀ M^k e_q` for variable `q`.
    pub fn l2_sq(&self, e: &StateField<f64>, q: usize) -> f64 {
        let np = self.basis.np;
        (0..e.k)
            .map(|k| {
                let v = e.var(k, q);
                let mut acc = 0.0;
                for r in 0..np {
                    for c in 0..np {
                        acc += v[r] * self.basis.mass[(r, c)] * v[c];
                    }
                }
                self.geom.jacobian[k] * acc
            })
            .sum()
    }
}
