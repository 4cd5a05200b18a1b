//! Meshes, connectivity and affine geometric factors.

mod connectivity;
mod generate;
mod geometry;
mod parse;

pub(crate) use connectivity::pair_params;
pub use connectivity::{build_connectivity, BoundaryFace, Connectivity, FaceLink, InteriorFace};
pub use generate::{rectangle, uniform_1d, vortex_mesh, Split};
pub use geometry::{geometric_factors, map_point, ElementGeometry};
pub use parse::{parse_gmsh, parse_json, parse_mesh, parse_uniform_1d, to_json, MeshFormat, MESH_SCHEMA};

use crate::error::{DgError, Result};

/// A boundary face given by its (sorted) vertex indices and a free-form tag.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTag {
    pub vertices: Vec<usize>,
    pub tag: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub dim: usize,
    pub vertices: Vec<[f64; 2]>,
    /// Vertex indices of each element: 2 per segment, 3 per triangle (counterclockwise).
    pub elements: Vec<Vec<usize>>,
    pub boundary: Vec<BoundaryTag>,
}

impl Mesh {
    /// Validates the input and reorders element vertices into canonical
    /// orientation (increasing `x` in 1D, counterclockwise in 2D).
    pub fn new(
        dim: usize,
        vertices: Vec<[f64; 2]>,
        mut elements: Vec<Vec<usize>>,
        mut boundary: Vec<BoundaryTag>,
    ) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(DgError::InvalidMesh(format!("dimension {dim} not supported")));
        }
        if elements.is_empty() {
            return Err(DgError::InvalidMesh("mesh has no elements".into()));
        }
        if let Some(i) = vertices.iter().position(|v| !v[0].is_finite() || !v[1].is_finite()) {
            return Err(DgError::InvalidMesh(format!("vertex {i} has non-finite coordinates")));
        }
        let scale = bounding_scale(&vertices);
        for (k, el) in elements.iter_mut().enumerate() {
            if el.len() != dim + 1 {
                return Err(DgError::InvalidMesh(format!(
                    "element {k} has {} vertices, expected {}",
                    el.len(),
                    dim + 1
                )));
            }
            if let Some(&v) = el.iter().find(|&&v| v >= vertices.len()) {
                return Err(DgError::InvalidMesh(format!("element {k} references missing vertex {v}")));
            }
            let measure = signed_measure(dim, &vertices, el);
            let tol = if dim == 1 { 1e-14 * scale } else { 1e-14 * scale * scale };
            if measure.abs() <= tol || !measure.is_finite() {
                return Err(DgError::DegenerateElement { element: k, measure });
            }
            if measure < 0.0 {
                el.swap(0, 1);
            }
        }
        for b in boundary.iter_mut() {
            if b.vertices.len() != dim {
                return Err(DgError::InvalidMesh(format!(
                    "boundary face tagged '{}' has {} vertices, expected {dim}",
                    b.tag,
                    b.vertices.len()
                )));
            }
            if let Some(&v) = b.vertices.iter().find(|&&v| v >= vertices.len()) {
                return Err(DgError::InvalidMesh(format!("boundary face references missing vertex {v}")));
            }
            b.vertices.sort_unstable();
        }
        Ok(Self { dim, vertices, elements, boundary })
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn nfaces(&self) -> usize {
        self.dim + 1
    }

    /// Vertex indices of local face `e` of element `k`, in traversal order.
    pub fn face_vertices(&self, k: usize, e: usize) -> Vec<usize> {
        let el = &self.elements[k];
        if self.dim == 1 {
            vec![el[e]]
        } else {
            vec![el[e], el[(e + 1) % 3]]
        }
    }

    /// Diameter of the bounding box, used to scale geometric tolerances.
    pub fn scale(&self) -> f64 {
        bounding_scale(&self.vertices)
    }

    pub fn boundary_tags(&self) -> Vec<String> {
        let mut tags: Vec<String> = self.boundary.iter().map(|b| b.tag.clone()).collect();
        tags.sort();
        tags.dedup();
        tags
    }
}

fn bounding_scale(vertices: &[[f64; 2]]) -> f64 {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for v in vertices {
        for d in 0..2 {
            lo[d] = lo[d].min(v[d]);
            hi[d] = hi[d].max(v[d]);
        }
    }
    let s = ((hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2)).sqrt();
    if s.is_finite() && s > 0.0 {
        s
    } else {
        1.0
    }
}

fn signed_measure(dim: usize, vertices: &[[f64; 2]], el: &[usize]) -> f64 {
    if dim == 1 {
        vertices[el[1]][0] - vertices[el[0]][0]
    } else {
        let (a, b, c) = (vertices[el[0]], vertices[el[1]], vertices[el[2]]);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }
}
