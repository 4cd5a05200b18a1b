use super::Mesh;
use crate::error::{DgError, Result};

/// Affine geometric factors of every element.
#[derive(Debug, Clone)]
pub struct ElementGeometry {
    pub dim: usize,
    /// `metrics[k][i][a] = ∂ξ_a/∂x_i`.
    pub metrics: Vec<[[f64; 2]; 2]>,
    /// Jacobian determinant (reference-to-physical volume ratio).
    pub jacobian: Vec<f64>,
    /// Unit outward normal per `k * nfaces + e`.
    pub normals: Vec<[f64; 2]>,
    /// Face Jacobian: physical face measure over reference face measure.
    pub surface_jacobian: Vec<f64>,
}

impl ElementGeometry {
    pub fn nfaces(&self) -> usize {
        self.dim + 1
    }

    pub fn normal(&self, k: usize, e: usize) -> [f64; 2] {
        self.normals[k * self.nfaces() + e]
    }

    pub fn face_scale(&self, k: usize, e: usize) -> f64 {
        self.surface_jacobian[k * self.nfaces() + e] / self.jacobian[k]
    }

    /// Physical face measure (length in 2D, 1 in 1D).
    pub fn face_measure(&self, k: usize, e: usize) -> f64 {
        let sj = self.surface_jacobian[k * self.nfaces() + e];
        if self.dim == 1 {
            sj
        } else {
            2.0 * sj
        }
    }
}

/// Maps the reference point `r` of element `k` to physical coordinates.
pub fn map_point(mesh: &Mesh, k: usize, r: [f64; 2]) -> [f64; 2] {
    let el = &mesh.elements[k];
    let v = |i: usize| mesh.vertices[el[i]];
    if mesh.dim == 1 {
        let (a, b) = (v(0)[0], v(1)[0]);
        [0.5 * (1.0 - r[0]) * a + 0.5 * (1.0 + r[0]) * b, 0.0]
    } else {
        let (w1, w2, w3) = (-0.5 * (r[0] + r[1]), 0.5 * (1.0 + r[0]), 0.5 * (1.0 + r[1]));
        let (a, b, c) = (v(0), v(1), v(2));
        [w1 * a[0] + w2 * b[0] + w3 * c[0], w1 * a[1] + w2 * b[1] + w3 * c[1]]
    }
}

pub fn geometric_factors(mesh: &Mesh) -> Result<ElementGeometry> {
    let nf = mesh.nfaces();
    let k_total = mesh.num_elements();
    let scale = mesh.scale();
    let mut metrics = Vec::with_capacity(k_total);
    let mut jacobian = Vec::with_capacity(k_total);
    let mut normals = Vec::with_capacity(k_total * nf);
    let mut surface_jacobian = Vec::with_capacity(k_total * nf);
    for (k, el) in mesh.elements.iter().enumerate() {
        let v = |i: usize| mesh.vertices[el[i]];
        if mesh.dim == 1 {
            let h = v(1)[0] - v(0)[0];
            if h <= 1e-14 * scale {
                return Err(DgError::DegenerateElement { element: k, measure: h });
            }
            jacobian.push(0.5 * h);
            metrics.push([[2.0 / h, 0.0], [0.0, 0.0]]);
            normals.extend([[-1.0, 0.0], [1.0, 0.0]]);
            surface_jacobian.extend([1.0, 1.0]);
        } else {
            let (a, b, c) = (v(0), v(1), v(2));
            let (xr, yr) = (0.5 * (b[0] - a[0]), 0.5 * (b[1] - a[1]));
            let (xs, ys) = (0.5 * (c[0] - a[0]), 0.5 * (c[1] - a[1]));
            let j = xr * ys - xs * yr;
            if j <= 1e-14 * scale * scale {
                return Err(DgError::DegenerateElement { element: k, measure: 2.0 * j });
            }
            jacobian.push(j);
            metrics.push([[ys / j, -yr / j], [-xs / j, xr / j]]);
            for e in 0..3 {
                let (p, q) = (v(e), v((e + 1) % 3));
                let (dx, dy) = (q[0] - p[0], q[1] - p[1]);
                let len = (dx * dx + dy * dy).sqrt();
                normals.push([dy / len, -dx / len]);
                surface_jacobian.push(0.5 * len);
            }
        }
    }
    Ok(ElementGeometry { dim: mesh.dim, metrics, jacobian, normals, surface_jacobian })
}
