use super::{BoundaryTag, Mesh};
use crate::error::{DgError, Result};

/// How each rectangle cell of a structured grid is split into triangles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    /// Two triangles along the lower-left to upper-right diagonal.
    Diagonal,
    /// Four triangles meeting at the cell center.
    Crossed,
}

/// `k` equal segments on `[x0, x1]`, boundary tags `left` and `right`.
pub fn uniform_1d(x0: f64, x1: f64, k: usize) -> Result<Mesh> {
    if k == 0 || !(x1 > x0) {
        return Err(DgError::InvalidMesh("uniform mesh needs k > 0 and x0 < x1".into()));
    }
    let h = (x1 - x0) / k as f64;
    let vertices = (0..=k)
        .map(|i| [if i == k { x1 } else { x0 + h * i as f64 }, 0.0])
        .collect();
    let elements = (0..k).map(|i| vec![i, i + 1]).collect();
    let boundary = vec![
        BoundaryTag { vertices: vec![0], tag: "left".into() },
        BoundaryTag { vertices: vec![k], tag: "right".into() },
    ];
    Mesh::new(1, vertices, elements, boundary)
}

/// Structured triangulation of `[x0, x1] × [y0, y1]` with `nx × ny` cells.
/// Boundary tags are `bottom`, `right`, `top` and `left`.
pub fn rectangle(x0: f64, x1: f64, y0: f64, y1: f64, nx: usize, ny: usize, split: Split) -> Result<Mesh> {
    if nx == 0 || ny == 0 || !(x1 > x0) || !(y1 > y0) {
        return Err(DgError::InvalidMesh("rectangle needs positive extents and cell counts".into()));
    }
    let hx = (x1 - x0) / nx as f64;
    let hy = (y1 - y0) / ny as f64;
    let coord = |i: usize, n: usize, a: f64, b: f64, h: f64| if i == n { b } else { a + h * i as f64 };
    let grid = |i: usize, j: usize| j * (nx + 1) + i;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1) + nx * ny);
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push([coord(i, nx, x0, x1, hx), coord(j, ny, y0, y1, hy)]);
        }
    }
    let mut elements = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (grid(i, j), grid(i + 1, j), grid(i + 1, j + 1), grid(i, j + 1));
            match split {
                Split::Diagonal => {
                    elements.push(vec![a, b, c]);
                    elements.push(vec![a, c, d]);
                }
                Split::Crossed => {
                    let m = vertices.len();
                    vertices.push([x0 + hx * (i as f64 + 0.5), y0 + hy * (j as f64 + 0.5)]);
                    elements.push(vec![a, b, m]);
                    elements.push(vec![b, c, m]);
                    elements.push(vec![c, d, m]);
                    elements.push(vec![d, a, m]);
                }
            }
        }
    }
    let mut boundary = Vec::with_capacity(2 * (nx + ny));
    for i in 0..nx {
        boundary.push(BoundaryTag { vertices: vec![grid(i, 0), grid(i + 1, 0)], tag: "bottom".into() });
        boundary.push(BoundaryTag { vertices: vec![grid(i, ny), grid(i + 1, ny)], tag: "top".into() });
    }
    for j in 0..ny {
        boundary.push(BoundaryTag { vertices: vec![grid(0, j), grid(0, j + 1)], tag: "left".into() });
        boundary.push(BoundaryTag { vertices: vec![grid(nx, j), grid(nx, j + 1)], tag: "right".into() });
    }
    Mesh::new(2, vertices, elements, boundary)
}

/// Nested crossed meshes of the isentropic-vortex study on
/// `[3.5, 8] × [-2.25, 2.25]`: level `l` has `4·2^l` cells per side, so the
/// reference length (half cell diagonal) is `h = 4.5√2/8 / 2^l`.
pub fn vortex_mesh(level: usize) -> Result<Mesh> {
    let n = 4usize << level;
    rectangle(3.5, 8.0, -2.25, 2.25, n, n, Split::Crossed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crossed_counts() {
        let m = rectangle(0.0, 1.0, 0.0, 1.0, 2, 3, Split::Crossed).unwrap();
        assert_eq!(m.elements.len(), 24);
        assert_eq!(m.vertices.len(), 12 + 6);
        assert_eq!(m.boundary.len(), 10);
    }

    #[test]
    fn vortex_coarse_has_64_elements() {
        let m = vortex_mesh(0).unwrap();
        assert_eq!(m.elements.len(), 64);
        assert!(m.vertices.iter().any(|v| (v[0] - 4.625).abs() < 1e-14 && (v[1] + 1.125).abs() < 1e-14));
    }
}
