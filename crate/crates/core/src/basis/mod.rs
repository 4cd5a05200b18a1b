//! Nodal Lagrange bases on the reference segment and triangle.

pub mod jacobi;
pub mod simplex;

use nalgebra::DMatrix;

use crate::error::DgError;

/// Largest supported polynomial order.
pub const MAX_ORDER: usize = 8;

/// Reference vertices of the triangle, counterclockwise.
pub const REF_TRIANGLE: [[f64; 2]; 3] = [[-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0]];

/// A quadrature rule together with the basis evaluated at its points.
#[derive(Debug, Clone)]
pub struct Quadrature {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    /// Basis values, `points × N_p`.
    pub interp: DMatrix<f64>,
    /// Reference-coordinate derivatives of the basis, one `points × N_p` matrix per direction.
    pub grad: Vec<DMatrix<f64>>,
}

/// Quadrature on one reference face, parameterized by `t ∈ [-1, 1]`.
#[derive(Debug, Clone)]
pub struct FaceQuadrature {
    pub params: Vec<f64>,
    pub weights: Vec<f64>,
    pub points: Vec<[f64; 2]>,
    /// Basis values at the face points, `points × N_p`.
    pub interp: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct NodalBasis {
    pub dim: usize,
    pub order: usize,
    pub np: usize,
    /// Nodes per face in the collocation layout.
    pub ne: usize,
    pub nfaces: usize,
    pub nodes: Vec<[f64; 2]>,
    pub vandermonde: DMatrix<f64>,
    pub vandermonde_inv: DMatrix<f64>,
    pub mass: DMatrix<f64>,
    pub mass_inv: DMatrix<f64>,
    /// Nodal differentiation matrices `D_r` (and `D_s` in 2D).
    pub diff: Vec<DMatrix<f64>>,
    /// Volume node indices on each face, ordered by the face parameter.
    pub face_nodes: Vec<Vec<usize>>,
    /// Face parameter `t ∈ [-1, 1]` of each face node.
    pub face_params: Vec<Vec<f64>>,
    /// Reference face mass matrix per face (`N_e × N_e`, parameter measure).
    pub face_mass: Vec<DMatrix<f64>>,
    pub quad_degree: usize,
    pub volume_quadrature: Quadrature,
    pub face_quadrature: Vec<FaceQuadrature>,
}

/// Reference face endpoints (2D) or the face point (1D).
pub fn reference_face(dim: usize, face: usize) -> ([f64; 2], [f64; 2]) {
    if dim == 1 {
        let x = if face == 0 { -1.0 } else { 1.0 };
        ([x, 0.0], [x, 0.0])
    } else {
        (REF_TRIANGLE[face], REF_TRIANGLE[(face + 1) % 3])
    }
}

fn face_point(dim: usize, face: usize, t: f64) -> [f64; 2] {
    let (a, b) = reference_face(dim, face);
    let (wa, wb) = (0.5 * (1.0 - t), 0.5 * (1.0 + t));
    [wa * a[0] + wb * b[0], wa * a[1] + wb * b[1]]
}

impl NodalBasis {
    /// Builds the nodal basis of order `order` in dimension `dim`, with an
    /// over-integration rule exact to degree `2 * order + 1`.
    pub fn new(dim: usize, order: usize) -> Result<Self, DgError> {
        Self::with_quadrature_degree(dim, order, 2 * order + 1)
    }

    pub fn with_quadrature_degree(dim: usize, order: usize, quad_degree: usize) -> Result<Self, DgError> {
        if !(dim == 1 || dim == 2) || order == 0 || order > MAX_ORDER {
            return Err(DgError::UnsupportedBasis { dim, order });
        }
        let nodes: Vec<[f64; 2]> = if dim == 1 {
            jacobi::jacobi_gl(0.0, 0.0, order)
                .into_iter()
                .map(|r| [r, 0.0])
                .collect()
        } else {
            simplex::nodes_2d(order)
        };
        let np = nodes.len();
        let vandermonde = eval_vandermonde(dim, order, &nodes);
        let vandermonde_inv = vandermonde
            .clone()
            .try_inverse()
            .ok_or(DgError::UnsupportedBasis { dim, order })?;
        let mass_inv = &vandermonde * vandermonde.transpose();
        let mass = mass_inv
            .clone()
            .try_inverse()
            .ok_or(DgError::UnsupportedBasis { dim, order })?;
        let diff: Vec<DMatrix<f64>> = grad_vandermonde(dim, order, &nodes)
            .into_iter()
            .map(|g| g * &vandermonde_inv)
            .collect();

        let nfaces = dim + 1;
        let mut face_nodes = Vec::with_capacity(nfaces);
        let mut face_params = Vec::with_capacity(nfaces);
        let mut face_mass = Vec::with_capacity(nfaces);
        for f in 0..nfaces {
            let (a, b) = reference_face(dim, f);
            let mut on_face: Vec<(usize, f64)> = nodes
                .iter()
                .enumerate()
                .filter_map(|(i, p)| {
                    if dim == 1 {
                        ((p[0] - a[0]).abs() < 1e-10).then_some((i, 0.0))
                    } else {
                        let d = [b[0] - a[0], b[1] - a[1]];
                        let rel = [p[0] - a[0], p[1] - a[1]];
                        let cross = d[0] * rel[1] - d[1] * rel[0];
                        (cross.abs() < 1e-10).then(|| {
                            let t = 2.0 * (rel[0] * d[0] + rel[1] * d[1]) / (d[0] * d[0] + d[1] * d[1]) - 1.0;
                            (i, t)
                        })
                    }
                })
                .collect();
            on_face.sort_by(|x, y| x.1.total_cmp(&y.1));
            let (idx, params): (Vec<usize>, Vec<f64>) = on_face.into_iter().unzip();
            let fm = if dim == 1 {
                DMatrix::from_element(1, 1, 1.0)
            } else {
                let v1 = jacobi::vandermonde_1d(order, &params);
                (&v1 * v1.transpose())
                    .try_inverse()
                    .ok_or(DgError::UnsupportedBasis { dim, order })?
            };
            face_nodes.push(idx);
            face_params.push(params);
            face_mass.push(fm);
        }
        let ne = face_nodes[0].len();

        let (qpoints, qweights) = if dim == 1 {
            let (x, w) = jacobi::jacobi_gq(0.0, 0.0, quad_degree / 2);
            (x.into_iter().map(|r| [r, 0.0]).collect::<Vec<_>>(), w)
        } else {
            simplex::triangle_cubature(quad_degree)
        };
        let volume_quadrature = Quadrature {
            interp: eval_vandermonde(dim, order, &qpoints) * &vandermonde_inv,
            grad: grad_vandermonde(dim, order, &qpoints)
                .into_iter()
                .map(|g| g * &vandermonde_inv)
                .collect(),
            points: qpoints,
            weights: qweights,
        };

        let face_quadrature = (0..nfaces)
            .map(|f| {
                let (params, weights) = if dim == 1 {
                    (vec![0.0], vec![1.0])
                } else {
                    jacobi::jacobi_gq(0.0, 0.0, quad_degree / 2)
                };
                let points: Vec<[f64; 2]> = params.iter().map(|&t| face_point(dim, f, t)).collect();
                FaceQuadrature {
                    interp: eval_vandermonde(dim, order, &points) * &vandermonde_inv,
                    params,
                    weights,
                    points,
                }
            })
            .collect();

        Ok(Self {
            dim,
            order,
            np,
            ne,
            nfaces,
            nodes,
            vandermonde,
            vandermonde_inv,
            mass,
            mass_inv,
            diff,
            face_nodes,
            face_params,
            face_mass,
            quad_degree,
            volume_quadrature,
            face_quadrature,
        })
    }

    /// Basis values at arbitrary reference points, `points × N_p`.
    pub fn interpolation_matrix(&self, points: &[[f64; 2]]) -> DMatrix<f64> {
        eval_vandermonde(self.dim, self.order, points) * &self.vandermonde_inv
    }

    /// Quadrature weights reproducing the element mean: `mean = Σ w_l u_l`.
    pub fn mean_weights(&self) -> Vec<f64> {
        let total: f64 = self.mass.iter().sum();
        (0..self.np)
            .map(|l| self.mass.column(l).iter().sum::<f64>() / total)
            .collect()
    }
}

fn eval_vandermonde(dim: usize, order: usize, points: &[[f64; 2]]) -> DMatrix<f64> {
    if dim == 1 {
        let r: Vec<f64> = points.iter().map(|p| p[0]).collect();
        jacobi::vandermonde_1d(order, &r)
    } else {
        simplex::vandermonde_2d(order, points)
    }
}

fn grad_vandermonde(dim: usize, order: usize, points: &[[f64; 2]]) -> Vec<DMatrix<f64>> {
    if dim == 1 {
        let r: Vec<f64> = points.iter().map(|p| p[0]).collect();
        vec![jacobi::grad_vandermonde_1d(order, &r)]
    } else {
        let (vr, vs) = simplex::grad_vandermonde_2d(order, points);
        vec![vr, vs]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_segment_is_endpoints() {
        let b = NodalBasis::new(1, 1).unwrap();
        assert_eq!(b.np, 2);
        assert_eq!(b.ne, 1);
        assert_eq!(b.nodes[0][0], -1.0);
        assert_eq!(b.nodes[1][0], 1.0);
    }

    #[test]
    fn linear_triangle_counts() {
        let b = NodalBasis::new(2, 1).unwrap();
        assert_eq!(b.np, 3);
        assert_eq!(b.ne, 2);
        for f in &b.face_nodes {
            assert_eq!(f.len(), 2);
        }
    }

    #[test]
    fn cubic_derivative_exact_on_lgl_nodes() {
        let b = NodalBasis::new(1, 3).unwrap();
        let u: Vec<f64> = b.nodes.iter().map(|p| p[0].powi(3)).collect();
        for i in 0..b.np {
            let du: f64 = (0..b.np).map(|j| b.diff[0][(i, j)] * u[j]).sum();
            let x = b.nodes[i][0];
            assert!((du - 3.0 * x * x).abs() < 1e-12);
        }
    }

    #[test]
    fn derivatives_exact_for_polynomials_in_2d() {
        for order in 1..=MAX_ORDER {
            let b = NodalBasis::new(2, order).unwrap();
            let p = order as i32;
            let f = |x: &[f64; 2]| x[0].powi(p) + x[0] * x[1].powi(p - 1) + 0.5;
            let dfr = |x: &[f64; 2]| p as f64 * x[0].powi(p - 1) + x[1].powi(p - 1);
            let dfs = |x: &[f64; 2]| {
                if p >= 2 {
                    (p - 1) as f64 * x[0] * x[1].powi(p - 2)
                } else {
                    0.0
                }
            };
            let u: Vec<f64> = b.nodes.iter().map(f).collect();
            for i in 0..b.np {
                let dr: f64 = (0..b.np).map(|j| b.diff[0][(i, j)] * u[j]).sum();
                let ds: f64 = (0..b.np).map(|j| b.diff[1][(i, j)] * u[j]).sum();
                assert!((dr - dfr(&b.nodes[i])).abs() < 1e-10, "order {order}");
                assert!((ds - dfs(&b.nodes[i])).abs() < 1e-10, "order {order}");
            }
        }
    }

    #[test]
    fn mass_is_spd_and_face_nodes_counted() {
        for dim in 1..=2 {
            for order in 1..=MAX_ORDER {
                let b = NodalBasis::new(dim, order).unwrap();
                let asym = (&b.mass - b.mass.transpose()).abs().max();
                assert!(asym < 1e-12);
                assert!(b.mass.clone().cholesky().is_some());
                for f in &b.face_nodes {
                    assert_eq!(f.len(), b.ne);
                }
                if dim == 2 {
                    assert_eq!(b.ne, order + 1);
                }
            }
        }
    }

    #[test]
    fn unsupported_orders_rejected() {
        assert!(NodalBasis::new(1, 0).is_err());
        assert!(NodalBasis::new(2, MAX_ORDER + 1).is_err());
        assert!(NodalBasis::new(3, 1).is_err());
    }
}
