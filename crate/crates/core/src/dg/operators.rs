use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::basis::NodalBasis;
use crate::error::DgError;
use crate::mesh::ElementGeometry;
use crate::real::Real;

/// Dense row-major matrix of `f64` applied to vectors of any [`Real`].
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn from_dmatrix(a: &DMatrix<f64>) -> Self {
        let (rows, cols) = a.shape();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(a[(r, c)]);
            }
        }
        Self { rows, cols, data }
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `y += A x`.
    #[inline]
    pub fn mul_add<T: Real>(&self, x: &[T], y: &mut [T]) {
        for (r, yr) in y.iter_mut().enumerate().take(self.rows) {
            let mut acc = T::zero();
            for (a, &xc) in self.row(r).iter().zip(x) {
                acc += xc.scale(*a);
            }
            *yr += acc;
        }
    }

    /// `y += s A x`.
    #[inline]
    pub fn mul_add_scaled<T: Real>(&self, s: f64, x: &[T], y: &mut [T]) {
        for (r, yr) in y.iter_mut().enumerate().take(self.rows) {
            let mut acc = T::zero();
            for (a, &xc) in self.row(r).iter().zip(x) {
                acc += xc.scale(*a);
            }
            *yr += acc.scale(s);
        }
    }

    /// `y += s Aᵀ x`.
    #[inline]
    pub fn tr_mul_add_scaled<T: Real>(&self, s: f64, x: &[T], y: &mut [T]) {
        for (r, &xr) in x.iter().enumerate().take(self.rows) {
            let xs = xr.scale(s);
            for (a, yc) in self.row(r).iter().zip(y.iter_mut()) {
                *yc += xs.scale(*a);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadratureMode {
    /// Fluxes interpolated at the solution nodes.
    Collocation,
    /// Fluxes evaluated at quadrature points exact to degree `2N+1`.
    OverIntegration,
}

impl std::str::FromStr for QuadratureMode {
    type Err = DgError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "collocation" => Ok(Self::Collocation),
            "over-integration" => Ok(Self::OverIntegration),
            _ => Err(DgError::Config(format!("unknown quadrature mode '{s}'"))),
        }
    }
}

/// Over-integration operators on the reference element.
#[derive(Debug, Clone)]
pub struct OverIntegration {
    /// Nodal-to-quadrature interpolation, `n_q × N_p`.
    pub interp: Mat,
    /// `M̂⁻¹ G_aᵀ W`, `N_p × n_q` per reference direction.
    pub vol: Vec<Mat>,
    /// Nodal-to-face-quadrature interpolation per face.
    pub face_interp: Vec<Mat>,
    /// `M̂⁻¹ Φ_eᵀ W_e` per face.
    pub lift: Vec<Mat>,
    /// Face quadrature parameters (shared by all faces).
    pub face_params: Vec<f64>,
}

/// Reference-element operators. Elements are affine, so the physical
/// volume matrices are `V_i^k = Σ_a (∂ξ_a/∂x_i) V̂_a` and the face lifts are
/// `E^{k,e} = (sJ/J) Ê_e`.
#[derive(Debug, Clone)]
pub struct DGOperators {
    pub mode: QuadratureMode,
    pub dim: usize,
    pub np: usize,
    pub nfaces: usize,
    /// Collocation volume operators `M̂⁻¹ D_aᵀ M̂`.
    pub vol: Vec<Mat>,
    /// Collocation face lifts `M̂⁻¹[:, face] M̂_e`, `N_p × N_e`.
    pub lift: Vec<Mat>,
    pub face_nodes: Vec<Vec<usize>>,
    pub face_params: Vec<Vec<f64>>,
    pub over: Option<OverIntegration>,
}

impl DGOperators {
    pub fn new(basis: &NodalBasis, mode: QuadratureMode) -> Self {
        let minv = &basis.mass_inv;
        let vol = basis
            .diff
            .iter()
            .map(|d| Mat::from_dmatrix(&(minv * d.transpose() * &basis.mass)))
            .collect();
        let lift = (0..basis.nfaces)
            .map(|e| {
                let cols = minv.select_columns(&basis.face_nodes[e]);
                Mat::from_dmatrix(&(cols * &basis.face_mass[e]))
            })
            .collect();
        let over = (mode == QuadratureMode::OverIntegration).then(|| {
            let vq = &basis.volume_quadrature;
            let w = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&vq.weights));
            let fq = &basis.face_quadrature;
            OverIntegration {
                interp: Mat::from_dmatrix(&vq.interp),
                vol: vq.grad.iter().map(|g| Mat::from_dmatrix(&(minv * g.transpose() * &w))).collect(),
                face_interp: fq.iter().map(|f| Mat::from_dmatrix(&f.interp)).collect(),
                lift: fq
                    .iter()
                    .map(|f| {
                        let we = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&f.weights));
                        Mat::from_dmatrix(&(minv * f.interp.transpose() * we))
                    })
                    .collect(),
                face_params: fq[0].params.clone(),
            }
        });
        Self {
            mode,
            dim: basis.dim,
            np: basis.np,
            nfaces: basis.nfaces,
            vol,
            lift,
            face_nodes: basis.face_nodes.clone(),
            face_params: basis.face_params.clone(),
            over,
        }
    }

    /// Number of face points used for numerical fluxes in the active mode.
    pub fn face_points(&self) -> usize {
        match &self.over {
            Some(o) => o.face_params.len(),
            None => self.face_nodes[0].len(),
        }
    }

    /// Physical mass matrix `M^k = J_k M̂`.
    pub fn element_mass(basis: &NodalBasis, geom: &ElementGeometry, k: usize) -> DMatrix<f64> {
        &basis.mass * geom.jacobian[k]
    }

    /// Physical collocation volume matrix `V_i^k = (M^k)⁻¹ S_i^kᵀ`.
    pub fn element_volume(&self, geom: &ElementGeometry, k: usize, i: usize) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.np, self.np);
        for a in 0..self.dim {
            out += self.vol[a].to_dmatrix() * geom.metrics[k][i][a];
        }
        out
    }

    /// Physical collocation lift `E^{k,e}`.
    pub fn element_lift(&self, geom: &ElementGeometry, k: usize, e: usize) -> DMatrix<f64> {
        self.lift[e].to_dmatrix() * geom.face_scale(k, e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{geometric_factors, rectangle, uniform_1d, Split};
    use approx::assert_relative_eq;

    #[test]
    fn linear_segment_mass() {
        let h = 0.004;
        let mesh = uniform_1d(0.0, h, 1).unwrap();
        let geom = geometric_factors(&mesh).unwrap();
        let basis = NodalBasis::new(1, 1).unwrap();
        let m = DGOperators::element_mass(&basis, &geom, 0);
        let expect = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]) * (h / 6.0);
        assert!((m - expect).abs().max() < 1e-17);
    }

    #[test]
    fn lift_of_unit_face_data() {
        // E^{k,e}·1 must equal (M^k)⁻¹ applied to the face-mass row sums placed
        // at the face nodes and scaled by the face Jacobian.
        let mesh = rectangle(0.0, 1.0, 0.0, 2.0, 1, 1, Split::Diagonal).unwrap();
        let geom = geometric_factors(&mesh).unwrap();
        let basis = NodalBasis::new(2, 3).unwrap();
        let ops = DGOperators::new(&basis, QuadratureMode::Collocation);
        for e in 0..3 {
            let lift = ops.element_lift(&geom, 0, e);
            let got = &lift * nalgebra::DVector::from_element(basis.ne, 1.0);
            let mut rhs = nalgebra::DVector::zeros(basis.np);
            let sj = geom.surface_jacobian[e];
            for (j, &node) in basis.face_nodes[e].iter().enumerate() {
                rhs[node] = sj * basis.face_mass[e].row(j).sum();
            }
            let mk = DGOperators::element_mass(&basis, &geom, 0);
            let expect = mk.lu().solve(&rhs).unwrap();
            assert!((got - expect).abs().max() < 1e-12);
        }
    }

    #[test]
    fn over_integration_lift_matches_collocation_on_polynomials() {
        // Both lifts integrate φ_m g exactly when g has degree ≤ N on the face.
        let basis = NodalBasis::new(2, 4).unwrap();
        let ops = DGOperators::new(&basis, QuadratureMode::OverIntegration);
        let over = ops.over.as_ref().unwrap();
        let g = |t: f64| 1.0 + 0.3 * t - 0.2 * t.powi(4);
        for e in 0..3 {
            let gc: Vec<f64> = basis.face_params[e].iter().map(|&t| g(t)).collect();
            let gq: Vec<f64> = over.face_params.iter().map(|&t| g(t)).collect();
            let (mut a, mut b) = (vec![0.0; basis.np], vec![0.0; basis.np]);
            ops.lift[e].mul_add(&gc, &mut a);
            over.lift[e].mul_add(&gq, &mut b);
            for (x, y) in a.iter().zip(&b) {
                assert_relative_eq!(*x, *y, epsilon = 1e-11);
            }
        }
    }

    #[test]
    fn transpose_product_is_adjoint() {
        let basis = NodalBasis::new(2, 2).unwrap();
        let ops = DGOperators::new(&basis, QuadratureMode::Collocation);
        let a = &ops.lift[1];
        let x: Vec<f64> = (0..a.cols).map(|i| 0.3 + i as f64).collect();
        let y: Vec<f64> = (0..a.rows).map(|i| 1.0 - 0.1 * i as f64).collect();
        let (mut ax, mut aty) = (vec![0.0; a.rows], vec![0.0; a.cols]);
        a.mul_add(&x, &mut ax);
        a.tr_mul_add_scaled(1.0, &y, &mut aty);
        let l: f64 = ax.iter().zip(&y).map(|(p, q)| p * q).sum();
        let r: f64 = aty.iter().zip(&x).map(|(p, q)| p * q).sum();
        assert_relative_eq!(l, r, max_relative = 1e-14);
    }
}
