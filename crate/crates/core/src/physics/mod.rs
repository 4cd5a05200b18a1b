//! Conservation-law fluxes: compressible Euler (and scalar linear advection
//! for verification), wave speeds and numerical fluxes.

mod boundary;
mod catalog;

pub use boundary::{BoundaryConfig, BoundaryKind, ExactFn};
pub use catalog::{sod_family, vortex_exact, Problem};

use serde::{Deserialize, Serialize};

use crate::real::Real;

/// Maximum number of conserved variables.
pub const MAX_VARS: usize = 4;

/// Conserved variables, padded to [`MAX_VARS`].
pub type Vars<T> = [T; MAX_VARS];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Model {
    Euler { gamma: f64 },
    /// `f = a u` for a scalar `u`.
    Advection { velocity: [f64; 2] },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Physics {
    pub dim: usize,
    pub model: Model,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FluxScheme {
    LaxFriedrichs,
    Hll,
    Central,
    /// Zero numerical flux (plumbing tests only).
    Zero,
}

impl std::str::FromStr for FluxScheme {
    type Err = crate::DgError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lax-friedrichs" | "lf" => Ok(Self::LaxFriedrichs),
            "hll" => Ok(Self::Hll),
            "central" => Ok(Self::Central),
            "zero" => Ok(Self::Zero),
            _ => Err(crate::DgError::Config(format!("unknown flux scheme '{s}'"))),
        }
    }
}

/// A physical model paired with a numerical flux.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxModel {
    pub physics: Physics,
    pub scheme: FluxScheme,
}

impl FluxModel {
    pub fn new(physics: Physics, scheme: FluxScheme) -> Self {
        Self { physics, scheme }
    }
}

#[inline]
fn zeros<T: Real>() -> Vars<T> {
    [T::zero(); MAX_VARS]
}

impl Physics {
    pub fn euler(dim: usize, gamma: f64) -> Self {
        Self { dim, model: Model::Euler { gamma } }
    }

    pub fn advection(dim: usize, velocity: [f64; 2]) -> Self {
        Self { dim, model: Model::Advection { velocity } }
    }

    /// Number of conserved variables `m`.
    pub fn nvars(&self) -> usize {
        match self.model {
            Model::Euler { .. } => self.dim + 2,
            Model::Advection { .. } => 1,
        }
    }

    pub fn gamma(&self) -> Option<f64> {
        match self.model {
            Model::Euler { gamma } => Some(gamma),
            Model::Advection { .. } => None,
        }
    }

    /// Pressure of a conservative Euler state.
    #[inline]
    pub fn pressure<T: Real>(&self, u: &[T]) -> T {
        match self.model {
            Model::Euler { gamma } => {
                let rho = u[0];
                let mut ke = T::zero();
                for i in 0..self.dim {
                    ke += u[1 + i] * u[1 + i];
                }
                (u[self.dim + 1] - ke / (rho + rho)).scale(gamma - 1.0)
            }
            Model::Advection { .. } => T::zero(),
        }
    }

    /// Physical validity: `ρ > 0` and `p > 0` with finite entries.
    pub fn is_valid<T: Real>(&self, u: &[T]) -> bool {
        if u[..self.nvars()].iter().any(|x| !x.is_finite()) {
            return false;
        }
        match self.model {
            Model::Euler { .. } => u[0].value() > 0.0 && self.pressure(u).value() > 0.0,
            Model::Advection { .. } => true,
        }
    }

    /// Flux columns `f_i(u)`, `i < dim`.
    #[inline]
    pub fn flux<T: Real>(&self, u: &[T]) -> [Vars<T>; 2] {
        let mut f = [zeros(), zeros()];
        match self.model {
            Model::Euler { .. } => {
                let p = self.pressure(u);
                let rho = u[0];
                let e = u[self.dim + 1];
                for i in 0..self.dim {
                    let vi = u[1 + i] / rho;
                    f[i][0] = u[1 + i];
                    for j in 0..self.dim {
                        f[i][1 + j] = u[1 + j] * vi;
                    }
                    f[i][1 + i] += p;
                    f[i][self.dim + 1] = vi * (e + p);
                }
            }
            Model::Advection { velocity } => {
                for i in 0..self.dim {
                    f[i][0] = u[0].scale(velocity[i]);
                }
            }
        }
        f
    }

    #[inline]
    pub fn normal_flux<T: Real>(&self, u: &[T], n: [f64; 2]) -> Vars<T> {
        let f = self.flux(u);
        let mut out = zeros();
        for q in 0..self.nvars() {
            for i in 0..self.dim {
                out[q] += f[i][q].scale(n[i]);
            }
        }
        out
    }

    /// Sound speed of an Euler state.
    #[inline]
    pub fn sound_speed<T: Real>(&self, u: &[T]) -> T {
        match self.model {
            Model::Euler { gamma } => (self.pressure(u).scale(gamma) / u[0]).sqrt(),
            Model::Advection { .. } => T::zero(),
        }
    }

    #[inline]
    fn normal_velocity<T: Real>(&self, u: &[T], n: [f64; 2]) -> T {
        match self.model {
            Model::Euler { .. } => {
                let mut un = T::zero();
                for i in 0..self.dim {
                    un += u[1 + i].scale(n[i]);
                }
                un / u[0]
            }
            Model::Advection { velocity } => T::from_f64((0..self.dim).map(|i| velocity[i] * n[i]).sum()),
        }
    }

    /// Largest absolute eigenvalue of `n·∂f/∂u` at one state: `|u·n| + c`.
    #[inline]
    pub fn wave_speed<T: Real>(&self, u: &[T], n: [f64; 2]) -> T {
        self.normal_velocity(u, n).abs() + self.sound_speed(u)
    }

    /// `λ = max` of [`Self::wave_speed`] over both states.
    #[inline]
    pub fn max_wave_speed<T: Real>(&self, um: &[T], up: &[T], n: [f64; 2]) -> T {
        self.wave_speed(um, n).max(self.wave_speed(up, n))
    }

    /// Davis estimates `(S_L, S_R)` of the slowest and fastest signal speeds.
    pub fn wave_bounds<T: Real>(&self, um: &[T], up: &[T], n: [f64; 2]) -> (T, T) {
        let (vm, vp) = (self.normal_velocity(um, n), self.normal_velocity(up, n));
        let (cm, cp) = (self.sound_speed(um), self.sound_speed(up));
        ((vm - cm).min(vp - cp), (vm + cm).max(vp + cp))
    }

    /// Numerical normal flux `n·f*(u⁻, u⁺)` with the jump taken as `u⁻ − u⁺`.
    pub fn numerical_flux<T: Real>(&self, scheme: FluxScheme, um: &[T], up: &[T], n: [f64; 2]) -> Vars<T> {
        let m = self.nvars();
        let mut out = zeros();
        match scheme {
            FluxScheme::Zero => {}
            FluxScheme::Central | FluxScheme::LaxFriedrichs => {
                let (fm, fp) = (self.normal_flux(um, n), self.normal_flux(up, n));
                for q in 0..m {
                    out[q] = (fm[q] + fp[q]).scale(0.5);
                }
                if scheme == FluxScheme::LaxFriedrichs {
                    let half_lambda = self.max_wave_speed(um, up, n).scale(0.5);
                    for q in 0..m {
                        out[q] += half_lambda * (um[q] - up[q]);
                    }
                }
            }
            FluxScheme::Hll => {
                let (sl, sr) = self.wave_bounds(um, up, n);
                let (fm, fp) = (self.normal_flux(um, n), self.normal_flux(up, n));
                if sl.value() >= 0.0 {
                    return fm;
                }
                if sr.value() <= 0.0 {
                    return fp;
                }
                let inv = T::one() / (sr - sl);
                for q in 0..m {
                    out[q] = (sr * fm[q] - sl * fp[q] + sl * sr * (up[q] - um[q])) * inv;
                }
            }
        }
        out
    }

    /// Conservative state from primitives `(ρ, velocity…, p)`.
    pub fn from_primitive(&self, prim: &[f64]) -> Vars<f64> {
        let mut u = zeros();
        match self.model {
            Model::Euler { gamma } => {
                let rho = prim[0];
                let mut ke = 0.0;
                u[0] = rho;
                for i in 0..self.dim {
                    u[1 + i] = rho * prim[1 + i];
                    ke += prim[1 + i] * prim[1 + i];
                }
                u[self.dim + 1] = prim[self.dim + 1] / (gamma - 1.0) + 0.5 * rho * ke;
            }
            Model::Advection { .. } => u[0] = prim[0],
        }
        u
    }

    /// Primitive variables `(ρ, velocity…, p)` of a conservative state.
    pub fn to_primitive(&self, u: &[f64]) -> Vars<f64> {
        let mut w = zeros();
        match self.model {
            Model::Euler { .. } => {
                w[0] = u[0];
                for i in 0..self.dim {
                    w[1 + i] = u[1 + i] / u[0];
                }
                w[self.dim + 1] = self.pressure(u);
            }
            Model::Advection { .. } => w[0] = u[0],
        }
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn numeric_jacobian(p: &Physics, u: &[f64], n: [f64; 2]) -> DMatrix<f64> {
        let m = p.nvars();
        let mut jac = DMatrix::zeros(m, m);
        for j in 0..m {
            let h = 1e-3 * u[j].abs().max(1e-2);
            let eval = |s: f64| {
                let mut v = u.to_vec();
                v[j] += s * h;
                p.normal_flux(&v, n)
            };
            let (f2, f1, b1, b2) = (eval(2.0), eval(1.0), eval(-1.0), eval(-2.0));
            for i in 0..m {
                jac[(i, j)] = (-f2[i] + 8.0 * f1[i] - 8.0 * b1[i] + b2[i]) / (12.0 * h);
            }
        }
        jac
    }

    fn spectral_radius(jac: DMatrix<f64>) -> f64 {
        jac.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn stationary_flux() {
        let p = Physics::euler(1, 1.4);
        let u = p.from_primitive(&[1.0, 0.0, 1.0]);
        assert_relative_eq!(u[2], 2.5, epsilon = 1e-15);
        let f = p.flux(&u)[0];
        assert_eq!(&f[..3], &[0.0, 1.0, 0.0]);
        let p2 = Physics::euler(2, 1.4);
        let f2 = p2.flux(&p2.from_primitive(&[1.3, 0.0, 0.0, 0.7]))[0];
        assert_eq!(f2, [0.0, 0.7, 0.0, 0.0]);
    }

    #[test]
    fn mach_three_mass_flux() {
        let g = 1.4;
        let p = Physics::euler(1, g);
        let u = p.from_primitive(&[g, 3.0, 1.0]);
        assert_relative_eq!(p.flux(&u)[0][0], 4.2, epsilon = 1e-14);
        assert_relative_eq!(p.wave_speed(&u, [1.0, 0.0]), 4.0, epsilon = 1e-14);
    }

    #[test]
    fn rest_state_wave_speed_matches_eigenvalues() {
        let p = Physics::euler(1, 1.4);
        let u = p.from_primitive(&[1.0, 0.0, 1.0]);
        let lam = p.max_wave_speed(&u, &u, [1.0, 0.0]);
        assert_relative_eq!(lam, 1.4f64.sqrt(), epsilon = 1e-14);
        let rho = spectral_radius(numeric_jacobian(&p, &u[..3], [1.0, 0.0]));
        assert_relative_eq!(rho, 1.183215956619923, max_relative = 1e-8);
    }

    #[test]
    fn sod_interface_lf_mass_flux() {
        let p = Physics::euler(1, 1.4);
        let l = p.from_primitive(&[1.0, 0.0, 1.0]);
        let r = p.from_primitive(&[0.125, 0.0, 0.1]);
        let f = p.numerical_flux(FluxScheme::LaxFriedrichs, &l, &r, [1.0, 0.0]);
        // λ from the numerical eigenvalues of the left state (the larger one).
        let lam = spectral_radius(numeric_jacobian(&p, &l[..3], [1.0, 0.0]));
        assert_relative_eq!(f[0], 0.5 * lam * 0.875, max_relative = 1e-8);
        assert_relative_eq!(f[0], 0.517_657, epsilon = 1e-6);
    }

    #[test]
    fn hll_supersonic_branch() {
        let p = Physics::euler(2, 1.4);
        let l = p.from_primitive(&[1.0, 3.0, 0.2, 1.0]);
        let r = p.from_primitive(&[0.5, 2.5, 0.0, 0.8]);
        let n = [1.0, 0.0];
        assert!(p.wave_bounds(&l, &r, n).0 > 0.0);
        assert_eq!(p.numerical_flux(FluxScheme::Hll, &l, &r, n), p.normal_flux(&l, n));
    }

    fn valid_state_2d() -> impl Strategy<Value = [f64; 4]> {
        (0.1f64..5.0, -3.0f64..3.0, -3.0f64..3.0, 0.1f64..5.0).prop_map(|(r, u, v, p)| [r, u, v, p])
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn closed_form_speed_is_spectral_radius(w in valid_state_2d(), theta in 0.0f64..std::f64::consts::TAU) {
            let p = Physics::euler(2, 1.4);
            let u = p.from_primitive(&w);
            let n = [theta.cos(), theta.sin()];
            let numeric = spectral_radius(numeric_jacobian(&p, &u, n));
            let closed = p.wave_speed(&u, n);
            prop_assert!((numeric - closed).abs() <= 1e-6 * closed);
        }

        #[test]
        fn lf_minus_central_is_half_lambda_jump(a in valid_state_2d(), b in valid_state_2d(), theta in 0.0f64..std::f64::consts::TAU) {
            let p = Physics::euler(2, 1.4);
            let (ua, ub) = (p.from_primitive(&a), p.from_primitive(&b));
            let n = [theta.cos(), theta.sin()];
            let lf = p.numerical_flux(FluxScheme::LaxFriedrichs, &ua, &ub, n);
            let c = p.numerical_flux(FluxScheme::Central, &ua, &ub, n);
            let lam = p.max_wave_speed(&ua, &ub, n);
            prop_assert!((lf[0] - c[0] - 0.5 * lam * (ua[0] - ub[0])).abs() <= 1e-14 * (1.0 + lf[0].abs()));
        }

        #[test]
        fn consistency(a in valid_state_2d(), theta in 0.0f64..std::f64::consts::TAU) {
            let p = Physics::euler(2, 1.4);
            let u = p.from_primitive(&a);
            let n = [theta.cos(), theta.sin()];
            let exact = p.normal_flux(&u, n);
            for s in [FluxScheme::LaxFriedrichs, FluxScheme::Hll, FluxScheme::Central] {
                let f = p.numerical_flux(s, &u, &u, n);
                for q in 0..4 {
                    prop_assert!((f[q] - exact[q]).abs() <= 1e-12 * (1.0 + exact[q].abs()));
                }
            }
        }

        #[test]
        fn primitive_round_trip(a in valid_state_2d()) {
            let p = Physics::euler(2, 1.4);
            let back = p.to_primitive(&p.from_primitive(&a));
            for q in 0..4 {
                prop_assert!((back[q] - a[q]).abs() <= 1e-13 * (1.0 + a[q].abs()));
            }
        }

        #[test]
        fn rotation_invariance(a in valid_state_2d(), b in valid_state_2d(), theta in 0.0f64..std::f64::consts::TAU, phi in 0.0f64..std::f64::consts::TAU) {
            let p = Physics::euler(2, 1.4);
            let (ua, ub) = (p.from_primitive(&a), p.from_primitive(&b));
            let n = [theta.cos(), theta.sin()];
            let rot = |u: &Vars<f64>, ang: f64| {
                let (c, s) = (ang.cos(), ang.sin());
                [u[0], c * u[1] - s * u[2], s * u[1] + c * u[2], u[3]]
            };
            let nr = [phi.cos() * n[0] - phi.sin() * n[1], phi.sin() * n[0] + phi.cos() * n[1]];
            for s in [FluxScheme::LaxFriedrichs, FluxScheme::Hll] {
                let direct = p.numerical_flux(s, &ua, &ub, n);
                let rotated = rot(&p.numerical_flux(s, &rot(&ua, phi), &rot(&ub, phi), nr), -phi);
                for q in 0..4 {
                    prop_assert!((direct[q] - rotated[q]).abs() <= 1e-12 * (1.0 + direct[q].abs()));
                }
            }
        }
    }
}
