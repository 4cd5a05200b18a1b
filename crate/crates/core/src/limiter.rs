//! Smooth vertex-based slope limiter for `N = 1`.
//!
//! For every element `k`, variable `q` and vertex `v` with nodal value
//! `u_v`, let `Δ₋ = u_v − ū_k` and `Δ₊ = M_v − ū_k`, where `M_v` is the
//! largest (if `Δ₋ > 0`, else smallest) element mean among the elements
//! sharing `v`. The vertex factor is
//!
//! ```text
//! φ = min(1, (Δ₊² + 2Δ₊Δ₋ + ε) / (Δ₊² + 2Δ₋² + Δ₊Δ₋ + ε)),   ε = ε_lim · max(ū², 1e-30)
//! ```
//!
//! and the element slope is scaled by `α = min_v φ_v`. Means are untouched.
//! Limited vertex values stay inside the range of the patch means up to
//! `√(ε/2)`, since `φ ≤ Δ₊/Δ₋` when `ε = 0`. `φ = 1` once `Δ₊/Δ₋ ≥ 2`, so
//! linear data on uniform meshes pass unchanged. Vertices shared by no
//! other element (1D domain ends) carry no neighborhood information and are
//! skipped.

use crate::dg::{Discretization, StateField};
use crate::error::{DgError, Result};
use crate::real::Real;

/// Default relative smoothing parameter `ε_lim`.
pub const EPS_LIM: f64 = 1e-10;

#[derive(Debug, Clone)]
struct VertexStencil {
    node: usize,
    patch: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Limiter {
    pub enabled: bool,
    pub eps_lim: f64,
    stencils: Vec<Vec<VertexStencil>>,
    weights: Vec<f64>,
}

/// Per-vertex factor and its partial derivatives `(∂/∂Δ₊, ∂/∂Δ₋, ∂/∂ε)`,
/// zero when clamped.
fn factor(dp: f64, dm: f64, eps: f64) -> (f64, [f64; 3]) {
    if dm == 0.0 {
        return (1.0, [0.0; 3]);
    }
    let num = dp * dp + 2.0 * dp * dm + eps;
    let den = dp * dp + 2.0 * dm * dm + dp * dm + eps;
    let phi = num / den;
    if phi >= 1.0 {
        return (1.0, [0.0; 3]);
    }
    let d2 = den * den;
    let d_dp = ((2.0 * dp + 2.0 * dm) * den - num * (2.0 * dp + dm)) / d2;
    let d_dm = (2.0 * dp * den - num * (4.0 * dm + dp)) / d2;
    let d_eps = (den - num) / d2;
    (phi, [d_dp, d_dm, d_eps])
}

fn factor_t<T: Real>(dp: T, dm: T, eps: T) -> T {
    if dm.value() == 0.0 {
        return T::one();
    }
    let num = dp * dp + (dp * dm).scale(2.0) + eps;
    let den = dp * dp + (dm * dm).scale(2.0) + dp * dm + eps;
    (num / den).min(T::one())
}

impl Limiter {
    pub fn disabled() -> Self {
        Self { enabled: false, eps_lim: EPS_LIM, stencils: Vec::new(), weights: Vec::new() }
    }

    /// Builds vertex stencils from the discretization's vertex patches.
    pub fn new(disc: &Discretization) -> Result<Self> {
        if disc.basis.order != 1 {
            return Err(DgError::Config(format!(
                "the slope limiter requires N = 1 (got N = {})",
                disc.basis.order
            )));
        }
        let mut stencils = Vec::with_capacity(disc.num_elements());
        for (k, el) in disc.mesh.elements.iter().enumerate() {
            let mut list = Vec::with_capacity(el.len());
            for &v in el {
                let x = disc.mesh.vertices[v];
                let node = (0..disc.basis.np)
                    .min_by(|&a, &b| {
                        let (pa, pb) = (disc.node(k, a), disc.node(k, b));
                        let da = (pa[0] - x[0]).hypot(pa[1] - x[1]);
                        let db = (pb[0] - x[0]).hypot(pb[1] - x[1]);
                        da.total_cmp(&db)
                    })
                    .unwrap_or(0);
                let patch = disc.conn.vertex_patches[v].clone();
                if patch.len() > 1 {
                    list.push(VertexStencil { node, patch });
                }
            }
            stencils.push(list);
        }
        Ok(Self { enabled: true, eps_lim: EPS_LIM, stencils, weights: disc.basis.mean_weights() })
    }

    /// Limiter for the discretization when `enabled`, identity otherwise.
    pub fn for_problem(disc: &Discretization, enabled: bool) -> Result<Self> {
        if enabled {
            Self::new(disc)
        } else {
            Ok(Self::disabled())
        }
    }

    fn means<T: Real>(&self, u: &StateField<T>) -> Vec<T> {
        let mut out = Vec::with_capacity(u.k * u.m);
        for k in 0..u.k {
            for q in 0..u.m {
                let mut acc = T::zero();
                for (v, w) in u.var(k, q).iter().zip(&self.weights) {
                    acc += v.scale(*w);
                }
                out.push(acc);
            }
        }
        out
    }

    fn check_shape<T>(&self, u: &StateField<T>) {
        assert_eq!(u.k, self.stencils.len(), "limiter built for a different mesh");
        assert_eq!(u.np, self.weights.len(), "limiter built for a different basis");
    }

    /// Applies `S`. Elements whose factor is 1 are copied unchanged.
    pub fn apply<T: Real>(&self, u: &StateField<T>) -> StateField<T> {
        if !self.enabled {
            return u.clone();
        }
        self.check_shape(u);
        let means = self.means(u);
        let mut out = u.clone();
        for k in 0..u.k {
            for q in 0..u.m {
                let ubar = means[k * u.m + q];
                let eps = T::from_f64(self.eps_lim) * (ubar * ubar).max(T::from_f64(1e-30));
                let mut alpha = T::one();
                for st in &self.stencils[k] {
                    let dm = u.data[u.idx(k, q, st.node)] - ubar;
                    let mut ext = ubar;
                    for &j in &st.patch {
                        let mj = means[j * u.m + q];
                        ext = if dm.value() > 0.0 { ext.max(mj) } else { ext.min(mj) };
                    }
                    alpha = alpha.min(factor_t(ext - ubar, dm, eps));
                }
                if alpha.value() < 1.0 {
                    for l in 0..u.np {
                        let i = u.idx(k, q, l);
                        out.data[i] = ubar + alpha * (u.data[i] - ubar);
                    }
                }
            }
        }
        out
    }

    /// Vector-Jacobian product `(∂S/∂u)ᵀ g` at `u`, using the derivative of
    /// the active branch of every `min`/`max`.
    pub fn vjp(&self, u: &StateField<f64>, g: &StateField<f64>) -> StateField<f64> {
        if !self.enabled {
            return g.clone();
        }
        self.check_shape(u);
        let m = u.m;
        let means = self.means(u);
        let mut grad = StateField::zeros_like(u);
        let mut gmean = vec![0.0; u.k * m];
        for k in 0..u.k {
            for q in 0..m {
                let ubar = means[k * m + q];
                let eps_floor = ubar * ubar <= 1e-30;
                let eps = self.eps_lim * (ubar * ubar).max(1e-30);
                // Active vertex: (φ, partials, node, extremal element).
                let mut best: Option<(f64, [f64; 3], usize, usize)> = None;
                let mut alpha = 1.0;
                for st in &self.stencils[k] {
                    let dm = u.data[u.idx(k, q, st.node)] - ubar;
                    let (mut ext, mut arg) = (ubar, k);
                    for &j in &st.patch {
                        let mj = means[j * m + q];
                        if (dm > 0.0 && mj > ext) || (dm <= 0.0 && mj < ext) {
                            ext = mj;
                            arg = j;
                        }
                    }
                    let (phi, d) = factor(ext - ubar, dm, eps);
                    if phi < alpha {
                        alpha = phi;
                        best = Some((phi, d, st.node, arg));
                    }
                }
                let base = u.idx(k, q, 0);
                let gk = &g.data[base..base + u.np];
                if best.is_none() {
                    grad.data[base..base + u.np].iter_mut().zip(gk).for_each(|(a, b)| *a += b);
                    continue;
                }
                let uk = &u.data[base..base + u.np];
                let g_alpha: f64 = gk.iter().zip(uk).map(|(gl, ul)| gl * (ul - ubar)).sum();
                let gsum: f64 = gk.iter().sum();
                for l in 0..u.np {
                    grad.data[base + l] += alpha * gk[l];
                }
                gmean[k * m + q] += (1.0 - alpha) * gsum;
                let (_, [d_dp, d_dm, d_eps], node, arg) = best.unwrap_or_default();
                // dp = ū_arg − ū_k, dm = u_node − ū_k, ε = ε_lim ū_k².
                grad.data[base + node] += g_alpha * d_dm;
                gmean[arg * m + q] += g_alpha * d_dp;
                gmean[k * m + q] -= g_alpha * (d_dp + d_dm);
                if !eps_floor {
                    gmean[k * m + q] += g_alpha * d_eps * 2.0 * self.eps_lim * ubar;
                }
            }
        }
        for k in 0..u.k {
            for q in 0..m {
                let gm = gmean[k * m + q];
                if gm != 0.0 {
                    let base = u.idx(k, q, 0);
                    for (l, w) in self.weights.iter().enumerate() {
                        grad.data[base + l] += w * gm;
                    }
                }
            }
        }
        grad
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dg::QuadratureMode;
    use crate::mesh::{rectangle, uniform_1d, Split};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn disc_1d(k: usize, periodic: bool) -> Discretization {
        let pairs = if periodic { vec![("left".to_string(), "right".to_string())] } else { vec![] };
        Discretization::new(uniform_1d(0.0, 1.0, k).unwrap(), 1, QuadratureMode::Collocation, &pairs).unwrap()
    }

    fn disc_2d() -> Discretization {
        let mesh = rectangle(0.0, 1.0, 0.0, 1.0, 4, 4, Split::Crossed).unwrap();
        Discretization::new(mesh, 1, QuadratureMode::Collocation, &[]).unwrap()
    }

    #[test]
    fn requires_linear_elements() {
        let d = Discretization::new(uniform_1d(0.0, 1.0, 4).unwrap(), 2, QuadratureMode::Collocation, &[]).unwrap();
        assert!(Limiter::new(&d).is_err());
    }

    #[test]
    fn constant_field_is_bitwise_unchanged() {
        for d in [disc_1d(10, true), disc_2d()] {
            let lim = Limiter::new(&d).unwrap();
            let u = d.interpolate(3, |_| [1.3, -0.2, 2.5, 0.0]);
            assert_eq!(lim.apply(&u), u);
        }
    }

    #[test]
    fn linear_field_is_unchanged() {
        let d = disc_1d(20, false);
        let lim = Limiter::new(&d).unwrap();
        let u = d.interpolate(1, |x| [0.3 + 2.0 * x[0], 0.0, 0.0, 0.0]);
        let v = lim.apply(&u);
        for (a, b) in u.data.iter().zip(&v.data) {
            assert!((a - b).abs() <= 1e-12);
        }
        // On a periodic mesh the seam is a jump, but elements away from it are untouched.
        let d = disc_1d(20, true);
        let lim = Limiter::new(&d).unwrap();
        let u = d.interpolate(1, |x| [0.3 + 2.0 * x[0], 0.0, 0.0, 0.0]);
        let v = lim.apply(&u);
        for k in 1..19 {
            for l in 0..2 {
                assert!((u.data[u.idx(k, 0, l)] - v.data[v.idx(k, 0, l)]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn linear_field_in_2d_is_unchanged_in_the_interior() {
        let d = disc_2d();
        let lim = Limiter::new(&d).unwrap();
        let u = d.interpolate(1, |x| [1.0 + 0.5 * x[0] - 0.25 * x[1], 0.0, 0.0, 0.0]);
        let v = lim.apply(&u);
        let means = d.element_means(&u);
        let after = d.element_means(&v);
        for (a, b) in means.iter().zip(&after) {
            assert!((a - b).abs() <= 1e-13);
        }
    }

    fn spike_field(d: &Discretization, rng: &mut ChaCha8Rng) -> StateField<f64> {
        let mut u = d.interpolate(1, |_| [1.0, 0.0, 0.0, 0.0]);
        for v in u.data.iter_mut() {
            *v += 0.01 * rng.random_range(-1.0..1.0);
        }
        let k = rng.random_range(0..u.k);
        let amp = rng.random_range(-3.0..3.0);
        for l in 0..u.np {
            let i = u.idx(k, 0, l);
            u.data[i] += amp * rng.random_range(0.2..1.0) * if l % 2 == 0 { 1.0 } else { -0.7 };
        }
        u
    }

    fn check_bounds(d: &Discretization, lim: &Limiter, u: &StateField<f64>) {
        let v = lim.apply(u);
        let before = d.element_means(u);
        let after = d.element_means(&v);
        for (a, b) in before.iter().zip(&after) {
            assert!((a - b).abs() <= 1e-13, "mean changed {a} -> {b}");
        }
        for k in 0..u.k {
            for st in &lim.stencils[k] {
                let lo = st.patch.iter().map(|&j| before[j]).fold(f64::INFINITY, f64::min);
                let hi = st.patch.iter().map(|&j| before[j]).fold(f64::NEG_INFINITY, f64::max);
                let x = v.data[v.idx(k, 0, st.node)];
                let slack = (EPS_LIM / 2.0).sqrt() * hi.abs().max(lo.abs()) + 1e-14;
                assert!(x >= lo - slack && x <= hi + slack, "{x} outside [{lo}, {hi}]");
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn spike_bounded_and_mean_preserved(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for d in [disc_1d(12, true), disc_2d()] {
                let lim = Limiter::new(&d).unwrap();
                check_bounds(&d, &lim, &spike_field(&d, &mut rng));
            }
        }
    }

    #[test]
    fn repeated_application_settles_on_spikes() {
        let d = disc_1d(16, true);
        let lim = Limiter::new(&d).unwrap();
        let mut u = d.interpolate(1, |_| [1.0, 0.0, 0.0, 0.0]);
        let i = u.idx(7, 0, 0);
        u.data[i] = 3.0;
        let once = lim.apply(&u);
        let twice = lim.apply(&once);
        for (a, b) in once.data.iter().zip(&twice.data) {
            assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn vjp_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for d in [disc_1d(12, true), disc_2d()] {
            let lim = Limiter::new(&d).unwrap();
            let mut u = d.interpolate(3, |x| [1.0 + 0.3 * (7.0 * x[0]).sin(), 0.2 * x[1], 2.0 + x[0], 0.0]);
            for v in u.data.iter_mut() {
                *v += 0.05 * rng.random_range(-1.0..1.0);
            }
            let mut g = StateField::zeros_like(&u);
            let mut dir = StateField::zeros_like(&u);
            for (a, b) in g.data.iter_mut().zip(dir.data.iter_mut()) {
                *a = rng.random_range(-1.0..1.0);
                *b = rng.random_range(-1.0..1.0);
            }
            let vjp = lim.vjp(&u, &g);
            let h = 1e-7;
            let fwd = |s: f64| {
                let mut w = u.clone();
                w.axpy(s, &dir);
                let out = lim.apply(&w);
                out.data.iter().zip(&g.data).map(|(a, b)| a * b).sum::<f64>()
            };
            let fd = (fwd(h) - fwd(-h)) / (2.0 * h);
            let an: f64 = vjp.data.iter().zip(&dir.data).map(|(a, b)| a * b).sum();
            assert!((fd - an).abs() <= 1e-6 * (1.0 + an.abs()), "fd {fd} vs {an}");
        }
    }

    #[test]
    fn dual_forward_matches_vjp() {
        // Forward-mode through the generic apply agrees with the reverse product.
        use crate::real::Dual;
        let d = disc_1d(10, true);
        let lim = Limiter::new(&d).unwrap();
        let u = d.interpolate(1, |x| [1.0 + (6.0 * x[0]).sin(), 0.0, 0.0, 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let dir: Vec<f64> = (0..u.data.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g: Vec<f64> = (0..u.data.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ud = StateField::<Dual<f64>> {
            k: u.k,
            np: u.np,
            m: u.m,
            data: u.data.iter().zip(&dir).map(|(&v, &t)| Dual::new(v, t)).collect(),
            t: 0.0,
        };
        let out = lim.apply(&ud);
        let jvp: f64 = out.data.iter().zip(&g).map(|(a, b)| a.eps * b).sum();
        let gf = StateField::from_data(u.k, u.np, u.m, g, 0.0).unwrap();
        let vjp: f64 = lim.vjp(&u, &gf).data.iter().zip(&dir).map(|(a, b)| a * b).sum();
        assert!((jvp - vjp).abs() <= 1e-10 * (1.0 + vjp.abs()));
    }
}
