//! Error metrics, convergence rates and diagnostics of trained surrogates.

use std::collections::BTreeSet;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dg::{Discretization, StateField};
use crate::error::{DgError, Result};
use crate::limiter::Limiter;
use crate::physics::{BoundaryConfig, Physics, Vars};
use crate::real::Dual;
use crate::surrogate::{for_each_face_input, SurrogateParams};
use crate::time::{ssp_rk2_step, Tangent};
use crate::training::randomize;

/// Relative L² errors of a predicted trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSeries {
    pub components: Vec<usize>,
    /// `per_component[c][i]` is the error of component `components[c]` at step `i`.
    pub per_component: Vec<Vec<f64>>,
    /// Component average at every step.
    pub per_step: Vec<f64>,
}

impl ErrorSeries {
    pub fn mean(&self) -> f64 {
        if self.per_step.is_empty() {
            return 0.0;
        }
        self.per_step.iter().sum::<f64>() / self.per_step.len() as f64
    }

    pub fn max(&self) -> f64 {
        self.per_step.iter().copied().fold(0.0, f64::max)
    }
}

/// `‖pred_q − ref_q‖_{L²} / ‖ref_q‖_{L²}` per step and listed component.
pub fn relative_l2(
    disc: &Discretization,
    pred: &[StateField<f64>],
    reference: &[StateField<f64>],
    components: &[usize],
) -> Result<ErrorSeries> {
    if pred.len() != reference.len() {
        return Err(DgError::Shape(format!("{} predicted vs {} reference snapshots", pred.len(), reference.len())));
    }
    if components.is_empty() {
        return Err(DgError::Config("no components selected".into()));
    }
    let mut per_component = vec![Vec::with_capacity(pred.len()); components.len()];
    for (p, r) in pred.iter().zip(reference) {
        if !p.same_shape(r) || components.iter().any(|&q| q >= r.m) {
            return Err(DgError::Shape("snapshot shapes differ".into()));
        }
        let mut diff = p.clone();
        diff.axpy(-1.0, r);
        for (c, &q) in components.iter().enumerate() {
            let denom = disc.l2_sq(r, q);
            if denom == 0.0 {
                return Err(DgError::ZeroNorm);
            }
            per_component[c].push((disc.l2_sq(&diff, q) / denom).sqrt());
        }
    }
    let per_step = (0..pred.len())
        .map(|i| per_component.iter().map(|s| s[i]).sum::<f64>() / components.len() as f64)
        .collect();
    Ok(ErrorSeries { components: components.to_vec(), per_component, per_step })
}

/// Least-squares slope of `log e` against `log h`.
pub fn convergence_rate(h: &[f64], errors: &[f64]) -> Result<f64> {
    if h.len() != errors.len() || h.len() < 2 {
        return Err(DgError::Config("need at least two mesh levels".into()));
    }
    if errors.iter().chain(h).any(|&v| !(v > 0.0)) {
        return Err(DgError::Config("mesh sizes and errors must be positive".into()));
    }
    let xs: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}

/// Jump magnitudes below this are masked in [`wave_speed_profile`].
pub const JUMP_MASK: f64 = 1e-6;

/// `λ̄` on one face of the input cube, where input `fixed` equals `sign`.
#[derive(Debug, Clone, PartialEq)]
pub struct WavePlane {
    pub fixed: usize,
    pub sign: f64,
    pub resolution: usize,
    /// Row-major over the free inputs in increasing index order; `None` where masked.
    pub values: Vec<Option<f64>>,
}

/// Evaluates `λ̄ = (Ψ(x) − Σ_{i<d} x_i) / x_d` on the `2(d+1)` faces of
/// `[−1, 1]^{d+1}`, sampled at `resolution` points per free axis.
pub fn wave_speed_profile(dim: usize, resolution: usize, flux: &dyn Fn(&[f64]) -> f64) -> Result<Vec<WavePlane>> {
    if resolution < 2 {
        return Err(DgError::Config("wave-speed grid needs at least two points per axis".into()));
    }
    let axis = |i: usize| -1.0 + 2.0 * i as f64 / (resolution - 1) as f64;
    let free_dims = dim;
    let cells = resolution.pow(free_dims as u32);
    let mut planes = Vec::new();
    for fixed in 0..=dim {
        for sign in [1.0, -1.0] {
            let mut values = Vec::with_capacity(cells);
            for cell in 0..cells {
                let mut x = [0.0; 3];
                let mut rest = cell;
                let mut free = (0..=dim).filter(|&c| c != fixed).collect::<Vec<_>>();
                free.reverse();
                for c in free {
                    x[c] = axis(rest % resolution);
                    rest /= resolution;
                }
                x[fixed] = sign;
                let jump = x[dim];
                values.push((jump.abs() >= JUMP_MASK).then(|| {
                    let central: f64 = x[..dim].iter().sum();
                    (flux(&x[..=dim]) - central) / jump
                }));
            }
            planes.push(WavePlane { fixed, sign, resolution, values });
        }
    }
    Ok(planes)
}

/// The learned flux as a function of normalized inputs.
pub fn learned_flux(params: &SurrogateParams) -> impl Fn(&[f64]) -> f64 + '_ {
    move |x| {
        let mut y = [0.0];
        params.flux.forward(x, &mut Vec::new(), &mut y);
        y[0]
    }
}

/// The Lax–Friedrichs flux of linear advection with normal speed `a·n` on
/// normalized inputs: the wave speed `|a·n|` does not depend on the states.
pub fn advection_oracle_flux(normal_speed: f64) -> impl Fn(&[f64]) -> f64 {
    move |x| {
        let (avg, jump) = x.split_at(x.len() - 1);
        avg.iter().sum::<f64>() + 0.5 * normal_speed.abs() * jump[0]
    }
}

/// Counts of normalized face inputs, split by which input has magnitude one.
/// Set `c` bins the remaining inputs of samples dominated by input `c` on a
/// `bins^d` grid over `[−1, 1]^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityHistogram {
    pub dim: usize,
    pub bins: usize,
    pub counts: Vec<Vec<u64>>,
}

impl DensityHistogram {
    pub fn new(dim: usize, bins: usize) -> Self {
        Self { dim, bins, counts: vec![vec![0; bins.pow(dim as u32)]; dim + 1] }
    }

    fn bin(&self, v: f64) -> usize {
        (((v + 1.0) * 0.5 * self.bins as f64).floor().max(0.0) as usize).min(self.bins - 1)
    }

    /// Bins one normalized input vector (length `d + 1`).
    pub fn add(&mut self, x: &[f64]) {
        let mut set = 0;
        for (c, v) in x.iter().enumerate() {
            if v.abs() > x[set].abs() {
                set = c;
            }
        }
        let mut cell = 0;
        for (c, &v) in x.iter().enumerate() {
            if c != set {
                cell = cell * self.bins + self.bin(v);
            }
        }
        self.counts[set][cell] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Counts divided by the largest count over all sets.
    pub fn normalized(&self) -> Vec<Vec<f64>> {
        let top = self.counts.iter().flatten().copied().max().unwrap_or(0).max(1) as f64;
        self.counts.iter().map(|s| s.iter().map(|&c| c as f64 / top).collect()).collect()
    }

    /// `(set, cell)` of every nonzero count.
    pub fn occupied(&self) -> BTreeSet<(usize, usize)> {
        let mut out = BTreeSet::new();
        for (s, counts) in self.counts.iter().enumerate() {
            for (c, &n) in counts.iter().enumerate() {
                if n > 0 {
                    out.insert((s, c));
                }
            }
        }
        out
    }
}

/// Histogram of the face inputs seen while training on `snapshots`: each
/// snapshot once when `delta == 0`, otherwise once per epoch with fresh noise.
#[allow(clippy::too_many_arguments)]
pub fn input_density_histogram(
    disc: &Discretization,
    snapshots: &[StateField<f64>],
    phys: &Physics,
    bcs: &BoundaryConfig,
    delta: f64,
    epochs: usize,
    bins: usize,
    rng: &mut impl Rng,
) -> Result<DensityHistogram> {
    let mut hist = DensityHistogram::new(disc.dim(), bins);
    let rounds = if delta == 0.0 { 1 } else { epochs };
    for _ in 0..rounds {
        for u in snapshots {
            let v = randomize(u, delta, rng);
            for_each_face_input(disc, &v, phys, bcs, v.t, |x| hist.add(x))?;
        }
    }
    Ok(hist)
}

/// Per-step distance between the DG and surrogate two-stage maps along a
/// surrogate trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorSeries {
    /// `f^{i+1} = ‖F²(ũ^i) − Ψ²(ũ^i)‖_{L²}` (all components).
    pub values: Vec<f64>,
    /// Step at which the DG map failed, if any.
    pub truncated_at: Option<usize>,
}

fn l2_all(disc: &Discretization, e: &StateField<f64>) -> f64 {
    (0..e.m).map(|q| disc.l2_sq(e, q)).sum::<f64>().sqrt()
}

/// Evaluates the error indicator along `traj` (all but the last state are used).
pub fn error_indicator<A: Tangent, B: Tangent>(
    disc: &Discretization,
    traj: &[StateField<f64>],
    dt: f64,
    dg: &A,
    surrogate: &B,
    limiter: &Limiter,
) -> Result<IndicatorSeries> {
    let mut values = Vec::new();
    for (i, u) in traj.iter().enumerate().take(traj.len().saturating_sub(1)) {
        let f = match ssp_rk2_step(u, dt, dg, limiter) {
            Ok(r) => r.u2,
            Err(_) => return Ok(IndicatorSeries { values, truncated_at: Some(i) }),
        };
        let mut d = ssp_rk2_step(u, dt, surrogate, limiter)?.u2;
        d.axpy(-1.0, &f);
        values.push(l2_all(disc, &d));
    }
    Ok(IndicatorSeries { values, truncated_at: None })
}

/// Bound `B^{i+1} = g_i B^i + f^{i+1}`, `B^0 = 0`, on the accumulated error.
pub fn accumulated_bound(f: &[f64], g: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0];
    for (fi, gi) in f.iter().zip(g) {
        let last = *out.last().expect("nonempty");
        out.push(gi * last + fi);
    }
    out
}

/// Randomized power-iteration estimate of `‖∂F²/∂u − ∂Ψ²/∂u‖` at `u` (an
/// approximation from below, not a bound).
pub fn jacobian_gap_estimate<A: Tangent, B: Tangent>(
    u: &StateField<f64>,
    dt: f64,
    dg: &A,
    surrogate: &B,
    limiter: &Limiter,
    iterations: usize,
    rng: &mut impl Rng,
) -> Result<f64> {
    let mut v: Vec<f64> = (0..u.data.len()).map(|_| StandardNormal.sample(rng)).collect();
    let mut estimate = 0.0;
    for _ in 0..iterations.max(1) {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Ok(0.0);
        }
        v.iter_mut().for_each(|x| *x /= norm);
        let ud = StateField::<Dual<f64>> {
            k: u.k,
            np: u.np,
            m: u.m,
            data: u.data.iter().zip(&v).map(|(&a, &b)| Dual::new(a, b)).collect(),
            t: u.t,
        };
        let a = ssp_rk2_step(&ud, dt, dg, limiter)?.u2;
        let b = ssp_rk2_step(&ud, dt, surrogate, limiter)?.u2;
        v = a.data.iter().zip(&b.data).map(|(x, y)| x.eps - y.eps).collect();
        estimate = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    }
    Ok(estimate)
}

/// `C_p = (p − p₀) / (½ ρ₀ |v₀|²)` at every node, indexed `k * N_p + l`.
pub fn pressure_coefficient(phys: &Physics, u: &StateField<f64>, free: &Vars<f64>) -> Result<Vec<f64>> {
    if phys.gamma().is_none() {
        return Err(DgError::Config("pressure coefficient needs the Euler model".into()));
    }
    let rho0 = free[0];
    let speed_sq: f64 = (0..phys.dim).map(|i| (free[1 + i] / rho0).powi(2)).sum();
    let dynamic = 0.5 * rho0 * speed_sq;
    if !(dynamic > 0.0) {
        return Err(DgError::Config("free stream has zero dynamic pressure".into()));
    }
    let p0 = phys.pressure(free);
    let mut out = Vec::with_capacity(u.k * u.np);
    for k in 0..u.k {
        for l in 0..u.np {
            out.push((phys.pressure(&u.node_state(k, l)) - p0) / dynamic);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dg::QuadratureMode;
    use crate::mesh::uniform_1d;
    use crate::physics::{BoundaryKind, FluxModel, FluxScheme, Problem};
    use crate::surrogate::{DgNetTangent, SurrogateMode};
    use crate::time::DgTangent;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sod(k: usize) -> (Discretization, BoundaryConfig, Physics, StateField<f64>) {
        let phys = Physics::euler(1, 1.4);
        let bcs = BoundaryConfig::uniform(&["left".into(), "right".into()], BoundaryKind::Outflow);
        let disc = Discretization::new(uniform_1d(0.0, 1.0, k).unwrap(), 1, QuadratureMode::OverIntegration, &[]).unwrap();
        let p = Problem::from_id("sod").unwrap();
        let u = disc.interpolate(3, |x| p.initial_state(&phys, x));
        (disc, bcs, phys, u)
    }

    #[test]
    fn relative_error_examples() {
        let (disc, _, _, u) = sod(8);
        let same = relative_l2(&disc, std::slice::from_ref(&u), std::slice::from_ref(&u), &[0, 1, 2]);
        assert!(matches!(same, Err(DgError::ZeroNorm)), "momentum is zero");
        let s = relative_l2(&disc, &[u.clone(), u.clone()], &[u.clone(), u.clone()], &[0, 2]).unwrap();
        assert_eq!(s.per_step, vec![0.0, 0.0]);
        let twice = StateField::lincomb(2.0, &u, 0.0, &u);
        let s = relative_l2(&disc, &[twice], std::slice::from_ref(&u), &[0, 2]).unwrap();
        assert!((s.per_step[0] - 1.0).abs() < 1e-14);
        assert!(relative_l2(&disc, std::slice::from_ref(&u), &[], &[0]).is_err());
    }

    #[test]
    fn relative_error_on_one_element_by_hand() {
        let disc = Discretization::new(uniform_1d(0.0, 2.0, 1).unwrap(), 1, QuadratureMode::Collocation, &[]).unwrap();
        let r = StateField::from_data(1, 2, 1, vec![1.0, 1.0], 0.0).unwrap();
        let p = StateField::from_data(1, 2, 1, vec![1.0, 2.0], 0.0).unwrap();
        // M = (h/6)[[2,1],[1,2]] with h = 2: eᵀMe = (1/3)·2 = 2/3, rᵀMr = 2.
        let s = relative_l2(&disc, &[p], &[r], &[0]).unwrap();
        assert!((s.per_step[0] - (1.0f64 / 3.0).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn rate_examples() {
        let h = [1.0, 0.5, 0.25];
        assert!((convergence_rate(&h, &[1.0, 0.25, 0.0625]).unwrap() - 2.0).abs() < 1e-14);
        let r1 = convergence_rate(&h, &[6.32e-2, 2.51e-2, 7.51e-3]).unwrap();
        assert!((r1 - 1.55).abs() < 0.02, "{r1}");
        let r4 = convergence_rate(&h, &[2.58e-3, 1.46e-4, 7.65e-6]).unwrap();
        assert!((r4 - 4.20).abs() < 0.01, "{r4}");
        assert!(convergence_rate(&h[..1], &[1.0]).is_err());
        assert!(convergence_rate(&h, &[1.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn wave_speed_examples() {
        let central = |x: &[f64]| x[..x.len() - 1].iter().sum::<f64>();
        for plane in wave_speed_profile(2, 9, &central).unwrap() {
            assert_eq!(plane.values.len(), 81);
            assert!(plane.values.iter().flatten().all(|v| v.abs() < 1e-15));
        }
        let half = |x: &[f64]| x[..x.len() - 1].iter().sum::<f64>() + 0.5 * x[x.len() - 1];
        let planes = wave_speed_profile(1, 11, &half).unwrap();
        assert_eq!(planes.len(), 4);
        for plane in &planes {
            for v in plane.values.iter().flatten() {
                assert!((v - 0.5).abs() < 1e-14);
            }
        }
        // The middle of the jump axis is masked on planes where the jump varies.
        assert!(planes[0].values[5].is_none());
        assert!(wave_speed_profile(1, 1, &half).is_err());
    }

    #[test]
    fn histogram_examples() {
        let mut h = DensityHistogram::new(2, 200);
        h.add(&[0.3, -0.2, 1.0]);
        assert_eq!(h.occupied().len(), 1);
        assert_eq!(h.occupied().iter().next().unwrap().0, 2);
        assert_eq!(h.normalized()[2].iter().copied().fold(0.0, f64::max), 1.0);

        let (disc, bcs, phys, u) = sod(12);
        let snaps = vec![u.clone(), u];
        let clean = input_density_histogram(&disc, &snaps, &phys, &bcs, 0.0, 5, 200, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(clean.total(), (12 * 2 * 2 * 3) as u64);
    }

    #[test]
    fn pressure_coefficient_examples() {
        let phys = Physics::euler(2, 1.4);
        let free = phys.from_primitive(&[1.4, 0.8, 0.0, 1.0]);
        let u = StateField::from_data(1, 1, 4, free[..4].to_vec(), 0.0).unwrap();
        assert_eq!(pressure_coefficient(&phys, &u, &free).unwrap(), vec![0.0]);
        let q = 0.5 * 1.4 * 0.64;
        let s = phys.from_primitive(&[1.0, 0.0, 0.0, 1.0 + q]);
        let v = StateField::from_data(1, 1, 4, s[..4].to_vec(), 0.0).unwrap();
        assert!((pressure_coefficient(&phys, &v, &free).unwrap()[0] - 1.0).abs() < 1e-14);
        let s = phys.from_primitive(&[1.0, 0.0, 0.0, 2.0]);
        let v = StateField::from_data(1, 1, 4, s[..4].to_vec(), 0.0).unwrap();
        assert!((pressure_coefficient(&phys, &v, &free).unwrap()[0] - 1.0 / 0.448).abs() < 1e-12);
        let still = phys.from_primitive(&[1.0, 0.0, 0.0, 1.0]);
        assert!(pressure_coefficient(&phys, &v, &still).is_err());
    }

    #[test]
    fn indicator_vanishes_for_the_oracle_and_bounds_the_error() {
        let (disc, bcs, phys, u0) = sod(20);
        let coll = Discretization::new(disc.mesh.clone(), 1, QuadratureMode::Collocation, &[]).unwrap();
        let dg = DgTangent { disc: &coll, model: FluxModel::new(phys, FluxScheme::LaxFriedrichs), bcs: &bcs };
        let lim = Limiter::new(&coll).unwrap();
        let zeros = SurrogateParams::zeros(1, 2, 4, false);
        let oracle = DgNetTangent { disc: &coll, physics: phys, bcs: &bcs, params: &zeros, mode: SurrogateMode::FluxOracle };
        let dt = 1e-3;
        let mut traj = vec![u0.clone()];
        for _ in 0..5 {
            let next = ssp_rk2_step(traj.last().unwrap(), dt, &dg, &lim).unwrap().u2;
            traj.push(next);
        }
        let f = error_indicator(&coll, &traj, dt, &dg, &oracle, &lim).unwrap();
        assert_eq!(f.values.len(), 5);
        assert!(f.values.iter().all(|v| *v <= 1e-12), "{:?}", f.values);

        // A slightly wrong surrogate: accumulated bound with measured g.
        let params = SurrogateParams::random(1, 2, false, 0.02, 7);
        let learned = DgNetTangent { disc: &coll, physics: phys, bcs: &bcs, params: &params, mode: SurrogateMode::Learned };
        let mut sur = vec![u0.clone()];
        let mut truth = vec![u0];
        for _ in 0..6 {
            let a = ssp_rk2_step(sur.last().unwrap(), dt, &learned, &lim).unwrap().u2;
            let b = ssp_rk2_step(truth.last().unwrap(), dt, &dg, &lim).unwrap().u2;
            sur.push(a);
            truth.push(b);
        }
        let f = error_indicator(&coll, &sur, dt, &dg, &learned, &lim).unwrap().values;
        let mut g = Vec::new();
        let mut e = vec![0.0];
        for i in 0..6 {
            let mut d = sur[i].clone();
            d.axpy(-1.0, &truth[i]);
            let ei = l2_all(&coll, &d);
            let mut step = ssp_rk2_step(&sur[i], dt, &dg, &lim).unwrap().u2;
            step.axpy(-1.0, &truth[i + 1]);
            g.push(if ei > 0.0 { l2_all(&coll, &step) / ei } else { 0.0 });
            let mut d1 = sur[i + 1].clone();
            d1.axpy(-1.0, &truth[i + 1]);
            e.push(l2_all(&coll, &d1));
        }
        let bound = accumulated_bound(&f, &g);
        for (b, ei) in bound.iter().zip(&e) {
            assert!(*b >= ei * (1.0 - 1e-12), "{b} < {ei}");
        }
        let est = jacobian_gap_estimate(&sur[0], dt, &dg, &learned, &lim, 5, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!(est.is_finite() && est > 0.0);
    }
}
