//! Explicit SSP-RK2 with stage capture and implicit backward Euler solved by
//! matrix-free Newton–GMRES.

use serde::{Deserialize, Serialize};

use crate::dg::{dg_tangent, Discretization, StateField};
use crate::error::{DgError, Result};
use crate::limiter::Limiter;
use crate::physics::{BoundaryConfig, FluxModel};
use crate::real::{Dual, Real};

/// A semi-discrete right-hand side `du/dt = F(u, t)`, evaluable in any scalar type.
pub trait Tangent: Sync {
    fn eval<T: Real>(&self, u: &StateField<T>, t: f64) -> Result<StateField<T>>;
}

/// The DG operator as a [`Tangent`].
#[derive(Clone, Copy)]
pub struct DgTangent<'a> {
    pub disc: &'a Discretization,
    pub model: FluxModel,
    pub bcs: &'a BoundaryConfig,
}

impl Tangent for DgTangent<'_> {
    fn eval<T: Real>(&self, u: &StateField<T>, t: f64) -> Result<StateField<T>> {
        dg_tangent(self.disc, u, &self.model, self.bcs, t)
    }
}

/// Input, both stages and step size of one SSP-RK2 step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord<T = f64> {
    pub u0: StateField<T>,
    pub u1: StateField<T>,
    pub u2: StateField<T>,
    pub dt: f64,
}

fn finite_or<T: Real>(u: StateField<T>, what: &str) -> Result<StateField<T>> {
    if u.is_finite() {
        Ok(u)
    } else {
        Err(DgError::NonFinite(what.into()))
    }
}

/// First stage `u¹ = S(u⁰ + Δt F(u⁰))` given `F(u⁰)`.
pub fn rk2_stage1<T: Real>(u0: &StateField<T>, f0: &StateField<T>, dt: f64) -> StateField<T> {
    let mut z = u0.clone();
    z.axpy(T::from_f64(dt), f0);
    z.t = u0.t + dt;
    z
}

/// Second stage before limiting: `½(u¹ + u⁰ + Δt F(u¹))`.
pub fn rk2_stage2<T: Real>(u0: &StateField<T>, u1: &StateField<T>, f1: &StateField<T>, dt: f64) -> StateField<T> {
    let half = T::from_f64(0.5);
    let dtt = T::from_f64(dt);
    let data = u1
        .data
        .iter()
        .zip(&u0.data)
        .zip(&f1.data)
        .map(|((&a, &b), &f)| half * (a + b + dtt * f))
        .collect();
    StateField { k: u0.k, np: u0.np, m: u0.m, data, t: u1.t }
}

/// One SSP-RK2 step with the limiter applied after each stage.
pub fn ssp_rk2_step<T: Real, F: Tangent>(
    u0: &StateField<T>,
    dt: f64,
    tangent: &F,
    limiter: &Limiter,
) -> Result<StepRecord<T>> {
    let f0 = tangent.eval(u0, u0.t)?;
    let u1 = finite_or(limiter.apply(&rk2_stage1(u0, &f0, dt)), "stage 1")?;
    let f1 = tangent.eval(&u1, u1.t)?;
    let u2 = finite_or(limiter.apply(&rk2_stage2(u0, &u1, &f1, dt)), "stage 2")?;
    Ok(StepRecord { u0: u0.clone(), u1, u2, dt })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JvpMode {
    /// Forward-mode dual numbers through the tangent.
    Autodiff,
    /// One-sided difference with step `√ε (1 + ‖u‖) / ‖v‖`.
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ImplicitConfig {
    /// Newton stops when `‖u* − u − Δt F(u*)‖∞ ≤ newton_tol`.
    pub newton_tol: f64,
    pub max_newton: usize,
    pub gmres_rtol: f64,
    pub restart: usize,
    pub max_restarts: usize,
    pub jvp: JvpMode,
}

impl Default for ImplicitConfig {
    fn default() -> Self {
        Self { newton_tol: 1e-10, max_newton: 50, gmres_rtol: 1e-8, restart: 30, max_restarts: 20, jvp: JvpMode::Autodiff }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NewtonStats {
    pub iterations: usize,
    pub residual: f64,
    pub gmres_iterations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Restarted GMRES for `A x = b` from `x = 0`. Returns the solution and the
/// number of Arnoldi steps taken.
pub fn gmres(
    apply: &mut dyn FnMut(&[f64]) -> Result<Vec<f64>>,
    b: &[f64],
    rtol: f64,
    restart: usize,
    max_restarts: usize,
) -> Result<(Vec<f64>, usize)> {
    let n = b.len();
    let bnorm = norm2(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, 0));
    }
    let mut steps = 0;
    let mut r = b.to_vec();
    let mut rnorm = bnorm;
    for _ in 0..max_restarts.max(1) {
        let start = rnorm;
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / rnorm).collect()];
        let mut h = vec![vec![0.0; restart]; restart + 1];
        let (mut cs, mut sn) = (vec![0.0; restart], vec![0.0; restart]);
        let mut g = vec![0.0; restart + 1];
        g[0] = rnorm;
        let mut used = 0;
        for j in 0..restart {
            let mut w = apply(&basis[j])?;
            for (i, v) in basis.iter().enumerate() {
                h[i][j] = dot(&w, v);
                w.iter_mut().zip(v).for_each(|(a, b)| *a -= h[i][j] * b);
            }
            h[j + 1][j] = norm2(&w);
            for i in 0..j {
                let t = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = t;
            }
            let d = h[j][j].hypot(h[j + 1][j]);
            if d == 0.0 {
                break;
            }
            cs[j] = h[j][j] / d;
            sn[j] = h[j + 1][j] / d;
            h[j][j] = d;
            h[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            used = j + 1;
            steps += 1;
            let breakdown = w.iter().all(|v| *v == 0.0) || h[j + 1][j] == 0.0 && norm2(&w) == 0.0;
            if g[j + 1].abs() <= rtol * bnorm || breakdown {
                break;
            }
            let wn = norm2(&w);
            basis.push(w.into_iter().map(|v| v / wn).collect());
        }
        // Back substitution for the least-squares coefficients.
        let mut y = vec![0.0; used];
        for i in (0..used).rev() {
            let mut s = g[i];
            for c in i + 1..used {
                s -= h[i][c] * y[c];
            }
            y[i] = s / h[i][i];
        }
        for (i, yi) in y.iter().enumerate() {
            x.iter_mut().zip(&basis[i]).for_each(|(a, v)| *a += yi * v);
        }
        let ax = apply(&x)?;
        r = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
        rnorm = norm2(&r);
        if rnorm <= rtol * bnorm {
            return Ok((x, steps));
        }
        if rnorm >= 0.99 * start {
            return Err(DgError::GmresStagnation { residual: rnorm / bnorm });
        }
    }
    Ok((x, steps))
}

fn jvp<F: Tangent>(tangent: &F, w: &StateField<f64>, fw: &StateField<f64>, v: &[f64], t: f64, mode: JvpMode) -> Result<Vec<f64>> {
    match mode {
        JvpMode::Autodiff => {
            let wd = StateField::<Dual<f64>> {
                k: w.k,
                np: w.np,
                m: w.m,
                data: w.data.iter().zip(v).map(|(&a, &b)| Dual::new(a, b)).collect(),
                t: w.t,
            };
            Ok(tangent.eval(&wd, t)?.data.into_iter().map(|d| d.eps).collect())
        }
        JvpMode::FiniteDifference => {
            let vn = norm2(v);
            if vn == 0.0 {
                return Ok(vec![0.0; v.len()]);
            }
            let h = f64::EPSILON.sqrt() * (1.0 + norm2(&w.data)) / vn;
            let mut wp = w.clone();
            wp.data.iter_mut().zip(v).for_each(|(a, b)| *a += h * b);
            let fp = tangent.eval(&wp, t)?;
            Ok(fp.data.iter().zip(&fw.data).map(|(a, b)| (a - b) / h).collect())
        }
    }
}

/// Jacobian-vector product `(∂F/∂u)(u) v`.
pub fn tangent_jvp<F: Tangent>(tangent: &F, u: &StateField<f64>, v: &[f64], t: f64, mode: JvpMode) -> Result<Vec<f64>> {
    let fu = tangent.eval(u, t)?;
    jvp(tangent, u, &fu, v, t, mode)
}

/// One backward-Euler step: solves `u* − u − Δt F(u*, t + Δt) = 0` by
/// Newton's method from `u* = u`, with GMRES on `(I − Δt ∂F/∂u) δ = −R`.
/// A step that makes the residual non-finite or nonphysical is halved up to
/// ten times.
pub fn backward_euler_step<F: Tangent>(
    u: &StateField<f64>,
    dt: f64,
    tangent: &F,
    cfg: &ImplicitConfig,
) -> Result<(StateField<f64>, NewtonStats)> {
    let t1 = u.t + dt;
    let residual = |w: &StateField<f64>| -> Result<(StateField<f64>, Vec<f64>)> {
        let fw = tangent.eval(w, t1)?;
        let r = w.data.iter().zip(&u.data).zip(&fw.data).map(|((a, b), f)| a - b - dt * f).collect();
        Ok((fw, r))
    };
    let mut w = u.clone();
    w.t = t1;
    let (mut fw, mut r) = residual(&w)?;
    let mut stats = NewtonStats { residual: norm_inf(&r), ..Default::default() };
    while stats.residual > cfg.newton_tol {
        if stats.iterations >= cfg.max_newton {
            return Err(DgError::NewtonDiverged { iterations: stats.iterations, residual: stats.residual });
        }
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let (delta, steps) = {
            let (wr, fr) = (&w, &fw);
            let mut apply = |v: &[f64]| -> Result<Vec<f64>> {
                let jv = jvp(tangent, wr, fr, v, t1, cfg.jvp)?;
                Ok(v.iter().zip(&jv).map(|(a, b)| a - dt * b).collect())
            };
            gmres(&mut apply, &rhs, cfg.gmres_rtol, cfg.restart, cfg.max_restarts)?
        };
        stats.gmres_iterations += steps;
        stats.iterations += 1;
        let mut lambda = 1.0;
        loop {
            let mut trial = w.clone();
            trial.data.iter_mut().zip(&delta).for_each(|(a, d)| *a += lambda * d);
            match residual(&trial) {
                Ok((ft, rt)) if rt.iter().all(|v| v.is_finite()) => {
                    w = trial;
                    fw = ft;
                    r = rt;
                    break;
                }
                _ if lambda > 1e-3 => lambda *= 0.5,
                Ok(_) => return Err(DgError::NonFinite("Newton residual".into())),
                Err(e) => return Err(e),
            }
        }
        stats.residual = norm_inf(&r);
    }
    Ok((w, stats))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    SspRk2,
    BackwardEuler,
}

impl std::str::FromStr for Scheme {
    type Err = DgError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ssp-rk2" => Ok(Self::SspRk2),
            "backward-euler" => Ok(Self::BackwardEuler),
            _ => Err(DgError::Config(format!("unknown time scheme '{s}'"))),
        }
    }
}

/// Advances `n_steps` fixed steps, handing `u₀` and every accepted state to
/// `sink`. The limiter follows each implicit step.
#[allow(clippy::too_many_arguments)]
pub fn integrate<F: Tangent>(
    u0: &StateField<f64>,
    dt: f64,
    n_steps: usize,
    scheme: Scheme,
    tangent: &F,
    limiter: &Limiter,
    implicit: &ImplicitConfig,
    sink: &mut dyn FnMut(&StateField<f64>) -> Result<()>,
) -> Result<StateField<f64>> {
    if !(dt > 0.0) {
        return Err(DgError::Config(format!("time step must be positive (got {dt})")));
    }
    sink(u0)?;
    let mut u = u0.clone();
    for step in 1..=n_steps {
        let wrap = |e: DgError| DgError::Step { step, source: Box::new(e) };
        u = match scheme {
            Scheme::SspRk2 => ssp_rk2_step(&u, dt, tangent, limiter).map_err(wrap)?.u2,
            Scheme::BackwardEuler => {
                let (w, _) = backward_euler_step(&u, dt, tangent, implicit).map_err(wrap)?;
                finite_or(limiter.apply(&w), "implicit step").map_err(wrap)?
            }
        };
        // Accumulating t step by step drifts; recompute from the step index.
        u.t = u0.t + step as f64 * dt;
        sink(&u)?;
    }
    Ok(u)
}
