//! Snapshot datasets, data randomization, the naive and model-constrained
//! losses with exact reverse-mode gradients, ADAM and the training loop.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::relative_l2;
use crate::dg::{Discretization, QuadratureMode, StateField};
use crate::error::{DgError, Result};
use crate::limiter::Limiter;
use crate::physics::{BoundaryConfig, FluxModel, FluxScheme};
use crate::surrogate::{dgnet_tangent, dgnet_vjp, DgNetTangent, SurrogateMode, SurrogateParams};
use crate::time::{integrate, rk2_stage1, rk2_stage2, ssp_rk2_step, DgTangent, ImplicitConfig, Scheme};

/// How a dataset was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub problem: String,
    pub gamma: f64,
    pub elements: usize,
    pub order: usize,
    pub dt: f64,
    pub flux: FluxScheme,
    pub quadrature: QuadratureMode,
}

/// SSP-RK2 trajectory with the first stage of every step. The second stage
/// of step `i` is snapshot `i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotDataset {
    pub meta: DatasetMeta,
    pub snapshots: Vec<StateField<f64>>,
    pub stage1: Vec<StateField<f64>>,
}

impl SnapshotDataset {
    /// Number of steps (snapshots minus one).
    pub fn steps(&self) -> usize {
        self.stage1.len()
    }

    pub fn dt(&self) -> f64 {
        self.meta.dt
    }
}

/// Everything the DG branch needs.
#[derive(Clone, Copy)]
pub struct TrainingSetup<'a> {
    pub disc: &'a Discretization,
    pub model: FluxModel,
    pub bcs: &'a BoundaryConfig,
    pub limiter: &'a Limiter,
}

impl<'a> TrainingSetup<'a> {
    pub fn dg(&self) -> DgTangent<'a> {
        DgTangent { disc: self.disc, model: self.model, bcs: self.bcs }
    }

    pub fn surrogate(&self, params: &'a SurrogateParams, mode: SurrogateMode) -> DgNetTangent<'a> {
        DgNetTangent { disc: self.disc, physics: self.model.physics, bcs: self.bcs, params, mode }
    }
}

/// Runs `n_steps` SSP-RK2 steps of the DG solver from `u0`, keeping stages.
pub fn generate_dataset(
    setup: &TrainingSetup,
    u0: &StateField<f64>,
    dt: f64,
    n_steps: usize,
    meta: DatasetMeta,
) -> Result<SnapshotDataset> {
    let tangent = setup.dg();
    let mut snapshots = Vec::with_capacity(n_steps + 1);
    let mut stage1 = Vec::with_capacity(n_steps);
    snapshots.push(u0.clone());
    for step in 1..=n_steps {
        let rec = ssp_rk2_step(snapshots.last().expect("nonempty"), dt, &tangent, setup.limiter)
            .map_err(|e| DgError::Step { step, source: Box::new(e) })?;
        let mut u2 = rec.u2;
        u2.t = u0.t + step as f64 * dt;
        stage1.push(rec.u1);
        snapshots.push(u2);
    }
    Ok(SnapshotDataset { meta, snapshots, stage1 })
}

/// `v = u + η ⊙ u` with `η ~ N(0, δ² I)` drawn fresh.
pub fn randomize<R: Rng + ?Sized>(u: &StateField<f64>, delta: f64, rng: &mut R) -> StateField<f64> {
    if delta == 0.0 {
        return u.clone();
    }
    let normal = Normal::new(0.0, delta).expect("finite noise level");
    let mut v = u.clone();
    for x in &mut v.data {
        let eta: f64 = normal.sample(rng);
        *x += eta * *x;
    }
    v
}

/// Clips the first (density) component into `[lo, hi]`.
pub fn clamp_density(u: &StateField<f64>, lo: f64, hi: f64) -> StateField<f64> {
    let mut out = u.clone();
    for k in 0..u.k {
        let base = out.idx(k, 0, 0);
        for x in &mut out.data[base..base + u.np] {
            *x = x.clamp(lo, hi);
        }
    }
    out
}

/// Transpose of the clamp derivative at `s`: passes `g` where the density
/// was inside the bounds.
fn clamp_vjp(s: &StateField<f64>, g: &StateField<f64>, lo: f64, hi: f64) -> StateField<f64> {
    let mut out = g.clone();
    for k in 0..s.k {
        let base = s.idx(k, 0, 0);
        for l in base..base + s.np {
            if !(lo..=hi).contains(&s.data[l]) {
                out.data[l] = 0.0;
            }
        }
    }
    out
}

/// Loss options shared by both losses.
#[derive(Debug, Clone, PartialEq)]
pub struct LossConfig {
    /// Conservative components entering the L² norms.
    pub components: Vec<usize>,
    /// Density bounds applied to surrogate stages (`None` disables).
    pub rho_clamp: Option<(f64, f64)>,
    /// Multiplies every squared norm.
    pub scale: f64,
}

/// One training sample: the surrogate starts from `v` and is compared
/// against target stages `t1`, `t2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub v: StateField<f64>,
    pub t1: StateField<f64>,
    pub t2: StateField<f64>,
}

/// Clean snapshot `i` with its stored stages.
pub fn naive_sample(ds: &SnapshotDataset, i: usize) -> Sample {
    Sample { v: ds.snapshots[i].clone(), t1: ds.stage1[i].clone(), t2: ds.snapshots[i + 1].clone() }
}

/// Randomized snapshot with DG stages recomputed from it. Draws up to
/// `1 + resamples` noise realizations until the DG branch succeeds; `None`
/// when all fail.
pub fn mc_sample<R: Rng + ?Sized>(
    setup: &TrainingSetup,
    u: &StateField<f64>,
    dt: f64,
    delta: f64,
    resamples: usize,
    rng: &mut R,
) -> Option<Sample> {
    let tangent = setup.dg();
    for _ in 0..=resamples {
        let v = randomize(u, delta, rng);
        if let Ok(rec) = ssp_rk2_step(&v, dt, &tangent, setup.limiter) {
            return Some(Sample { v, t1: rec.u1, t2: rec.u2 });
        }
    }
    None
}

struct Stages {
    z1: StateField<f64>,
    s1: StateField<f64>,
    u1: StateField<f64>,
    z2: StateField<f64>,
    s2: StateField<f64>,
    u2: StateField<f64>,
}

fn surrogate_stages(
    setup: &TrainingSetup,
    params: &SurrogateParams,
    mode: SurrogateMode,
    v: &StateField<f64>,
    dt: f64,
    cfg: &LossConfig,
) -> Result<Stages> {
    let phys = setup.model.physics;
    let clamp = |s: &StateField<f64>| match (cfg.rho_clamp, phys.gamma()) {
        (Some((lo, hi)), Some(_)) => clamp_density(s, lo, hi),
        _ => s.clone(),
    };
    let f0 = dgnet_tangent(setup.disc, v, params, phys, setup.bcs, mode, v.t)?;
    let z1 = rk2_stage1(v, &f0, dt);
    let s1 = setup.limiter.apply(&z1);
    let u1 = clamp(&s1);
    let f1 = dgnet_tangent(setup.disc, &u1, params, phys, setup.bcs, mode, u1.t)?;
    let z2 = rk2_stage2(v, &u1, &f1, dt);
    let s2 = setup.limiter.apply(&z2);
    let u2 = clamp(&s2);
    Ok(Stages { z1, s1, u1, z2, s2, u2 })
}

fn masked_sq(disc: &Discretization, e: &StateField<f64>, cfg: &LossConfig) -> f64 {
    cfg.components.iter().map(|&q| disc.l2_sq(e, q)).sum::<f64>() * cfg.scale
}

/// `2 scale M e`, zero outside the loss components.
fn masked_grad(disc: &Discretization, e: &StateField<f64>, cfg: &LossConfig) -> StateField<f64> {
    let me = disc.mass_apply(e);
    let mut out = StateField::zeros_like(e);
    for k in 0..e.k {
        for &q in &cfg.components {
            let base = e.idx(k, q, 0);
            for l in base..base + e.np {
                out.data[l] = 2.0 * cfg.scale * me.data[l];
            }
        }
    }
    out
}

fn diff(a: &StateField<f64>, b: &StateField<f64>) -> StateField<f64> {
    StateField::lincomb(1.0, a, -1.0, b)
}

/// `scale Σ_q (‖ũ¹ − t¹‖² + ‖ũ² − t²‖²)` over the loss components.
pub fn sample_loss(
    setup: &TrainingSetup,
    params: &SurrogateParams,
    mode: SurrogateMode,
    sample: &Sample,
    dt: f64,
    cfg: &LossConfig,
) -> Result<f64> {
    let st = surrogate_stages(setup, params, mode, &sample.v, dt, cfg)?;
    Ok(masked_sq(setup.disc, &diff(&st.u1, &sample.t1), cfg) + masked_sq(setup.disc, &diff(&st.u2, &sample.t2), cfg))
}

/// [`sample_loss`] of the learned surrogate and its gradient in the
/// flattened parameters.
pub fn sample_loss_grad(
    setup: &TrainingSetup,
    params: &SurrogateParams,
    sample: &Sample,
    dt: f64,
    cfg: &LossConfig,
) -> Result<(f64, Vec<f64>)> {
    let disc = setup.disc;
    let phys = setup.model.physics;
    let st = surrogate_stages(setup, params, SurrogateMode::Learned, &sample.v, dt, cfg)?;
    let (e1, e2) = (diff(&st.u1, &sample.t1), diff(&st.u2, &sample.t2));
    let loss = masked_sq(disc, &e1, cfg) + masked_sq(disc, &e2, cfg);
    let clamp_t = |s: &StateField<f64>, g: &StateField<f64>| match (cfg.rho_clamp, phys.gamma()) {
        (Some((lo, hi)), Some(_)) => clamp_vjp(s, g, lo, hi),
        _ => g.clone(),
    };

    let gu2 = masked_grad(disc, &e2, cfg);
    let gz2 = setup.limiter.vjp(&st.z2, &clamp_t(&st.s2, &gu2));
    let w2 = StateField::lincomb(0.5 * dt, &gz2, 0.0, &gz2);
    let (gu1_psi, mut gtheta) = dgnet_vjp(disc, &st.u1, &w2, params, phys, setup.bcs, st.u1.t)?;
    let mut gu1 = masked_grad(disc, &e1, cfg);
    gu1.axpy(0.5, &gz2);
    gu1.axpy(1.0, &gu1_psi);
    let gz1 = setup.limiter.vjp(&st.z1, &clamp_t(&st.s1, &gu1));
    let w1 = StateField::lincomb(dt, &gz1, 0.0, &gz1);
    let (_, g0) = dgnet_vjp(disc, &sample.v, &w1, params, phys, setup.bcs, sample.v.t)?;
    gtheta.iter_mut().zip(&g0).for_each(|(a, b)| *a += b);
    Ok((loss, gtheta))
}

fn sum_samples(
    setup: &TrainingSetup,
    params: &SurrogateParams,
    samples: &[Sample],
    dt: f64,
    cfg: &LossConfig,
) -> Result<(f64, Vec<f64>)> {
    if samples.is_empty() {
        return Err(DgError::EmptyWindow);
    }
    let parts: Vec<Result<(f64, Vec<f64>)>> =
        samples.par_iter().map(|s| sample_loss_grad(setup, params, s, dt, cfg)).collect();
    let mut loss = 0.0;
    let mut grad = vec![0.0; params.num_params()];
    for p in parts {
        let (l, g) = p?;
        loss += l;
        grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
    }
    Ok((loss, grad))
}

/// Naive loss over snapshots `window` of `ds` and its gradient.
pub fn loss_naive(
    setup: &TrainingSetup,
    params: &SurrogateParams,
    ds: &SnapshotDataset,
    window: std::ops::Range<usize>,
    cfg: &LossConfig,
) -> Result<(f64, Vec<f64>)> {
    if window.end > ds.steps() {
        return Err(DgError::Shape(format!("window ends at {} but dataset has {} steps", window.end, ds.steps())));
    }
    let samples: Vec<Sample> = window.map(|i| naive_sample(ds, i)).collect();
    sum_samples(setup, params, &samples, ds.dt(), cfg)
}

/// Model-constrained loss: `α` times the sum over `window` of fresh
/// randomized samples, and its gradient. Snapshots whose DG branch fails on
/// every resample are skipped; their count is returned last.
#[allow(clippy::too_many_arguments)]
pub fn loss_mc<R: Rng + ?Sized>(
    setup: &TrainingSetup,
    params: &SurrogateParams,
    ds: &SnapshotDataset,
    window: std::ops::Range<usize>,
    delta: f64,
    alpha: f64,
    resamples: usize,
    rng: &mut R,
    cfg: &LossConfig,
) -> Result<(f64, Vec<f64>, usize)> {
    if window.end > ds.snapshots.len() {
        return Err(DgError::Shape("window exceeds dataset".into()));
    }
    let mut samples = Vec::new();
    let mut skipped = 0;
    for i in window {
        match mc_sample(setup, &ds.snapshots[i], ds.dt(), delta, resamples, rng) {
            Some(s) => samples.push(s),
            None => skipped += 1,
        }
    }
    let (l, mut g) = sum_samples(setup, params, &samples, ds.dt(), cfg)?;
    g.iter_mut().for_each(|x| *x *= alpha);
    Ok((alpha * l, g, skipped))
}

/// ADAM with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, m: vec![0.0; n], v: vec![0.0; n], step: 0 }
    }

    pub fn update(&mut self, theta: &mut [f64], g: &[f64]) -> Result<()> {
        if theta.len() != self.m.len() || g.len() != self.m.len() {
            return Err(DgError::Shape("optimizer state does not match parameters".into()));
        }
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step as i32);
        let c2 = 1.0 - self.beta2.powi(self.step as i32);
        for i in 0..theta.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g[i] * g[i];
            theta[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + self.eps);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainMode {
    Naive,
    ModelConstrained,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub mode: TrainMode,
    /// Noise level `δ` of the randomization.
    pub delta: f64,
    /// Weight of the model-constrained term.
    pub alpha: f64,
    /// Weight of the naive term in model-constrained mode.
    pub data_weight: f64,
    /// Snapshots per epoch.
    pub window: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Validate every this many epochs.
    pub cadence: usize,
    pub rho_clamp: [f64; 2],
    pub seed: u64,
    /// Standard deviation of the initial weights.
    pub init_std: f64,
    pub vol_enabled: bool,
    /// Components in the loss and the validation error.
    pub components: Vec<usize>,
    /// Noise redraws after a DG-branch failure before skipping a snapshot.
    pub max_resamples: usize,
    /// Divide squared stage errors by `Δt²`.
    pub normalize_by_dt: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            mode: TrainMode::ModelConstrained,
            delta: 0.005,
            alpha: 1.0,
            data_weight: 0.0,
            window: 15,
            learning_rate: 1e-3,
            epochs: 5000,
            cadence: 10,
            rho_clamp: [0.1, 50.0],
            seed: 0,
            init_std: 0.1,
            vol_enabled: false,
            components: vec![0, 1, 2],
            max_resamples: 3,
            normalize_by_dt: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, nvars: usize) -> Result<()> {
        let fail = |m: String| Err(DgError::Config(m));
        if !(self.delta >= 0.0) {
            return fail(format!("delta must be nonnegative (got {})", self.delta));
        }
        if self.window == 0 || self.cadence == 0 {
            return fail("window and cadence must be at least 1".into());
        }
        if !(self.learning_rate > 0.0) || !(self.init_std > 0.0) {
            return fail("learning rate and init_std must be positive".into());
        }
        if !(self.rho_clamp[0] < self.rho_clamp[1]) {
            return fail("rho_clamp needs low < high".into());
        }
        if self.components.is_empty() || self.components.iter().any(|&q| q >= nvars) {
            return fail(format!("components must be nonempty indices below {nvars}"));
        }
        Ok(())
    }

    pub fn loss_config(&self, dt: f64) -> LossConfig {
        LossConfig {
            components: self.components.clone(),
            rho_clamp: Some((self.rho_clamp[0], self.rho_clamp[1])),
            scale: if self.normalize_by_dt { 1.0 / (dt * dt) } else { 1.0 },
        }
    }
}

/// Reference trajectory for model selection.
#[derive(Debug, Clone)]
pub struct Validation {
    pub snapshots: Vec<StateField<f64>>,
    pub dt: f64,
}

/// Surrogate trajectory of `n_steps` SSP-RK2 steps from `u0` (inclusive).
pub fn rollout(
    setup: &TrainingSetup,
    params: &SurrogateParams,
    u0: &StateField<f64>,
    dt: f64,
    n_steps: usize,
) -> Result<Vec<StateField<f64>>> {
    let tangent = setup.surrogate(params, SurrogateMode::Learned);
    let mut out = Vec::with_capacity(n_steps + 1);
    integrate(u0, dt, n_steps, Scheme::SspRk2, &tangent, setup.limiter, &ImplicitConfig::default(), &mut |u| {
        out.push(u.clone());
        Ok(())
    })?;
    Ok(out)
}

/// Mean over steps `1..` of the component-averaged relative L² error of a
/// surrogate rollout; `+∞` when the rollout fails.
pub fn validation_error(
    setup: &TrainingSetup,
    params: &SurrogateParams,
    validation: &Validation,
    components: &[usize],
) -> f64 {
    let steps = validation.snapshots.len().saturating_sub(1);
    let run = || -> Result<f64> {
        let pred = rollout(setup, params, &validation.snapshots[0], validation.dt, steps)?;
        let s = relative_l2(setup.disc, &pred[1..], &validation.snapshots[1..], components)?;
        Ok(s.mean())
    };
    match run() {
        Ok(e) if e.is_finite() => e,
        _ => f64::INFINITY,
    }
}

/// Keeps the parameters with the smallest validation error (first wins ties).
#[derive(Debug, Clone, Default)]
pub struct BestTracker {
    pub epoch: usize,
    pub error: Option<f64>,
    pub theta: Vec<f64>,
}

impl BestTracker {
    pub fn offer(&mut self, epoch: usize, error: f64, theta: &[f64]) -> bool {
        if self.error.is_none_or(|e| error < e) {
            self.epoch = epoch;
            self.error = Some(error);
            self.theta = theta.to_vec();
            true
        } else {
            false
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Training loss of the epoch (`None` for the initial validation).
    pub loss: Option<f64>,
    pub validation: Option<f64>,
    /// Best validation error so far (non-increasing).
    pub best: Option<f64>,
    pub skipped: usize,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub best: SurrogateParams,
    pub best_epoch: usize,
    pub best_error: f64,
    pub last: SurrogateParams,
    pub history: Vec<EpochRecord>,
}

/// Trains a surrogate from `N(0, init_std²)` weights. Each epoch draws one
/// training set and a uniformly placed window of `cfg.window` consecutive
/// snapshots, takes one ADAM step on the configured loss, and every
/// `cfg.cadence` epochs validates. Epoch 0 validates the initial weights.
pub fn train(
    setup: &TrainingSetup,
    cfg: &TrainConfig,
    datasets: &[SnapshotDataset],
    validation: &Validation,
    progress: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    cfg.validate(setup.model.physics.nvars())?;
    if datasets.is_empty() || datasets.iter().any(|d| d.steps() == 0) {
        return Err(DgError::EmptyWindow);
    }
    let mut params = SurrogateParams::random(
        setup.disc.dim(),
        setup.disc.basis.np,
        cfg.vol_enabled,
        cfg.init_std,
        cfg.seed,
    );
    let mut theta = params.to_vec();
    let mut adam = Adam::new(theta.len(), cfg.learning_rate);
    let mut best = BestTracker::default();
    let mut history = Vec::with_capacity(cfg.epochs + 1);

    let e0 = validation_error(setup, &params, validation, &cfg.components);
    best.offer(0, e0, &theta);
    let rec = EpochRecord { epoch: 0, loss: None, validation: Some(e0), best: best.error, skipped: 0 };
    progress(&rec);
    history.push(rec);

    for epoch in 1..=cfg.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(epoch as u64);
        let ds = &datasets[rng.random_range(0..datasets.len())];
        let len = cfg.window.min(ds.steps());
        let start = rng.random_range(0..=ds.steps() - len);
        let window = start..start + len;
        let lcfg = cfg.loss_config(ds.dt());

        let (loss, grad, skipped) = match cfg.mode {
            TrainMode::Naive => {
                let (l, g) = loss_naive(setup, &params, ds, window, &lcfg)?;
                (l, g, 0)
            }
            TrainMode::ModelConstrained => {
                let (mut l, mut g, skipped) =
                    loss_mc(setup, &params, ds, window.clone(), cfg.delta, cfg.alpha, cfg.max_resamples, &mut rng, &lcfg)?;
                if cfg.data_weight != 0.0 {
                    let (ln, gn) = loss_naive(setup, &params, ds, window, &lcfg)?;
                    l += cfg.data_weight * ln;
                    g.iter_mut().zip(&gn).for_each(|(a, b)| *a += cfg.data_weight * b);
                }
                (l, g, skipped)
            }
        };
        if let Some((name, _)) = params.blocks().into_iter().find(|(_, r)| grad[r.clone()].iter().any(|v| !v.is_finite())) {
            return Err(DgError::NonFinite(format!("gradient block {name} at epoch {epoch}")));
        }
        adam.update(&mut theta, &grad)?;
        params.set_from(&theta)?;

        let validation_now = (epoch % cfg.cadence == 0 || epoch == cfg.epochs)
            .then(|| validation_error(setup, &params, validation, &cfg.components));
        if let Some(e) = validation_now {
            best.offer(epoch, e, &theta);
        }
        let rec = EpochRecord { epoch, loss: Some(loss), validation: validation_now, best: best.error, skipped };
        progress(&rec);
        history.push(rec);
    }

    let mut best_params = params.clone();
    best_params.set_from(&best.theta)?;
    Ok(TrainOutcome {
        best: best_params,
        best_epoch: best.epoch,
        best_error: best.error.unwrap_or(f64::INFINITY),
        last: params,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::uniform_1d;
    use crate::physics::{BoundaryKind, Physics, Problem};
    use rand_distr::StandardNormal;

    struct Fixture {
        disc: Discretization,
        bcs: BoundaryConfig,
        limiter: Limiter,
        model: FluxModel,
    }

    impl Fixture {
        fn new(k: usize, mode: QuadratureMode, limit: bool) -> Self {
            let phys = Physics::euler(1, 1.4);
            let bcs = BoundaryConfig::uniform(&["left".into(), "right".into()], BoundaryKind::Outflow);
            let disc = Discretization::new(uniform_1d(0.0, 1.0, k).unwrap(), 1, mode, &[]).unwrap();
            let limiter = Limiter::for_problem(&disc, limit).unwrap();
            Self { disc, bcs, limiter, model: FluxModel::new(phys, FluxScheme::LaxFriedrichs) }
        }

        fn setup(&self) -> TrainingSetup<'_> {
            TrainingSetup { disc: &self.disc, model: self.model, bcs: &self.bcs, limiter: &self.limiter }
        }

        fn dataset(&self, problem: &str, dt: f64, steps: usize) -> SnapshotDataset {
            let p = Problem::from_id(problem).unwrap();
            let u0 = self.disc.interpolate(3, |x| p.initial_state(&self.model.physics, x));
            let meta = DatasetMeta {
                problem: problem.into(),
                gamma: 1.4,
                elements: self.disc.num_elements(),
                order: 1,
                dt,
                flux: FluxScheme::LaxFriedrichs,
                quadrature: self.disc.ops.mode,
            };
            generate_dataset(&self.setup(), &u0, dt, steps, meta).unwrap()
        }
    }

    fn plain(components: Vec<usize>) -> LossConfig {
        LossConfig { components, rho_clamp: Some((0.1, 50.0)), scale: 1.0 }
    }

    #[test]
    fn dataset_shapes_and_stage_replay() {
        let f = Fixture::new(20, QuadratureMode::OverIntegration, true);
        let ds = f.dataset("sod", 1e-3, 15);
        assert_eq!(ds.snapshots.len(), 16);
        assert_eq!(ds.steps(), 15);
        let rec = ssp_rk2_step(&ds.snapshots[4], 1e-3, &f.setup().dg(), &f.limiter).unwrap();
        assert_eq!(rec.u1.data, ds.stage1[4].data);
        assert_eq!(rec.u2.data, ds.snapshots[5].data);
        assert!((ds.snapshots[15].t - 0.015).abs() < 1e-15);
    }

    #[test]
    fn datasets_differ_by_gamma() {
        let a = Fixture::new(10, QuadratureMode::OverIntegration, true);
        let mut b = Fixture::new(10, QuadratureMode::OverIntegration, true);
        b.model = FluxModel::new(Physics::euler(1, 1.6), FluxScheme::LaxFriedrichs);
        let (da, db) = (a.dataset("sod", 1e-3, 3), b.dataset("sod", 1e-3, 3));
        assert_eq!(da.snapshots.len(), db.snapshots.len());
        assert_ne!(da.snapshots[3].data, db.snapshots[3].data);
    }

    #[test]
    fn randomize_examples() {
        let mut u = StateField::from_data(1, 3, 1, vec![1.0, 0.0, -2.0], 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(randomize(&u, 0.0, &mut rng).data, u.data);
        let v = randomize(&u, 0.1, &mut rng);
        assert_eq!(v.data[1], 0.0);
        assert_ne!(v.data[0], 1.0);

        // Empirical standard deviation of (v − u)/u is δ within 3 standard errors.
        u.data = vec![1.5];
        u.np = 1;
        let delta = 0.02;
        let n = 100_000;
        let rel: Vec<f64> = (0..n).map(|_| (randomize(&u, delta, &mut rng).data[0] - 1.5) / 1.5).collect();
        let mean = rel.iter().sum::<f64>() / n as f64;
        let sd = (rel.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        let se = delta / (2.0 * (n as f64 - 1.0)).sqrt();
        assert!((sd - delta).abs() <= 3.0 * se, "{sd}");
    }

    #[test]
    fn clamp_examples() {
        let u = StateField::from_data(1, 3, 2, vec![0.05, 60.0, 1.0, -7.0, 70.0, 0.01], 0.0).unwrap();
        let c = clamp_density(&u, 0.1, 50.0);
        assert_eq!(c.data, vec![0.1, 50.0, 1.0, -7.0, 70.0, 0.01]);
    }

    #[test]
    fn oracle_reproduces_collocation_stages() {
        let f = Fixture::new(12, QuadratureMode::Collocation, true);
        let ds = f.dataset("sod", 1e-3, 6);
        let params = SurrogateParams::zeros(1, 2, 4, false);
        for i in 0..ds.steps() {
            let l = sample_loss(&f.setup(), &params, SurrogateMode::FluxOracle, &naive_sample(&ds, i), 1e-3, &plain(vec![0, 1, 2])).unwrap();
            assert!(l <= 1e-20, "{l}");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = mc_sample(&f.setup(), &ds.snapshots[2], 1e-3, 0.0, 0, &mut rng).unwrap();
        let l = sample_loss(&f.setup(), &params, SurrogateMode::FluxOracle, &s, 1e-3, &plain(vec![0, 1, 2])).unwrap();
        assert!(l <= 1e-20);
    }

    #[test]
    fn loss_equals_mass_weighted_discrepancy() {
        let f = Fixture::new(6, QuadratureMode::Collocation, false);
        let ds = f.dataset("sod", 1e-3, 2);
        let params = SurrogateParams::zeros(1, 2, 4, false);
        let mut s = naive_sample(&ds, 0);
        let mut e = StateField::zeros_like(&s.t1);
        for (i, x) in e.data.iter_mut().enumerate() {
            *x = 1e-3 * ((i * 7 % 5) as f64 - 2.0);
        }
        s.t1.axpy(-1.0, &e);
        let l = sample_loss(&f.setup(), &params, SurrogateMode::FluxOracle, &s, 1e-3, &plain(vec![0, 1, 2])).unwrap();
        // Independent eᵀMe with the linear-element mass (h/6)[[2,1],[1,2]].
        let h = 1.0 / 6.0;
        let mut expect = 0.0;
        for k in 0..e.k {
            for q in 0..3 {
                let v = e.var(k, q);
                expect += h / 6.0 * (2.0 * v[0] * v[0] + 2.0 * v[0] * v[1] + 2.0 * v[1] * v[1]);
            }
        }
        assert!((l - expect).abs() <= 1e-12 * expect, "{l} vs {expect}");
    }

    #[test]
    fn mc_with_zero_noise_matches_naive() {
        let f = Fixture::new(10, QuadratureMode::OverIntegration, true);
        let ds = f.dataset("sod", 1e-3, 5);
        let params = SurrogateParams::random(1, 2, false, 0.1, 3);
        let cfg = plain(vec![0, 1, 2]);
        let (ln, gn) = loss_naive(&f.setup(), &params, &ds, 1..4, &cfg).unwrap();
        let (lm, gm, skipped) =
            loss_mc(&f.setup(), &params, &ds, 1..4, 0.0, 1.0, 3, &mut ChaCha8Rng::seed_from_u64(0), &cfg).unwrap();
        assert_eq!(skipped, 0);
        assert!((ln - lm).abs() <= 1e-12 * ln.max(1e-300), "{ln} vs {lm}");
        for (a, b) in gn.iter().zip(&gm) {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
        assert!(matches!(loss_naive(&f.setup(), &params, &ds, 2..2, &cfg), Err(DgError::EmptyWindow)));
    }

    fn fd_check(f: &Fixture, samples: &[Sample], dt: f64, seed: u64) {
        let params = SurrogateParams::random(1, 2, false, 0.1, seed);
        let cfg = LossConfig { components: vec![0, 1, 2], rho_clamp: Some((0.1, 50.0)), scale: 1.0 / (dt * dt) };
        let setup = f.setup();
        let (_, g) = sum_samples(&setup, &params, samples, dt, &cfg).unwrap();
        let theta = params.to_vec();
        let eval = |th: &[f64]| {
            let mut p = params.clone();
            p.set_from(th).unwrap();
            samples.iter().map(|s| sample_loss(&setup, &p, SurrogateMode::Learned, s, dt, &cfg).unwrap()).sum::<f64>()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
        for _ in 0..20 {
            let dir: Vec<f64> = (0..theta.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
            let h = 1e-5;
            let at = |s: f64| theta.iter().zip(&dir).map(|(a, b)| a + s * b).collect::<Vec<_>>();
            let fd = (eval(&at(h)) - eval(&at(-h))) / (2.0 * h);
            let an: f64 = g.iter().zip(&dir).map(|(a, b)| a * b).sum();
            assert!((fd - an).abs() <= 1e-5 * an.abs(), "fd {fd} vs analytic {an}");
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let f = Fixture::new(10, QuadratureMode::OverIntegration, true);
        let dt = 1e-3;
        let ds = f.dataset("sod", dt, 4);
        let naive: Vec<Sample> = (0..4).map(|i| naive_sample(&ds, i)).collect();
        fd_check(&f, &naive, dt, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mc: Vec<Sample> = (0..4).map(|i| mc_sample(&f.setup(), &ds.snapshots[i], dt, 0.01, 3, &mut rng).unwrap()).collect();
        fd_check(&f, &mc, dt, 2);
    }

    #[test]
    fn gradient_of_a_linear_toy_pipeline() {
        // L(w) = ‖c w‖²_M has gradient 2c² M w.
        let disc = Discretization::new(uniform_1d(0.0, 1.0, 3).unwrap(), 2, QuadratureMode::Collocation, &[]).unwrap();
        let c = 1.7;
        let w = disc.interpolate(2, |x| [x[0].sin(), 1.0 - x[0] * x[0], 0.0, 0.0]);
        let cfg = LossConfig { components: vec![0, 1], rho_clamp: None, scale: c * c };
        let g = masked_grad(&disc, &w, &cfg);
        let mw = disc.mass_apply(&w);
        for (a, b) in g.data.iter().zip(&mw.data) {
            assert!((a - 2.0 * c * c * b).abs() < 1e-14);
        }
        let h = 1e-6;
        for i in 0..w.data.len() {
            let (mut p, mut m) = (w.clone(), w.clone());
            p.data[i] += h;
            m.data[i] -= h;
            let fd = (masked_sq(&disc, &p, &cfg) - masked_sq(&disc, &m, &cfg)) / (2.0 * h);
            assert!((fd - g.data[i]).abs() < 1e-8);
        }
        let frozen = LossConfig { components: vec![0], ..cfg };
        let g = masked_grad(&disc, &w, &frozen);
        assert!((0..w.k).all(|k| w.var(k, 1).iter().zip(g.var(k, 1)).all(|(_, x)| *x == 0.0)));
    }

    #[test]
    fn adam_examples() {
        let mut theta = vec![1.0, -2.0, 3.0];
        let mut opt = Adam::new(3, 1e-3);
        opt.update(&mut theta, &[0.0; 3]).unwrap();
        assert_eq!(theta, vec![1.0, -2.0, 3.0]);
        let mut opt = Adam::new(3, 1e-3);
        opt.update(&mut theta, &[0.5, -4.0, 0.0]).unwrap();
        assert!((theta[0] - (1.0 - 1e-3)).abs() < 1e-10);
        assert!((theta[1] - (-2.0 + 1e-3)).abs() < 1e-10);
        assert_eq!(theta[2], 3.0);
        assert!(opt.update(&mut theta, &[0.0; 2]).is_err());
    }

    #[test]
    fn best_tracker_picks_minimum() {
        let mut best = BestTracker::default();
        for (i, e) in [3.0, 1.0, 2.0].into_iter().enumerate() {
            best.offer(i * 10, e, &[e]);
        }
        assert_eq!((best.epoch, best.error, best.theta.clone()), (10, Some(1.0), vec![1.0]));
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate(3).is_ok());
        let bad = [
            TrainConfig { delta: -0.1, ..Default::default() },
            TrainConfig { window: 0, ..Default::default() },
            TrainConfig { cadence: 0, ..Default::default() },
            TrainConfig { rho_clamp: [5.0, 1.0], ..Default::default() },
            TrainConfig { components: vec![3], ..Default::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate(3).is_err(), "{cfg:?}");
        }
        let parsed: std::result::Result<TrainConfig, _> = serde_json::from_str(r#"{"epoch": 3}"#);
        assert!(parsed.is_err());
    }

    #[test]
    fn training_makes_progress_and_is_deterministic() {
        let f = Fixture::new(20, QuadratureMode::OverIntegration, true);
        let dt = 1e-3;
        let train_sets: Vec<_> = ["sod-family-0", "sod-family-5"].iter().map(|p| f.dataset(p, dt, 40)).collect();
        let validation = Validation { snapshots: f.dataset("sod", dt, 40).snapshots, dt };
        let cfg = TrainConfig { epochs: 60, cadence: 20, window: 8, learning_rate: 3e-3, ..Default::default() };
        let run = || train(&f.setup(), &cfg, &train_sets, &validation, &mut |_| {}).unwrap();
        let a = run();
        let e0 = a.history[0].validation.unwrap();
        assert!(a.best_error < e0, "{} !< {e0}", a.best_error);
        let bests: Vec<f64> = a.history.iter().filter_map(|r| r.best).collect();
        assert!(bests.windows(2).all(|w| w[1] <= w[0]));
        let b = run();
        assert_eq!(a.history, b.history);
        assert_eq!(a.best.to_vec(), b.best.to_vec());
    }
}
