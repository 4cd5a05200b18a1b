//! The DGNet block: a learned replacement of the numerical flux (`Ψ_flux`)
//! and an optional correction of the nodal volume flux (`Ψ_vol`), wrapped in
//! the collocation DG integration.
//!
//! Inputs to both networks are normalized by their largest magnitude (floored
//! at `β`) and outputs are scaled back, so the flux path is positively
//! homogeneous in its inputs. The same two networks serve every equation.

use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dg::{face_states, resolve_boundaries, Discretization, Neighbor, StateField};
use crate::error::{DgError, Result};
use crate::physics::{BoundaryConfig, BoundaryKind, Physics, Vars, MAX_VARS};
use crate::real::{Dual, Real};
use crate::time::Tangent;

pub const HIDDEN: usize = 128;

/// One-hidden-layer tanh perceptron, `W₂ tanh(W₁ x + b₁) + b₂`.
/// Weights are row-major (`W₁` is `hidden × inputs`).
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub inputs: usize,
    pub hidden: usize,
    pub outputs: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl Mlp {
    pub fn zeros(inputs: usize, hidden: usize, outputs: usize) -> Self {
        Self {
            inputs,
            hidden,
            outputs,
            w1: vec![0.0; hidden * inputs],
            b1: vec![0.0; hidden],
            w2: vec![0.0; outputs * hidden],
            b2: vec![0.0; outputs],
        }
    }

    /// Every weight and bias drawn from `N(0, std²)`.
    pub fn random(inputs: usize, hidden: usize, outputs: usize, std: f64, rng: &mut impl Rng) -> Self {
        let normal = Normal::new(0.0, std).expect("finite standard deviation");
        let mut net = Self::zeros(inputs, hidden, outputs);
        let mut theta = vec![0.0; net.num_params()];
        theta.iter_mut().for_each(|v| *v = normal.sample(rng));
        net.read_params(&theta);
        net
    }

    pub fn num_params(&self) -> usize {
        self.hidden * (self.inputs + 1) + self.outputs * (self.hidden + 1)
    }

    /// Appends `[W₁, b₁, W₂, b₂]`.
    pub fn write_params(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(&self.w1);
        out.extend_from_slice(&self.b1);
        out.extend_from_slice(&self.w2);
        out.extend_from_slice(&self.b2);
    }

    /// Reads the layout of [`Self::write_params`]; returns the count consumed.
    pub fn read_params(&mut self, theta: &[f64]) -> usize {
        let mut at = 0;
        for block in [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2] {
            let n = block.len();
            block.copy_from_slice(&theta[at..at + n]);
            at += n;
        }
        at
    }

    pub fn forward<T: Real>(&self, x: &[T], hidden: &mut Vec<T>, out: &mut [T]) {
        debug_assert_eq!(x.len(), self.inputs);
        hidden.clear();
        for h in 0..self.hidden {
            let row = &self.w1[h * self.inputs..(h + 1) * self.inputs];
            let mut z = T::from_f64(self.b1[h]);
            for (&xi, &w) in x.iter().zip(row) {
                z += xi.scale(w);
            }
            hidden.push(z.tanh());
        }
        for (o, y) in out.iter_mut().enumerate() {
            let row = &self.w2[o * self.hidden..(o + 1) * self.hidden];
            let mut acc = T::from_f64(self.b2[o]);
            for (&a, &w) in hidden.iter().zip(row) {
                acc += a.scale(w);
            }
            *y = acc;
        }
    }

    /// Reverse pass at `x` for output cotangent `gout`. Adds into `gx` and
    /// into `gtheta` (laid out as [`Self::write_params`]).
    pub fn backward(&self, x: &[f64], gout: &[f64], hidden: &mut Vec<f64>, gx: &mut [f64], gtheta: &mut [f64]) {
        let (ni, nh) = (self.inputs, self.hidden);
        let mut out = vec![0.0; self.outputs];
        self.forward(x, hidden, &mut out);
        let (gw1, rest) = gtheta.split_at_mut(nh * ni);
        let (gb1, rest) = rest.split_at_mut(nh);
        let (gw2, gb2) = rest.split_at_mut(self.outputs * nh);
        for (o, &g) in gout.iter().enumerate() {
            gb2[o] += g;
            for (h, &a) in hidden.iter().enumerate() {
                gw2[o * nh + h] += g * a;
            }
        }
        for (h, &a) in hidden.iter().enumerate() {
            let ga: f64 = gout.iter().enumerate().map(|(o, g)| self.w2[o * nh + h] * g).sum();
            let gz = ga * (1.0 - a * a);
            gb1[h] += gz;
            for c in 0..ni {
                gw1[h * ni + c] += gz * x[c];
                gx[c] += self.w1[h * ni + c] * gz;
            }
        }
    }
}

/// Divides `v` by `max(|v_i|, β)`. Returns the scale and the index of the
/// maximizing entry (`None` when the floor is active). Ties go to the first.
pub fn normalize<T: Real>(v: &[T], out: &mut [T]) -> (T, Option<usize>) {
    let mut best = T::BETA;
    let mut idx = None;
    for (i, x) in v.iter().enumerate() {
        let a = x.value().abs();
        if a > best {
            best = a;
            idx = Some(i);
        }
    }
    let scale = idx.map_or(T::from_f64(T::BETA), |i| v[i].abs());
    for (o, &x) in out.iter_mut().zip(v) {
        *o = x / scale;
    }
    (scale, idx)
}

/// Raw face inputs of equation `q`: directional averages `n_i {{f_i}}` for
/// `i < d`, then the jump `u⁻ − u⁺`.
#[inline]
pub fn face_inputs<T: Real>(fm: &[Vars<T>; 2], fp: &[Vars<T>; 2], um: &[T], up: &[T], n: [f64; 2], dim: usize, q: usize) -> [T; 3] {
    let mut z = [T::zero(); 3];
    for i in 0..dim {
        z[i] = (fm[i][q] + fp[i][q]).scale(0.5 * n[i]);
    }
    z[dim] = um[q] - up[q];
    z
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurrogateMode {
    Learned,
    /// Exact Lax–Friedrichs flux routed through the normalization, identity volume path.
    FluxOracle,
}

/// Network weights of one DGNet block.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateParams {
    pub dim: usize,
    pub np: usize,
    pub flux: Mlp,
    pub vol: Option<Mlp>,
}

impl SurrogateParams {
    pub fn zeros(dim: usize, np: usize, hidden: usize, vol_enabled: bool) -> Self {
        Self { dim, np, flux: Mlp::zeros(dim + 1, hidden, 1), vol: vol_enabled.then(|| Mlp::zeros(np, hidden, np)) }
    }

    pub fn random(dim: usize, np: usize, vol_enabled: bool, std: f64, seed: u64) -> Self {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let flux = Mlp::random(dim + 1, HIDDEN, 1, std, &mut rng);
        let vol = vol_enabled.then(|| Mlp::random(np, HIDDEN, np, std, &mut rng));
        Self { dim, np, flux, vol }
    }

    pub fn num_params(&self) -> usize {
        self.flux.num_params() + self.vol.as_ref().map_or(0, Mlp::num_params)
    }

    /// Flattened parameters: flux network, then volume network.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        self.flux.write_params(&mut out);
        if let Some(v) = &self.vol {
            v.write_params(&mut out);
        }
        out
    }

    pub fn set_from(&mut self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.num_params() {
            return Err(DgError::Shape(format!("expected {} parameters, got {}", self.num_params(), theta.len())));
        }
        let at = self.flux.read_params(theta);
        if let Some(v) = &mut self.vol {
            v.read_params(&theta[at..]);
        }
        Ok(())
    }

    /// Names and ranges of the parameter blocks in [`Self::to_vec`] order.
    pub fn blocks(&self) -> Vec<(String, std::ops::Range<usize>)> {
        let mut out = Vec::new();
        let mut at = 0;
        for (name, net) in [("flux", Some(&self.flux)), ("vol", self.vol.as_ref())] {
            let Some(net) = net else { continue };
            for (part, len) in [("w1", net.w1.len()), ("b1", net.b1.len()), ("w2", net.w2.len()), ("b2", net.b2.len())] {
                out.push((format!("{name}.{part}"), at..at + len));
                at += len;
            }
        }
        out
    }

    pub fn check(&self, disc: &Discretization) -> Result<()> {
        if self.dim != disc.dim() || self.np != disc.basis.np {
            return Err(DgError::Shape(format!(
                "surrogate built for (d={}, Np={}) but discretization has (d={}, Np={})",
                self.dim,
                self.np,
                disc.dim(),
                disc.basis.np
            )));
        }
        let vol_ok = self.vol.as_ref().is_none_or(|v| v.inputs == self.np && v.outputs == self.np);
        if self.flux.inputs != self.dim + 1 || self.flux.outputs != 1 || !vol_ok {
            return Err(DgError::Shape("inconsistent network layer shapes".into()));
        }
        Ok(())
    }

    /// Writes the versioned checkpoint: the magic `DGNETCK1`, a little-endian
    /// `u32` header length, a JSON shape header, then the parameters as
    /// little-endian `f64`.
    pub fn encode(&self) -> Vec<u8> {
        let header = CheckpointHeader {
            version: 1,
            dim: self.dim,
            np: self.np,
            hidden: self.flux.hidden,
            vol: self.vol.is_some(),
            params: self.num_params(),
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::with_capacity(12 + json.len() + 8 * header.params);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        for v in self.to_vec() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| DgError::Format(format!("checkpoint: {m}"));
        let rest = bytes.strip_prefix(CHECKPOINT_MAGIC.as_slice()).ok_or_else(|| bad("bad magic"))?;
        if rest.len() < 4 {
            return Err(bad("truncated header length"));
        }
        let len = u32::from_le_bytes(rest[..4].try_into().expect("4 bytes")) as usize;
        let rest = &rest[4..];
        if len > rest.len() || len > 1 << 16 {
            return Err(bad("header length out of range"));
        }
        let header: CheckpointHeader =
            serde_json::from_slice(&rest[..len]).map_err(|e| bad(&format!("header: {e}")))?;
        if header.version != 1 {
            return Err(bad(&format!("unsupported version {}", header.version)));
        }
        if !(1..=2).contains(&header.dim) || header.np == 0 || header.np > 1024 || header.hidden == 0 || header.hidden > 4096 {
            return Err(bad("shape out of range"));
        }
        let mut params = Self::zeros(header.dim, header.np, header.hidden, header.vol);
        if header.params != params.num_params() {
            return Err(bad("parameter count does not match shapes"));
        }
        let body = &rest[len..];
        if body.len() != 8 * header.params {
            return Err(bad("parameter block has the wrong size"));
        }
        let theta: Vec<f64> = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(bad("non-finite parameter"));
        }
        params.set_from(&theta)?;
        Ok(params)
    }
}

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"DGNETCK1";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointHeader {
    version: u32,
    dim: usize,
    np: usize,
    hidden: usize,
    vol: bool,
    params: usize,
}

/// `∂f_i/∂u` at one state, indexed `[i][q][r]`.
fn flux_jacobian(phys: &Physics, s: &Vars<f64>) -> [[[f64; MAX_VARS]; MAX_VARS]; 2] {
    let m = phys.nvars();
    let mut jac = [[[0.0; MAX_VARS]; MAX_VARS]; 2];
    for r in 0..m {
        let mut sd = [Dual::constant(0.0); MAX_VARS];
        for (d, &v) in sd.iter_mut().zip(s) {
            *d = Dual::constant(v);
        }
        sd[r].eps = 1.0;
        let f = phys.flux(&sd);
        for i in 0..phys.dim {
            for q in 0..m {
                jac[i][q][r] = f[i][q].eps;
            }
        }
    }
    jac
}

struct Ctx<'a> {
    disc: &'a Discretization,
    phys: Physics,
    kinds: Vec<&'a BoundaryKind>,
    params: &'a SurrogateParams,
    mode: SurrogateMode,
    t: f64,
}

impl<'a> Ctx<'a> {
    fn new(
        disc: &'a Discretization,
        u_shape: (usize, usize, usize),
        params: &'a SurrogateParams,
        phys: Physics,
        bcs: &'a BoundaryConfig,
        mode: SurrogateMode,
        t: f64,
    ) -> Result<Self> {
        params.check(disc)?;
        let (k, np, m) = u_shape;
        if k != disc.num_elements() || np != disc.basis.np || m != phys.nvars() {
            return Err(DgError::Shape(format!(
                "state (K={k}, Np={np}, m={m}) does not match discretization (K={}, Np={}, m={})",
                disc.num_elements(),
                disc.basis.np,
                phys.nvars()
            )));
        }
        Ok(Self { disc, phys, kinds: resolve_boundaries(disc, bcs)?, params, mode, t })
    }

    fn vol_net(&self) -> Option<&Mlp> {
        match self.mode {
            SurrogateMode::Learned => self.params.vol.as_ref(),
            SurrogateMode::FluxOracle => None,
        }
    }

    fn element<T: Real>(&self, u: &StateField<T>, k: usize, out: &mut [T]) -> Result<()> {
        let (disc, phys) = (self.disc, &self.phys);
        let (np, m, dim) = (u.np, u.m, disc.dim());
        let ops = &disc.ops;
        let states: Vec<Vars<T>> = (0..np).map(|l| u.node_state(k, l)).collect();
        if self.mode == SurrogateMode::FluxOracle && states.iter().any(|s| !phys.is_valid(s)) {
            return Err(DgError::NonPhysical { element: k });
        }
        let metric = disc.geom.metrics[k];
        let reference = states[0];
        let c = phys.flux(&reference);
        let fluxes: Vec<[Vars<T>; 2]> = states.iter().map(|s| phys.flux(s)).collect();
        let mut hidden = Vec::with_capacity(HIDDEN);

        // Volume path: f̃_{i,q} = η Ψ_vol(f / η), or the nodal flux itself.
        let mut ft = vec![T::zero(); dim * m * np];
        let (mut v, mut xbar, mut o) = (vec![T::zero(); np], vec![T::zero(); np], vec![T::zero(); np]);
        for i in 0..dim {
            for q in 0..m {
                for (l, f) in fluxes.iter().enumerate() {
                    v[l] = f[i][q];
                }
                let dst = &mut ft[(i * m + q) * np..(i * m + q + 1) * np];
                match self.vol_net() {
                    Some(net) => {
                        let (eta, _) = normalize(&v, &mut xbar);
                        net.forward(&xbar, &mut hidden, &mut o);
                        for (d, &y) in dst.iter_mut().zip(&o) {
                            *d = eta * y;
                        }
                    }
                    None => dst.copy_from_slice(&v),
                }
            }
        }
        let mut g = vec![T::zero(); np];
        for a in 0..dim {
            for q in 0..m {
                for (l, gl) in g.iter_mut().enumerate() {
                    let mut acc = T::zero();
                    for i in 0..dim {
                        acc += (ft[(i * m + q) * np + l] - c[i][q]).scale(metric[i][a]);
                    }
                    *gl = acc;
                }
                ops.vol[a].mul_add(&g, &mut out[q * np..(q + 1) * np]);
            }
        }

        // Flux path: (n·f*)_{q,j} = ψ Ψ_flux(z / ψ).
        let (mut um, mut up) = (Vec::new(), Vec::new());
        let mut nf = Vec::new();
        let mut x = [T::zero(); 3];
        let mut y = [T::zero(); 1];
        for e in 0..ops.nfaces {
            face_states(disc, u, phys, &self.kinds, k, e, self.t, false, &mut um, &mut up);
            let face = disc.face(k, e);
            let n = face.normal;
            let ne = um.len();
            nf.clear();
            nf.resize(m * ne, T::zero());
            let nc = phys.normal_flux(&reference, n);
            for j in 0..ne {
                let (fm, fp) = (phys.flux(&um[j]), phys.flux(&up[j]));
                if self.mode == SurrogateMode::FluxOracle && !phys.is_valid(&up[j]) {
                    return Err(DgError::NonPhysical { element: k });
                }
                let half_lambda = match self.mode {
                    SurrogateMode::FluxOracle => phys.max_wave_speed(&um[j], &up[j], n).scale(0.5),
                    SurrogateMode::Learned => T::zero(),
                };
                for q in 0..m {
                    let z = face_inputs(&fm, &fp, &um[j], &up[j], n, dim, q);
                    let (psi, _) = normalize(&z[..=dim], &mut x[..=dim]);
                    let flux = match self.mode {
                        SurrogateMode::Learned => {
                            self.params.flux.forward(&x[..=dim], &mut hidden, &mut y);
                            psi * y[0]
                        }
                        SurrogateMode::FluxOracle => {
                            let mut central = T::zero();
                            for zi in &z[..dim] {
                                central += *zi;
                            }
                            psi * ((central + half_lambda * z[dim]) / psi)
                        }
                    };
                    nf[q * ne + j] = flux - nc[q];
                }
            }
            for q in 0..m {
                ops.lift[e].mul_add_scaled(-face.scale, &nf[q * ne..(q + 1) * ne], &mut out[q * np..(q + 1) * np]);
            }
        }
        Ok(())
    }

    /// Reverse pass on element `k`: adds `(∂F_k/∂u)ᵀ w_k` into `own`
    /// (element `k`, layout `q * Np + l`) and `neighbors`, and the parameter
    /// gradient into `gtheta`.
    fn element_vjp(
        &self,
        u: &StateField<f64>,
        w: &StateField<f64>,
        k: usize,
        own: &mut [f64],
        neighbors: &mut Vec<(usize, f64)>,
        gtheta: &mut [f64],
    ) {
        let (disc, phys) = (self.disc, &self.phys);
        let (np, m, dim) = (u.np, u.m, disc.dim());
        let ops = &disc.ops;
        let metric = disc.geom.metrics[k];
        let states: Vec<Vars<f64>> = (0..np).map(|l| u.node_state(k, l)).collect();
        let jac: Vec<_> = states.iter().map(|s| flux_jacobian(phys, s)).collect();
        let nflux = self.params.flux.num_params();
        let (gflux, gvol) = gtheta.split_at_mut(nflux);
        let mut hidden = Vec::with_capacity(HIDDEN);

        // Volume path.
        let mut gbar = vec![0.0; dim * m * np];
        for a in 0..dim {
            for q in 0..m {
                ops.vol[a].tr_mul_add_scaled(1.0, w.var(k, q), &mut gbar[(a * m + q) * np..(a * m + q + 1) * np]);
            }
        }
        let (mut v, mut xbar, mut o) = (vec![0.0; np], vec![0.0; np], vec![0.0; np]);
        let (mut gft, mut gx) = (vec![0.0; np], vec![0.0; np]);
        for i in 0..dim {
            for q in 0..m {
                for (l, g) in gft.iter_mut().enumerate() {
                    *g = (0..dim).map(|a| metric[i][a] * gbar[(a * m + q) * np + l]).sum();
                }
                let gv: Vec<f64> = match self.vol_net() {
                    Some(net) => {
                        for l in 0..np {
                            v[l] = phys.flux(&states[l])[i][q];
                        }
                        let (eta, idx) = normalize(&v, &mut xbar);
                        net.forward(&xbar, &mut hidden, &mut o);
                        let go: Vec<f64> = gft.iter().map(|g| eta * g).collect();
                        let mut geta: f64 = o.iter().zip(&gft).map(|(a, b)| a * b).sum();
                        gx.iter_mut().for_each(|g| *g = 0.0);
                        net.backward(&xbar, &go, &mut hidden, &mut gx, gvol);
                        geta -= gx.iter().zip(&xbar).map(|(g, x)| g * x / eta).sum::<f64>();
                        let mut gv: Vec<f64> = gx.iter().map(|g| g / eta).collect();
                        if let Some(p) = idx {
                            gv[p] += geta * v[p].signum();
                        }
                        gv
                    }
                    None => gft.clone(),
                };
                for l in 0..np {
                    for r in 0..m {
                        own[r * np + l] += gv[l] * jac[l][i][q][r];
                    }
                }
            }
        }

        // Flux path.
        let (mut um, mut up) = (Vec::new(), Vec::new());
        let mut lw = Vec::new();
        let mut x = [0.0; 3];
        let mut y = [0.0; 1];
        for e in 0..ops.nfaces {
            face_states(disc, u, phys, &self.kinds, k, e, self.t, false, &mut um, &mut up);
            let face = disc.face(k, e);
            let n = face.normal;
            let ne = um.len();
            lw.clear();
            lw.resize(m * ne, 0.0);
            for q in 0..m {
                ops.lift[e].tr_mul_add_scaled(-face.scale, w.var(k, q), &mut lw[q * ne..(q + 1) * ne]);
            }
            for j in 0..ne {
                let (fm, fp) = (phys.flux(&um[j]), phys.flux(&up[j]));
                let (jm, jp) = (flux_jacobian(phys, &um[j]), flux_jacobian(phys, &up[j]));
                let (mut gum, mut gup) = ([0.0; MAX_VARS], [0.0; MAX_VARS]);
                for q in 0..m {
                    let gflux_out = lw[q * ne + j];
                    if gflux_out == 0.0 {
                        continue;
                    }
                    let z = face_inputs(&fm, &fp, &um[j], &up[j], n, dim, q);
                    let (psi, idx) = normalize(&z[..=dim], &mut x[..=dim]);
                    self.params.flux.forward(&x[..=dim], &mut hidden, &mut y);
                    let mut gpsi = y[0] * gflux_out;
                    let mut gxz = [0.0; 3];
                    self.params.flux.backward(&x[..=dim], &[psi * gflux_out], &mut hidden, &mut gxz[..=dim], gflux);
                    let mut gz = [0.0; 3];
                    for c in 0..=dim {
                        gz[c] = gxz[c] / psi;
                        gpsi -= gxz[c] * x[c] / psi;
                    }
                    if let Some(p) = idx {
                        gz[p] += gpsi * z[p].signum();
                    }
                    for i in 0..dim {
                        let s = 0.5 * n[i] * gz[i];
                        for r in 0..m {
                            gum[r] += s * jm[i][q][r];
                            gup[r] += s * jp[i][q][r];
                        }
                    }
                    gum[q] += gz[dim];
                    gup[q] -= gz[dim];
                }
                let l = ops.face_nodes[e][j];
                match face.neighbor {
                    Neighbor::Interior { element, face: e2 } => {
                        let l2 = ops.face_nodes[e2][face.nodes.perm[j]];
                        for (r, g) in gup.iter().enumerate().take(m) {
                            neighbors.push(((element * m + r) * np + l2, *g));
                        }
                    }
                    Neighbor::Boundary { index } => {
                        let gj = self.kinds[index].ghost_jacobian(phys, n);
                        for (q, row) in gj.iter().enumerate().take(m) {
                            for r in 0..m {
                                gum[r] += row[r] * gup[q];
                            }
                        }
                    }
                }
                for (r, g) in gum.iter().enumerate().take(m) {
                    own[r * np + l] += g;
                }
            }
        }
    }
}

/// The surrogate tangent `Ψ(û)`: collocation DG integration with the learned
/// (or oracle) face flux and volume correction.
pub fn dgnet_tangent<T: Real>(
    disc: &Discretization,
    u: &StateField<T>,
    params: &SurrogateParams,
    phys: Physics,
    bcs: &BoundaryConfig,
    mode: SurrogateMode,
    t: f64,
) -> Result<StateField<T>> {
    let ctx = Ctx::new(disc, (u.k, u.np, u.m), params, phys, bcs, mode, t)?;
    let mut out = StateField::zeros_like(u);
    let results: Vec<Result<()>> = out
        .data
        .par_chunks_mut(u.m * u.np)
        .enumerate()
        .map(|(k, o)| ctx.element(u, k, o))
        .collect();
    results.into_iter().collect::<Result<()>>()?;
    Ok(out)
}

/// Elements per parallel task in [`dgnet_vjp`]; partial sums are combined in
/// chunk order so results do not depend on the thread count.
const VJP_CHUNK: usize = 16;

/// Reverse-mode product of the learned tangent: returns `(∂Ψ/∂u)ᵀ w` and
/// `(∂Ψ/∂θ)ᵀ w`. At ties of the normalizing maximum the first entry is
/// differentiated.
pub fn dgnet_vjp(
    disc: &Discretization,
    u: &StateField<f64>,
    w: &StateField<f64>,
    params: &SurrogateParams,
    phys: Physics,
    bcs: &BoundaryConfig,
    t: f64,
) -> Result<(StateField<f64>, Vec<f64>)> {
    let ctx = Ctx::new(disc, (u.k, u.np, u.m), params, phys, bcs, SurrogateMode::Learned, t)?;
    if !u.same_shape(w) {
        return Err(DgError::Shape("cotangent shape differs from state".into()));
    }
    let chunk = u.m * u.np;
    let np = params.num_params();
    let parts: Vec<(Vec<f64>, Vec<(usize, f64)>, Vec<f64>)> = (0..u.k)
        .step_by(VJP_CHUNK)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|start| {
            let end = (start + VJP_CHUNK).min(u.k);
            let mut own = vec![0.0; (end - start) * chunk];
            let mut neighbors = Vec::new();
            let mut gtheta = vec![0.0; np];
            for k in start..end {
                let o = &mut own[(k - start) * chunk..(k - start + 1) * chunk];
                ctx.element_vjp(u, w, k, o, &mut neighbors, &mut gtheta);
            }
            (own, neighbors, gtheta)
        })
        .collect();
    let mut gu = StateField::zeros_like(u);
    let mut gtheta = vec![0.0; np];
    for (c, (own, neighbors, gt)) in parts.into_iter().enumerate() {
        let base = c * VJP_CHUNK * chunk;
        gu.data[base..base + own.len()].iter_mut().zip(&own).for_each(|(a, b)| *a += b);
        for (i, g) in neighbors {
            gu.data[i] += g;
        }
        gtheta.iter_mut().zip(&gt).for_each(|(a, b)| *a += b);
    }
    Ok((gu, gtheta))
}

/// Calls `visit` with every normalized face input vector (length `d + 1`)
/// of `u`: one per element face node and equation.
pub fn for_each_face_input(
    disc: &Discretization,
    u: &StateField<f64>,
    phys: &Physics,
    bcs: &BoundaryConfig,
    t: f64,
    mut visit: impl FnMut(&[f64]),
) -> Result<()> {
    let kinds = resolve_boundaries(disc, bcs)?;
    let dim = disc.dim();
    let (mut um, mut up) = (Vec::new(), Vec::new());
    let mut x = [0.0; 3];
    for k in 0..u.k {
        for e in 0..disc.basis.nfaces {
            face_states(disc, u, phys, &kinds, k, e, t, false, &mut um, &mut up);
            let n = disc.face(k, e).normal;
            for j in 0..um.len() {
                let (fm, fp) = (phys.flux(&um[j]), phys.flux(&up[j]));
                for q in 0..u.m {
                    let z = face_inputs(&fm, &fp, &um[j], &up[j], n, dim, q);
                    normalize(&z[..=dim], &mut x[..=dim]);
                    visit(&x[..=dim]);
                }
            }
        }
    }
    Ok(())
}

/// Largest disagreement `|f*_k + f*_{k'}|` between the two one-sided
/// evaluations of the same interior face point. Zero for conservative fluxes.
pub fn face_flux_mismatch(
    disc: &Discretization,
    u: &StateField<f64>,
    params: &SurrogateParams,
    phys: &Physics,
    bcs: &BoundaryConfig,
    t: f64,
) -> Result<f64> {
    let kinds = resolve_boundaries(disc, bcs)?;
    let dim = disc.dim();
    let one_sided = |k: usize, e: usize| -> Vec<Vars<f64>> {
        let (mut um, mut up) = (Vec::new(), Vec::new());
        face_states(disc, u, phys, &kinds, k, e, t, false, &mut um, &mut up);
        let n = disc.face(k, e).normal;
        let mut hidden = Vec::new();
        let (mut x, mut y) = ([0.0; 3], [0.0; 1]);
        um.iter()
            .zip(&up)
            .map(|(a, b)| {
                let (fm, fp) = (phys.flux(a), phys.flux(b));
                let mut out = [0.0; MAX_VARS];
                for (q, o) in out.iter_mut().enumerate().take(u.m) {
                    let z = face_inputs(&fm, &fp, a, b, n, dim, q);
                    let (psi, _) = normalize(&z[..=dim], &mut x[..=dim]);
                    params.flux.forward(&x[..=dim], &mut hidden, &mut y);
                    *o = psi * y[0];
                }
                out
            })
            .collect()
    };
    let mut worst: f64 = 0.0;
    for k in 0..u.k {
        for e in 0..disc.basis.nfaces {
            let face = disc.face(k, e);
            if let Neighbor::Interior { element, face: e2 } = face.neighbor {
                let (mine, theirs) = (one_sided(k, e), one_sided(element, e2));
                for (j, &p) in face.nodes.perm.iter().enumerate() {
                    for q in 0..u.m {
                        worst = worst.max((mine[j][q] + theirs[p][q]).abs());
                    }
                }
            }
        }
    }
    Ok(worst)
}

/// [`dgnet_tangent`] bundled as a [`Tangent`].
#[derive(Clone, Copy)]
pub struct DgNetTangent<'a> {
    pub disc: &'a Discretization,
    pub physics: Physics,
    pub bcs: &'a BoundaryConfig,
    pub params: &'a SurrogateParams,
    pub mode: SurrogateMode,
}

impl Tangent for DgNetTangent<'_> {
    fn eval<T: Real>(&self, u: &StateField<T>, t: f64) -> Result<StateField<T>> {
        let out = dgnet_tangent(self.disc, u, self.params, self.physics, self.bcs, self.mode, t)?;
        if out.is_finite() {
            Ok(out)
        } else {
            Err(DgError::NonFinite("surrogate tangent".into()))
        }
    }
}
