use rayon::prelude::*;

use super::{Discretization, Neighbor, StateField};
use crate::error::{DgError, Result};
use crate::physics::{BoundaryConfig, BoundaryKind, FluxModel, Physics, Vars, MAX_VARS};
use crate::real::Real;

/// Looks up the condition of every boundary face.
pub fn resolve_boundaries<'a>(disc: &Discretization, bcs: &'a BoundaryConfig) -> Result<Vec<&'a BoundaryKind>> {
    disc.conn.boundary_faces.iter().map(|bf| bcs.get(&bf.tag)).collect()
}

/// States at the points of `a` (rows of nodal-to-point interpolation) on
/// element `k`. Interpolating the deviation from the first nodal state keeps
/// constant fields exactly constant.
fn interpolate_states<T: Real>(a: &super::Mat, u: &StateField<T>, k: usize, out: &mut Vec<Vars<T>>) {
    out.clear();
    out.resize(a.rows, [T::zero(); MAX_VARS]);
    for q in 0..u.m {
        let src = u.var(k, q);
        let base = src[0];
        for (j, s) in out.iter_mut().enumerate() {
            let mut acc = T::zero();
            for (c, &v) in a.row(j).iter().zip(src) {
                acc += (v - base).scale(*c);
            }
            s[q] = base + acc;
        }
    }
}

fn trace<T: Real>(disc: &Discretization, u: &StateField<T>, k: usize, e: usize, quad: bool, out: &mut Vec<Vars<T>>) {
    match (&disc.ops.over, quad) {
        (Some(over), true) => interpolate_states(&over.face_interp[e], u, k, out),
        _ => {
            out.clear();
            out.extend(disc.ops.face_nodes[e].iter().map(|&l| u.node_state(k, l)));
        }
    }
}

/// Interior (`um`) and exterior (`up`) states at the points of face `e` of
/// element `k`: face nodes, or face quadrature points when `quad` is set
/// and over-integration operators exist.
#[allow(clippy::too_many_arguments)]
pub fn face_states<T: Real>(
    disc: &Discretization,
    u: &StateField<T>,
    phys: &Physics,
    kinds: &[&BoundaryKind],
    k: usize,
    e: usize,
    t: f64,
    quad: bool,
    um: &mut Vec<Vars<T>>,
    up: &mut Vec<Vars<T>>,
) {
    let quad = quad && disc.ops.over.is_some();
    trace(disc, u, k, e, quad, um);
    let face = disc.face(k, e);
    let points = if quad { face.quad.as_ref().unwrap_or(&face.nodes) } else { &face.nodes };
    match face.neighbor {
        Neighbor::Interior { element, face: e2 } => {
            let mut other = Vec::with_capacity(um.len());
            trace(disc, u, element, e2, quad, &mut other);
            up.clear();
            up.extend(points.perm.iter().map(|&p| other[p]));
        }
        Neighbor::Boundary { index } => {
            up.clear();
            up.extend(um.iter().zip(&points.x).map(|(s, &x)| kinds[index].ghost(phys, s, face.normal, x, t)));
        }
    }
}

fn element_tangent<T: Real>(
    disc: &Discretization,
    u: &StateField<T>,
    model: &FluxModel,
    kinds: &[&BoundaryKind],
    t: f64,
    k: usize,
    out: &mut [T],
) -> Result<()> {
    let phys = &model.physics;
    let (np, m, dim) = (u.np, u.m, disc.dim());
    let metric = disc.geom.metrics[k];
    let ops = &disc.ops;
    let nonphysical = || DgError::NonPhysical { element: k };

    let states: Vec<Vars<T>> = match &ops.over {
        None => (0..np).map(|l| u.node_state(k, l)).collect(),
        Some(over) => {
            let mut s = Vec::new();
            interpolate_states(&over.interp, u, k, &mut s);
            s
        }
    };
    if (0..np).any(|l| !phys.is_valid(&u.node_state(k, l))) || states.iter().any(|s| !phys.is_valid(s)) {
        return Err(nonphysical());
    }

    // The volume and face terms of a constant flux cancel exactly, so the
    // flux of the first nodal state is subtracted from both. This leaves F
    // unchanged and makes uniform states produce a tangent of round-off size.
    let reference = u.node_state(k, 0);
    let c = phys.flux(&reference);

    // Contravariant fluxes g_a = Σ_i (∂ξ_a/∂x_i) (f_i − c_i), stored [(a * m + q) * n + p].
    let n = states.len();
    let mut g = vec![T::zero(); dim * m * n];
    for (p, s) in states.iter().enumerate() {
        let f = phys.flux(s);
        for a in 0..dim {
            for q in 0..m {
                let mut acc = T::zero();
                for (i, fi) in f.iter().enumerate().take(dim) {
                    acc += (fi[q] - c[i][q]).scale(metric[i][a]);
                }
                g[(a * m + q) * n + p] = acc;
            }
        }
    }
    let vol = match &ops.over {
        None => &ops.vol,
        Some(over) => &over.vol,
    };
    for a in 0..dim {
        for q in 0..m {
            vol[a].mul_add(&g[(a * m + q) * n..(a * m + q + 1) * n], &mut out[q * np..(q + 1) * np]);
        }
    }

    let (mut um, mut up) = (Vec::new(), Vec::new());
    let mut nf = Vec::new();
    for e in 0..ops.nfaces {
        face_states(disc, u, phys, kinds, k, e, t, true, &mut um, &mut up);
        let face = disc.face(k, e);
        let ne = um.len();
        nf.clear();
        nf.resize(m * ne, T::zero());
        let nc = phys.normal_flux(&reference, face.normal);
        for j in 0..ne {
            let flux = phys.numerical_flux(model.scheme, &um[j], &up[j], face.normal);
            for q in 0..m {
                nf[q * ne + j] = flux[q] - nc[q];
            }
        }
        let lift = match &ops.over {
            None => &ops.lift[e],
            Some(over) => &over.lift[e],
        };
        for q in 0..m {
            lift.mul_add_scaled(-face.scale, &nf[q * ne..(q + 1) * ne], &mut out[q * np..(q + 1) * np]);
        }
    }
    Ok(())
}

/// The DG spatial operator `F(û) = Σ_i V_i^k f̂_i − Σ_e E^{k,e} (n·f̂*)`.
///
/// Fails with [`DgError::NonPhysical`] carrying the lowest offending
/// element index when a nodal (or quadrature-point) state is invalid.
pub fn dg_tangent<T: Real>(
    disc: &Discretization,
    u: &StateField<T>,
    model: &FluxModel,
    bcs: &BoundaryConfig,
    t: f64,
) -> Result<StateField<T>> {
    if u.k != disc.num_elements() || u.np != disc.basis.np || u.m != model.physics.nvars() {
        return Err(DgError::Shape(format!(
            "state (K={}, Np={}, m={}) does not match discretization (K={}, Np={}, m={})",
            u.k,
            u.np,
            u.m,
            disc.num_elements(),
            disc.basis.np,
            model.physics.nvars()
        )));
    }
    let kinds = resolve_boundaries(disc, bcs)?;
    let mut out = StateField::zeros_like(u);
    let chunk = u.m * u.np;
    let results: Vec<Result<()>> = out
        .data
        .par_chunks_mut(chunk)
        .enumerate()
        .map(|(k, o)| element_tangent(disc, u, model, &kinds, t, k, o))
        .collect();
    results.into_iter().collect::<Result<()>>()?;
    Ok(out)
}
