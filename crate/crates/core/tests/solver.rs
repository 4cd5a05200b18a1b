//! End-to-end solver checks against independent reference solutions.

use dgnet_core::dg::{Discretization, QuadratureMode, StateField};
use dgnet_core::limiter::Limiter;
use dgnet_core::mesh::{parse_mesh, uniform_1d, MeshFormat};
use dgnet_core::physics::{FluxModel, FluxScheme, Physics, Problem};
use dgnet_core::time::{integrate, ImplicitConfig, Scheme};
use dgnet_core::training::TrainingSetup;

/// Exact Riemann solution for an ideal gas, sampled at `x/t = s`.
/// Primitive states are `(ρ, u, p)`.
fn exact_riemann(l: [f64; 3], r: [f64; 3], gamma: f64, s: f64) -> [f64; 3] {
    let g = gamma;
    let sound = |w: [f64; 3]| (g * w[2] / w[0]).sqrt();
    let (cl, cr) = (sound(l), sound(r));
    let f = |p: f64, w: [f64; 3], c: f64| -> (f64, f64) {
        if p > w[2] {
            let a = 2.0 / ((g + 1.0) * w[0]);
            let b = (g - 1.0) / (g + 1.0) * w[2];
            let q = (a / (p + b)).sqrt();
            ((p - w[2]) * q, q * (1.0 - 0.5 * (p - w[2]) / (p + b)))
        } else {
            let e = (g - 1.0) / (2.0 * g);
            ((2.0 * c / (g - 1.0)) * ((p / w[2]).powf(e) - 1.0), (p / w[2]).powf(-(g + 1.0) / (2.0 * g)) / (w[0] * c))
        }
    };
    let mut p = 0.5 * (l[2] + r[2]);
    for _ in 0..100 {
        let (fl, dl) = f(p, l, cl);
        let (fr, dr) = f(p, r, cr);
        let next = (p - (fl + fr + r[1] - l[1]) / (dl + dr)).max(1e-12);
        if (next - p).abs() < 1e-14 * p {
            p = next;
            break;
        }
        p = next;
    }
    let u = 0.5 * (l[1] + r[1]) + 0.5 * (f(p, r, cr).0 - f(p, l, cl).0);
    let (w, c, sign) = if s < u { (l, cl, -1.0) } else { (r, cr, 1.0) };
    let ratio = p / w[2];
    if ratio > 1.0 {
        let shock = w[1] + sign * c * ((g + 1.0) / (2.0 * g) * ratio + (g - 1.0) / (2.0 * g)).sqrt();
        if sign * (s - shock) > 0.0 {
            return w;
        }
        let k = (g - 1.0) / (g + 1.0);
        [w[0] * (ratio + k) / (k * ratio + 1.0), u, p]
    } else {
        let head = w[1] + sign * c;
        let c_star = c * ratio.powf((g - 1.0) / (2.0 * g));
        let tail = u + sign * c_star;
        if sign * (s - head) > 0.0 {
            w
        } else if sign * (s - tail) < 0.0 {
            [w[0] * ratio.powf(1.0 / g), u, p]
        } else {
            let k = 2.0 / (g + 1.0);
            let vel = k * (-sign * c + (g - 1.0) / 2.0 * w[1] + s);
            let cs = k * (c - sign * (g - 1.0) / 2.0 * (w[1] - s));
            let rho = w[0] * (cs / c).powf(2.0 / (g - 1.0));
            [rho, vel, rho * cs * cs / g]
        }
    }
}

fn solve(problem: &Problem, phys: Physics, disc: &Discretization, limit: bool, dt: f64, steps: usize) -> StateField<f64> {
    let bcs = problem.default_boundary(&phys, &disc.mesh.boundary_tags());
    let limiter = Limiter::for_problem(disc, limit).unwrap();
    let setup = TrainingSetup { disc, model: FluxModel::new(phys, FluxScheme::LaxFriedrichs), bcs: &bcs, limiter: &limiter };
    let u0 = disc.interpolate(phys.nvars(), |x| problem.initial_state(&phys, x));
    integrate(&u0, dt, steps, Scheme::SspRk2, &setup.dg(), &limiter, &ImplicitConfig::default(), &mut |_| Ok(())).unwrap()
}

#[test]
fn sod_matches_exact_riemann_solution() {
    let problem = Problem::from_id("sod").unwrap();
    let phys = Physics::euler(1, 1.4);
    let k = 200;
    let disc = Discretization::new(uniform_1d(0.0, 1.0, k).unwrap(), 1, QuadratureMode::OverIntegration, &[]).unwrap();
    let u = solve(&problem, phys, &disc, true, 2e-4, 1000);
    let means = disc.element_means(&u);
    let mut l1 = 0.0;
    for (e, rho) in means.chunks(u.m).map(|c| c[0]).enumerate() {
        let x = (e as f64 + 0.5) / k as f64;
        let exact = exact_riemann([1.0, 0.0, 1.0], [0.125, 0.0, 0.1], 1.4, (x - 0.5) / u.t);
        l1 += (rho - exact[0]).abs() / k as f64;
    }
    assert!(l1 < 1e-2, "L1 density error {l1}");
}

#[test]
fn exact_riemann_oracle_reproduces_known_star_state() {
    let star = exact_riemann([1.0, 0.0, 1.0], [0.125, 0.0, 0.1], 1.4, 0.5);
    assert!((star[2] - 0.30313).abs() < 1e-5);
    assert!((star[1] - 0.92745).abs() < 1e-5);
}

fn sine_error(elements: usize, order: usize) -> f64 {
    let problem = Problem::Sine;
    let phys = Physics::advection(1, [1.0, 0.0]);
    let mesh = uniform_1d(0.0, 1.0, elements).unwrap();
    let bcs = problem.default_boundary(&phys, &mesh.boundary_tags());
    let disc = Discretization::new(mesh, order, QuadratureMode::OverIntegration, &bcs.periodic_pairs().unwrap()).unwrap();
    let steps = 400;
    let u = solve(&problem, phys, &disc, false, 0.25 / steps as f64, steps);
    let mut diff = disc.interpolate(1, |x| {
        let mut v = [0.0; 4];
        v[0] = (2.0 * std::f64::consts::PI * (x[0] - u.t)).sin();
        v
    });
    diff.axpy(-1.0, &u);
    disc.l2_sq(&diff, 0).sqrt()
}

#[test]
fn periodic_advection_converges_at_design_order() {
    let order = 2;
    let (coarse, fine) = (sine_error(8, order), sine_error(16, order));
    let rate = (coarse / fine).log2();
    assert!(rate > order as f64 + 0.5, "rate {rate} ({coarse:.3e} -> {fine:.3e})");
}

#[test]
fn parsed_gmsh_mesh_runs_the_2d_solver() {
    let text = "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n\
$PhysicalNames\n1\n1 1 \"wall\"\n$EndPhysicalNames\n\
$Nodes\n4\n1 0 0 0\n2 1 0 0\n3 1 1 0\n4 0 1 0\n$EndNodes\n\
$Elements\n6\n1 1 2 1 1 1 2\n2 1 2 1 1 2 3\n3 1 2 1 1 3 4\n4 1 2 1 1 4 1\n5 2 2 0 1 1 2 3\n6 2 2 0 1 1 3 4\n$EndElements\n";
    let mesh = parse_mesh(text, MeshFormat::GmshAsciiV2).unwrap();
    let problem = Problem::from_id("freestream").unwrap();
    let phys = Physics::euler(2, 1.4);
    let disc = Discretization::new(mesh, 2, QuadratureMode::Collocation, &[]).unwrap();
    let u0 = disc.interpolate(4, |x| problem.initial_state(&phys, x));
    let u = solve(&problem, phys, &disc, false, 1e-3, 20);
    let drift = u.data.iter().zip(&u0.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(drift < 1e-12, "free stream drifted by {drift}");
}
