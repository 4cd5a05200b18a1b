//! Orthonormal polynomials, warp-and-blend nodes and cubature on the
//! reference triangle with vertices (-1,-1), (1,-1), (-1,1).

use nalgebra::DMatrix;

use super::jacobi::{grad_jacobi_p, jacobi_gl, jacobi_gq, jacobi_p, vandermonde_1d};

/// Alpha-optimized blending parameters for orders 1..=15.
const ALPHA_OPT: [f64; 15] = [
    0.0000, 0.0000, 1.4152, 0.1001, 0.2751, 0.9800, 1.0999, 1.2832, 1.3648, 1.4773, 1.4959,
    1.5743, 1.5770, 1.6223, 1.6258,
];

pub fn np_for_order(order: usize) -> usize {
    (order + 1) * (order + 2) / 2
}

fn warp_factor(order: usize, rout: &[f64]) -> Vec<f64> {
    let lgl = jacobi_gl(0.0, 0.0, order);
    let req: Vec<f64> = (0..=order)
        .map(|i| -1.0 + 2.0 * i as f64 / order as f64)
        .collect();
    let veq = vandermonde_1d(order, &req);
    let mut pmat = DMatrix::zeros(order + 1, rout.len());
    for i in 0..=order {
        for (j, v) in jacobi_p(rout, 0.0, 0.0, i).into_iter().enumerate() {
            pmat[(i, j)] = v;
        }
    }
    let lmat = veq
        .transpose()
        .lu()
        .solve(&pmat)
        .expect("equidistant Vandermonde is nonsingular");
    let shift: Vec<f64> = lgl.iter().zip(&req).map(|(a, b)| a - b).collect();
    (0..rout.len())
        .map(|j| {
            let w: f64 = (0..=order).map(|i| lmat[(i, j)] * shift[i]).sum();
            let r = rout[j];
            if r.abs() < 1.0 - 1e-10 {
                w / (1.0 - r * r)
            } else {
                0.0
            }
        })
        .collect()
}

/// Warp-and-blend interpolation nodes in equilateral coordinates mapped
/// to the reference triangle.
pub fn nodes_2d(order: usize) -> Vec<[f64; 2]> {
    let alpha = if order < 16 { ALPHA_OPT[order - 1] } else { 5.0 / 3.0 };
    let np = np_for_order(order);
    let mut l1 = Vec::with_capacity(np);
    let mut l3 = Vec::with_capacity(np);
    for n in 0..=order {
        for m in 0..=(order - n) {
            l1.push(n as f64 / order as f64);
            l3.push(m as f64 / order as f64);
        }
    }
    let l2: Vec<f64> = (0..np).map(|i| 1.0 - l1[i] - l3[i]).collect();
    let sqrt3 = 3f64.sqrt();
    let d1: Vec<f64> = (0..np).map(|i| l3[i] - l2[i]).collect();
    let d2: Vec<f64> = (0..np).map(|i| l1[i] - l3[i]).collect();
    let d3: Vec<f64> = (0..np).map(|i| l2[i] - l1[i]).collect();
    let w1 = warp_factor(order, &d1);
    let w2 = warp_factor(order, &d2);
    let w3 = warp_factor(order, &d3);
    let (c2, s2) = ((2.0 * std::f64::consts::PI / 3.0).cos(), (2.0 * std::f64::consts::PI / 3.0).sin());
    let (c3, s3) = ((4.0 * std::f64::consts::PI / 3.0).cos(), (4.0 * std::f64::consts::PI / 3.0).sin());
    (0..np)
        .map(|i| {
            let blend1 = 4.0 * l2[i] * l3[i];
            let blend2 = 4.0 * l1[i] * l3[i];
            let blend3 = 4.0 * l1[i] * l2[i];
            let warp1 = blend1 * w1[i] * (1.0 + (alpha * l1[i]).powi(2));
            let warp2 = blend2 * w2[i] * (1.0 + (alpha * l2[i]).powi(2));
            let warp3 = blend3 * w3[i] * (1.0 + (alpha * l3[i]).powi(2));
            let x = -l2[i] + l3[i] + warp1 + c2 * warp2 + c3 * warp3;
            let y = (-l2[i] - l3[i] + 2.0 * l1[i]) / sqrt3 + s2 * warp2 + s3 * warp3;
            xy_to_rs(x, y)
        })
        .collect()
}

fn xy_to_rs(x: f64, y: f64) -> [f64; 2] {
    let sqrt3 = 3f64.sqrt();
    let l1 = (sqrt3 * y + 1.0) / 3.0;
    let l2 = (-3.0 * x - sqrt3 * y + 2.0) / 6.0;
    let l3 = (3.0 * x - sqrt3 * y + 2.0) / 6.0;
    [-l2 + l3 - l1, -l2 - l3 + l1]
}

fn rs_to_ab(r: f64, s: f64) -> (f64, f64) {
    let a = if (s - 1.0).abs() > 1e-14 {
        2.0 * (1.0 + r) / (1.0 - s) - 1.0
    } else {
        -1.0
    };
    (a, s)
}

fn simplex_p(a: &[f64], b: &[f64], i: usize, j: usize) -> Vec<f64> {
    let h1 = jacobi_p(a, 0.0, 0.0, i);
    let h2 = jacobi_p(b, 2.0 * i as f64 + 1.0, 0.0, j);
    (0..a.len())
        .map(|k| 2f64.sqrt() * h1[k] * h2[k] * (1.0 - b[k]).powi(i as i32))
        .collect()
}

fn grad_simplex_p(a: &[f64], b: &[f64], id: usize, jd: usize) -> (Vec<f64>, Vec<f64>) {
    let fa = jacobi_p(a, 0.0, 0.0, id);
    let dfa = grad_jacobi_p(a, 0.0, 0.0, id);
    let alpha = 2.0 * id as f64 + 1.0;
    let gb = jacobi_p(b, alpha, 0.0, jd);
    let dgb = grad_jacobi_p(b, alpha, 0.0, jd);
    let n = a.len();
    let mut dr = vec![0.0; n];
    let mut ds = vec![0.0; n];
    for k in 0..n {
        let omb = 1.0 - b[k];
        let mut r = dfa[k] * gb[k];
        if id > 0 {
            r *= (0.5 * omb).powi(id as i32 - 1);
        }
        let mut s = dfa[k] * (gb[k] * (0.5 * (1.0 + a[k])));
        if id > 0 {
            s *= (0.5 * omb).powi(id as i32 - 1);
        }
        let mut tmp = dgb[k] * (0.5 * omb).powi(id as i32);
        if id > 0 {
            tmp -= 0.5 * id as f64 * gb[k] * (0.5 * omb).powi(id as i32 - 1);
        }
        s += fa[k] * tmp;
        let scale = 2f64.powf(id as f64 + 0.5);
        dr[k] = r * scale;
        ds[k] = s * scale;
    }
    (dr, ds)
}

fn collapse(points: &[[f64; 2]]) -> (Vec<f64>, Vec<f64>) {
    points
        .iter()
        .map(|p| rs_to_ab(p[0], p[1]))
        .unzip()
}

/// Vandermonde matrix of the orthonormal simplex basis at `points`.
pub fn vandermonde_2d(order: usize, points: &[[f64; 2]]) -> DMatrix<f64> {
    let (a, b) = collapse(points);
    let mut v = DMatrix::zeros(points.len(), np_for_order(order));
    let mut col = 0;
    for i in 0..=order {
        for j in 0..=(order - i) {
            for (row, val) in simplex_p(&a, &b, i, j).into_iter().enumerate() {
                v[(row, col)] = val;
            }
            col += 1;
        }
    }
    v
}

/// Gradient Vandermonde matrices `(V_r, V_s)`.
pub fn grad_vandermonde_2d(order: usize, points: &[[f64; 2]]) -> (DMatrix<f64>, DMatrix<f64>) {
    let (a, b) = collapse(points);
    let np = np_for_order(order);
    let mut vr = DMatrix::zeros(points.len(), np);
    let mut vs = DMatrix::zeros(points.len(), np);
    let mut col = 0;
    for i in 0..=order {
        for j in 0..=(order - i) {
            let (dr, ds) = grad_simplex_p(&a, &b, i, j);
            for row in 0..points.len() {
                vr[(row, col)] = dr[row];
                vs[(row, col)] = ds[row];
            }
            col += 1;
        }
    }
    (vr, vs)
}

/// Collapsed-coordinate Gauss cubature exact for polynomials of total
/// degree `degree` on the reference triangle.
pub fn triangle_cubature(degree: usize) -> (Vec<[f64; 2]>, Vec<f64>) {
    let n = degree / 2 + 1;
    let (xa, wa) = jacobi_gq(0.0, 0.0, n - 1);
    let (xb, wb) = jacobi_gq(1.0, 0.0, n - 1);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for (ib, &b) in xb.iter().enumerate() {
        for (ia, &a) in xa.iter().enumerate() {
            let r = 0.5 * (1.0 + a) * (1.0 - b) - 1.0;
            points.push([r, b]);
            weights.push(0.5 * wa[ia] * wb[ib]);
        }
    }
    (points, weights)
}
