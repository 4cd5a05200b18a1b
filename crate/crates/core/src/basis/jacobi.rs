//! Orthonormal Jacobi polynomials and the Gauss rules built on them.

use nalgebra::{DMatrix, SymmetricEigen};

fn gamma_int(x: f64) -> f64 {
    // Only called with positive integer arguments.
    let n = x.round() as u64;
    debug_assert!((x - n as f64).abs() < 1e-12 && n >= 1);
    (1..n).map(|k| k as f64).product()
}

/// Values of the orthonormal Jacobi polynomial `P_n^{(alpha,beta)}` at `x`.
pub fn jacobi_p(x: &[f64], alpha: f64, beta: f64, n: usize) -> Vec<f64> {
    let gamma0 = 2f64.powf(alpha + beta + 1.0) / (alpha + beta + 1.0) * gamma_int(alpha + 1.0)
        * gamma_int(beta + 1.0)
        / gamma_int(alpha + beta + 1.0);
    let p0: Vec<f64> = vec![1.0 / gamma0.sqrt(); x.len()];
    if n == 0 {
        return p0;
    }
    let gamma1 = (alpha + 1.0) * (beta + 1.0) / (alpha + beta + 3.0) * gamma0;
    let p1: Vec<f64> = x
        .iter()
        .map(|&xi| ((alpha + beta + 2.0) * xi / 2.0 + (alpha - beta) / 2.0) / gamma1.sqrt())
        .collect();
    if n == 1 {
        return p1;
    }
    let mut prev = p0;
    let mut cur = p1;
    let mut a_old = 2.0 / (2.0 + alpha + beta)
        * ((alpha + 1.0) * (beta + 1.0) / (alpha + beta + 3.0)).sqrt();
    for i in 1..n {
        let fi = i as f64;
        let h1 = 2.0 * fi + alpha + beta;
        let a_new = 2.0 / (h1 + 2.0)
            * ((fi + 1.0) * (fi + 1.0 + alpha + beta) * (fi + 1.0 + alpha) * (fi + 1.0 + beta)
                / (h1 + 1.0)
                / (h1 + 3.0))
                .sqrt();
        let b_new = -(alpha * alpha - beta * beta) / h1 / (h1 + 2.0);
        let next: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(j, &xj)| (-a_old * prev[j] + (xj - b_new) * cur[j]) / a_new)
            .collect();
        prev = cur;
        cur = next;
        a_old = a_new;
    }
    cur
}

/// Derivative of [`jacobi_p`].
pub fn grad_jacobi_p(x: &[f64], alpha: f64, beta: f64, n: usize) -> Vec<f64> {
    if n == 0 {
        return vec![0.0; x.len()];
    }
    let c = ((n as f64) * (n as f64 + alpha + beta + 1.0)).sqrt();
    jacobi_p(x, alpha + 1.0, beta + 1.0, n - 1)
        .into_iter()
        .map(|v| c * v)
        .collect()
}

/// Gauss quadrature for the weight `(1-x)^alpha (1+x)^beta` with `n + 1` points.
pub fn jacobi_gq(alpha: f64, beta: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    if n == 0 {
        return (vec![-(alpha - beta) / (alpha + beta + 2.0)], vec![2.0]);
    }
    let size = n + 1;
    let mut jac = DMatrix::<f64>::zeros(size, size);
    for i in 0..size {
        let h1 = 2.0 * i as f64 + alpha + beta;
        jac[(i, i)] = if alpha + beta < 10.0 * f64::EPSILON && i == 0 {
            0.0
        } else {
            -(alpha * alpha - beta * beta) / (h1 + 2.0) / h1
        };
        if i + 1 < size {
            let k = (i + 1) as f64;
            let off = 2.0 / (h1 + 2.0)
                * (k * (k + alpha + beta) * (k + alpha) * (k + beta) / (h1 + 1.0) / (h1 + 3.0))
                    .sqrt();
            jac[(i, i + 1)] = off;
            jac[(i + 1, i)] = off;
        }
    }
    let eig = SymmetricEigen::new(jac);
    let scale = 2f64.powf(alpha + beta + 1.0) / (alpha + beta + 1.0) * gamma_int(alpha + 1.0)
        * gamma_int(beta + 1.0)
        / gamma_int(alpha + beta + 1.0);
    let mut pairs: Vec<(f64, f64)> = (0..size)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], v0 * v0 * scale)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Gauss-Lobatto points for the weight `(1-x)^alpha (1+x)^beta`, `n + 1` points.
pub fn jacobi_gl(alpha: f64, beta: f64, n: usize) -> Vec<f64> {
    assert!(n >= 1);
    if n == 1 {
        return vec![-1.0, 1.0];
    }
    let (interior, _) = jacobi_gq(alpha + 1.0, beta + 1.0, n - 2);
    let mut x = Vec::with_capacity(n + 1);
    x.push(-1.0);
    x.extend(interior);
    x.push(1.0);
    x
}

/// Legendre-Gauss-Lobatto weights for the points returned by `jacobi_gl(0, 0, n)`.
pub fn lgl_weights(x: &[f64]) -> Vec<f64> {
    let n = x.len() - 1;
    let nn = (n * (n + 1)) as f64;
    // Unnormalized Legendre P_n(x) via the three-term recurrence.
    x.iter()
        .map(|&xi| {
            let (mut p0, mut p1) = (1.0, xi);
            for k in 1..n {
                let kf = k as f64;
                let p2 = ((2.0 * kf + 1.0) * xi * p1 - kf * p0) / (kf + 1.0);
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            2.0 / (nn * pn * pn)
        })
        .collect()
}

/// 1D Vandermonde matrix of the orthonormal Legendre basis.
pub fn vandermonde_1d(order: usize, r: &[f64]) -> DMatrix<f64> {
    let mut v = DMatrix::zeros(r.len(), order + 1);
    for j in 0..=order {
        for (i, val) in jacobi_p(r, 0.0, 0.0, j).into_iter().enumerate() {
            v[(i, j)] = val;
        }
    }
    v
}

pub fn grad_vandermonde_1d(order: usize, r: &[f64]) -> DMatrix<f64> {
    let mut v = DMatrix::zeros(r.len(), order + 1);
    for j in 0..=order {
        for (i, val) in grad_jacobi_p(r, 0.0, 0.0, j).into_iter().enumerate() {
            v[(i, j)] = val;
        }
    }
    v
}
