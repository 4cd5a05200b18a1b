use crate::error::{DgError, Result};
use crate::physics::{Vars, MAX_VARS};
use crate::real::Real;

/// Nodal conservative values with layout `data[(k * m + q) * np + l]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateField<T = f64> {
    pub k: usize,
    pub np: usize,
    pub m: usize,
    pub data: Vec<T>,
    pub t: f64,
}

impl<T: Real> StateField<T> {
    pub fn zeros(k: usize, np: usize, m: usize) -> Self {
        Self { k, np, m, data: vec![T::zero(); k * np * m], t: 0.0 }
    }

    pub fn from_data(k: usize, np: usize, m: usize, data: Vec<T>, t: f64) -> Result<Self> {
        if data.len() != k * np * m {
            return Err(DgError::Shape(format!("{} values for K={k}, Np={np}, m={m}", data.len())));
        }
        Ok(Self { k, np, m, data, t })
    }

    /// A zero field with the same shape.
    pub fn zeros_like<S: Real>(other: &StateField<S>) -> Self {
        let mut z = Self::zeros(other.k, other.np, other.m);
        z.t = other.t;
        z
    }

    #[inline]
    pub fn idx(&self, k: usize, q: usize, l: usize) -> usize {
        (k * self.m + q) * self.np + l
    }

    #[inline]
    pub fn element(&self, k: usize) -> &[T] {
        let s = self.m * self.np;
        &self.data[k * s..(k + 1) * s]
    }

    #[inline]
    pub fn element_mut(&mut self, k: usize) -> &mut [T] {
        let s = self.m * self.np;
        &mut self.data[k * s..(k + 1) * s]
    }

    /// Nodal values of variable `q` on element `k`.
    #[inline]
    pub fn var(&self, k: usize, q: usize) -> &[T] {
        let i = self.idx(k, q, 0);
        &self.data[i..i + self.np]
    }

    /// Conservative state at node `l` of element `k`.
    #[inline]
    pub fn node_state(&self, k: usize, l: usize) -> Vars<T> {
        let mut s = [T::zero(); MAX_VARS];
        for (q, v) in s.iter_mut().enumerate().take(self.m) {
            *v = self.data[self.idx(k, q, l)];
        }
        s
    }

    pub fn same_shape<S>(&self, other: &StateField<S>) -> bool {
        self.k == other.k && self.np == other.np && self.m == other.m
    }

    /// `self += a * x`.
    pub fn axpy(&mut self, a: T, x: &Self) {
        for (y, &v) in self.data.iter_mut().zip(&x.data) {
            *y += a * v;
        }
    }

    /// `a * x + b * y`, elementwise.
    pub fn lincomb(a: T, x: &Self, b: T, y: &Self) -> Self {
        let data = x.data.iter().zip(&y.data).map(|(&u, &v)| a * u + b * v).collect();
        Self { k: x.k, np: x.np, m: x.m, data, t: x.t }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.value().abs()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Value parts as a double-precision field.
    pub fn to_f64(&self) -> StateField<f64> {
        StateField { k: self.k, np: self.np, m: self.m, data: self.data.iter().map(|v| v.value()).collect(), t: self.t }
    }

    pub fn from_f64(u: &StateField<f64>) -> Self {
        Self { k: u.k, np: u.np, m: u.m, data: u.data.iter().map(|&v| T::from_f64(v)).collect(), t: u.t }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_and_axpy() {
        let mut u = StateField::<f64>::zeros(2, 3, 2);
        let i = u.idx(1, 1, 2);
        assert_eq!(i, 11);
        u.data[i] = 2.0;
        assert_eq!(u.var(1, 1), &[0.0, 0.0, 2.0]);
        assert_eq!(u.node_state(1, 2)[1], 2.0);
        let v = u.clone();
        u.axpy(0.5, &v);
        assert_eq!(u.data[i], 3.0);
        assert!(StateField::from_data(2, 3, 2, vec![0.0; 5], 0.0).is_err());
    }
}
