//! Scalar abstraction shared by every numerical kernel.
//!
//! Kernels are written once against [`Real`] and instantiated for `f64`,
//! `f32` and [`Dual`] numbers. The dual instantiation gives exact
//! Jacobian-vector products of the discrete operators without a tape.

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

pub trait Real:
    Copy
    + Debug
    + Default
    + PartialEq
    + PartialOrd
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
{
    /// Normalization floor used by the surrogate (`1e-16` in double, `1e-7` in single).
    const BETA: f64;
    /// Machine epsilon of the underlying storage type.
    const EPSILON: f64;

    fn from_f64(x: f64) -> Self;
    /// Value part (drops any derivative information).
    fn value(self) -> f64;

    fn sqrt(self) -> Self;
    fn tanh(self) -> Self;
    fn exp(self) -> Self;
    fn powf(self, p: f64) -> Self;

    #[inline]
    fn zero() -> Self {
        Self::from_f64(0.0)
    }
    #[inline]
    fn one() -> Self {
        Self::from_f64(1.0)
    }
    #[inline]
    fn abs(self) -> Self {
        if self.value() < 0.0 {
            -self
        } else {
            self
        }
    }
    #[inline]
    fn max(self, other: Self) -> Self {
        if other.value() > self.value() {
            other
        } else {
            self
        }
    }
    #[inline]
    fn min(self, other: Self) -> Self {
        if other.value() < self.value() {
            other
        } else {
            self
        }
    }
    #[inline]
    fn is_finite(self) -> bool {
        self.value().is_finite()
    }
    #[inline]
    fn scale(self, a: f64) -> Self {
        self * Self::from_f64(a)
    }
}

impl Real for f64 {
    const BETA: f64 = 1e-16;
    const EPSILON: f64 = f64::EPSILON;

    #[inline]
    fn from_f64(x: f64) -> Self {
        x
    }
    #[inline]
    fn value(self) -> f64 {
        self
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn powf(self, p: f64) -> Self {
        f64::powf(self, p)
    }
    #[inline]
    fn abs(self) -> Self {
        f64::abs(self)
    }
    #[inline]
    fn scale(self, a: f64) -> Self {
        self * a
    }
}

impl Real for f32 {
    const BETA: f64 = 1e-7;
    const EPSILON: f64 = f32::EPSILON as f64;

    #[inline]
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn value(self) -> f64 {
        self as f64
    }
    #[inline]
    fn sqrt(self) -> Self {
        f32::sqrt(self)
    }
    #[inline]
    fn tanh(self) -> Self {
        f32::tanh(self)
    }
    #[inline]
    fn exp(self) -> Self {
        f32::exp(self)
    }
    #[inline]
    fn powf(self, p: f64) -> Self {
        f32::powf(self, p as f32)
    }
    #[inline]
    fn abs(self) -> Self {
        f32::abs(self)
    }
}

/// Forward-mode dual number `re + eps·ε` with `ε² = 0`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Dual<T: Real = f64> {
    pub re: T,
    pub eps: T,
}

impl<T: Real> Dual<T> {
    pub fn new(re: T, eps: T) -> Self {
        Self { re, eps }
    }
    pub fn constant(re: T) -> Self {
        Self { re, eps: T::zero() }
    }
}

impl<T: Real> PartialOrd for Dual<T> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        self.re.partial_cmp(&other.re)
    }
}

impl<T: Real> Add for Dual<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.re + o.re, self.eps + o.eps)
    }
}
impl<T: Real> Sub for Dual<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.re - o.re, self.eps - o.eps)
    }
}
impl<T: Real> Mul for Dual<T> {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        Self::new(self.re * o.re, self.eps * o.re + self.re * o.eps)
    }
}
impl<T: Real> Div for Dual<T> {
    type Output = Self;
    #[inline]
    fn div(self, o: Self) -> Self {
        let q = self.re / o.re;
        Self::new(q, (self.eps - q * o.eps) / o.re)
    }
}
impl<T: Real> Neg for Dual<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.re, -self.eps)
    }
}
impl<T: Real> AddAssign for Dual<T> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}
impl<T: Real> SubAssign for Dual<T> {
    #[inline]
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}
impl<T: Real> MulAssign for Dual<T> {
    #[inline]
    fn mul_assign(&mut self, o: Self) {
        *self = *self * o;
    }
}
impl<T: Real> DivAssign for Dual<T> {
    #[inline]
    fn div_assign(&mut self, o: Self) {
        *self = *self / o;
    }
}
impl<T: Real> Sum for Dual<T> {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), |a, b| a + b)
    }
}

impl<T: Real> Real for Dual<T> {
    const BETA: f64 = T::BETA;
    const EPSILON: f64 = T::EPSILON;

    #[inline]
    fn from_f64(x: f64) -> Self {
        Self::constant(T::from_f64(x))
    }
    #[inline]
    fn value(self) -> f64 {
        self.re.value()
    }
    #[inline]
    fn sqrt(self) -> Self {
        let s = self.re.sqrt();
        Self::new(s, self.eps / (s + s))
    }
    #[inline]
    fn tanh(self) -> Self {
        let t = self.re.tanh();
        Self::new(t, self.eps * (T::one() - t * t))
    }
    #[inline]
    fn exp(self) -> Self {
        let e = self.re.exp();
        Self::new(e, self.eps * e)
    }
    #[inline]
    fn powf(self, p: f64) -> Self {
        let v = self.re.powf(p);
        Self::new(v, self.eps * T::from_f64(p) * self.re.powf(p - 1.0))
    }
    #[inline]
    fn scale(self, a: f64) -> Self {
        Self::new(self.re.scale(a), self.eps.scale(a))
    }
}

/// Seeds a slice as dual numbers with the given direction.
pub fn seed<T: Real>(values: &[T], direction: &[T]) -> Vec<Dual<T>> {
    values
        .iter()
        .zip(direction)
        .map(|(&re, &eps)| Dual::new(re, eps))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f<T: Real>(x: T) -> T {
        (x * x + T::one()).sqrt() * x.tanh() / (T::from_f64(2.0) + x.exp()) + x.powf(1.5)
    }

    #[test]
    fn dual_matches_central_difference() {
        for &x in &[0.3, 1.1, 2.7] {
            let d = f(Dual::new(x, 1.0)).eps;
            let h = 1e-6;
            let fd = (f(x + h) - f(x - h)) / (2.0 * h);
            assert!((d - fd).abs() < 1e-8, "{d} vs {fd}");
        }
    }

    #[test]
    fn max_min_follow_values() {
        let a = Dual::new(1.0, 5.0);
        let b = Dual::new(2.0, -1.0);
        assert_eq!(a.max(b), b);
        assert_eq!(a.min(b), a);
        assert_eq!((-b).abs(), b);
    }
}
