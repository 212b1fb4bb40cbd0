//! Scalar abstraction shared by every numerical module.
//!
//! All physics code is written against [`Real`], which is implemented for
//! `f32` and `f64`. Transcendental functions and ordering come from
//! nalgebra's [`RealField`]; conversions go through num-traits.

use std::fmt::{Debug, Display, LowerExp};

use nalgebra::RealField;
use num_complex::Complex;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real floating-point scalar: `f32` or `f64`.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Debug + Display + LowerExp + Send + Sync + 'static
{
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("finite literal")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("representable count")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        <Self as ToPrimitive>::to_f64(&self).unwrap_or(f64::NAN)
    }

    /// Tolerance `x`, raised to a small multiple of machine epsilon when the
    /// type cannot resolve it (e.g. `1e-12` in `f32`).
    #[inline]
    fn tol(x: f64) -> Self {
        let floor = Self::default_epsilon() * Self::lit(256.0);
        Self::lit(x).max(floor)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex number over a [`Real`] scalar.
pub type Cx<T> = Complex<T>;

#[inline]
pub(crate) fn cx<T: Real>(re: T) -> Cx<T> {
    Complex::new(re, T::zero())
}

#[inline]
pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

#[inline]
pub(crate) fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

#[inline]
pub(crate) fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub(crate) fn scale<T: Real>(alpha: T, x: &mut [T]) {
    for xi in x.iter_mut() {
        *xi *= alpha;
    }
}
