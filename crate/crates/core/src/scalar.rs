//! Scalar traits the numerical code is generic over.
//!
//! [`Entry`] is the minimum a stored matrix value needs (ordering, zero,
//! addition), which lets exact rational matrices share the sparse container.
//! [`Real`] adds the transcendental functions every solver relies on.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_rational::Ratio;
use num_traits::{Float, FromPrimitive, NumAssign, Zero};

/// A value that can be stored in a [`SparseNonNegMatrix`](crate::SparseNonNegMatrix).
pub trait Entry: Copy + PartialOrd + Zero + Debug + Send + Sync + 'static {
    /// Values for which this returns true are dropped at construction.
    fn is_negligible(&self) -> bool {
        self.is_zero()
    }
}

/// Floating point scalar: `f32` or `f64`.
pub trait Real:
    Entry + Float + FromPrimitive + NumAssign + Sum + Display + LowerExp
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn c(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// Largest exponent accepted before an evaluation is reported as overflow.
    fn exp_limit() -> Self {
        Self::c(700.0).min(Self::max_value().ln() * Self::c(0.99))
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

/// Entries below this magnitude are treated as structural zeros.
pub const ENTRY_FLOOR: f64 = 1e-300;

impl Entry for f64 {
    fn is_negligible(&self) -> bool {
        self.abs() < ENTRY_FLOOR
    }
}

impl Entry for f32 {
    fn is_negligible(&self) -> bool {
        *self == 0.0
    }
}

impl Real for f64 {}
impl Real for f32 {}

impl Entry for Ratio<i64> {}
impl Entry for Ratio<i128> {}

pub(crate) fn norm_l1<T: Real>(v: &[T]) -> T {
    v.iter().map(|a| a.abs()).sum()
}

pub(crate) fn norm_l2<T: Real>(v: &[T]) -> T {
    v.iter().map(|a| *a * *a).sum::<T>().sqrt()
}

pub(crate) fn norm_inf<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, a| m.max(a.abs()))
}

pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}
