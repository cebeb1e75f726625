//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar usable by the solvers: `f32` or `f64`.
///
/// Tolerances quoted throughout the documentation assume `f64`; `f32` runs
/// the same code paths at single precision.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + rustfft::FftNum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Default
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// Lossy conversion from a count.
    #[inline]
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Reduce `x` into the half-open interval `[0, period)`.
#[inline]
pub fn wrap<T: Real>(x: T, period: T) -> T {
    let r = x - (x / period).floor() * period;
    // `floor` can leave r == period for tiny negative x.
    if r >= period {
        r - period
    } else {
        r
    }
}

/// Signed representative of `x` in `[-period/2, period/2)`.
#[inline]
pub fn wrap_signed<T: Real>(x: T, period: T) -> T {
    let half = period * T::lit(0.5);
    wrap(x + half, period) - half
}

/// Shortest distance between two points on a circle of circumference `period`.
#[inline]
pub fn circular_distance<T: Real>(a: T, b: T, period: T) -> T {
    wrap_signed(a - b, period).abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_stays_in_range() {
        assert_eq!(wrap(1.25_f64, 1.0), 0.25);
        assert_eq!(wrap(-0.25_f64, 1.0), 0.75);
        assert!(wrap(-1e-18_f64, 1.0) < 1.0);
        assert_eq!(wrap(0.0_f32, 2.0), 0.0);
    }

    #[test]
    fn signed_wrap_and_distance() {
        assert!((wrap_signed(0.9_f64, 1.0) + 0.1).abs() < 1e-15);
        assert!((circular_distance(0.95_f64, 0.05, 1.0) - 0.1).abs() < 1e-15);
        assert!((circular_distance(0.3_f64, 0.1, 1.0) - 0.2).abs() < 1e-15);
    }
}
