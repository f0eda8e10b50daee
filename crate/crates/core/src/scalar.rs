//! Scalar abstractions.
//!
//! Step functions, envelopes and the monotone estimator only need ordered
//! field arithmetic, so they are generic over [`Scalar`]. This admits exact
//! rational types (e.g. `num_rational::Rational64`) next to `f32`/`f64`.
//! Anything that integrates or raises to a real power needs [`Real`].

use std::fmt::Debug;
use std::ops::Neg;

use num_traits::{Float, FromPrimitive, Num, ToPrimitive};

/// Ordered field element.
pub trait Scalar:
    Num + Neg<Output = Self> + Copy + PartialOrd + FromPrimitive + ToPrimitive + Debug + Send + Sync + 'static
{
    #[inline]
    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    #[inline]
    fn min_of(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    #[inline]
    fn abs_of(self) -> Self {
        if self < Self::zero() {
            -self
        } else {
            self
        }
    }
}

impl<T> Scalar for T where
    T: Num + Neg<Output = T> + Copy + PartialOrd + FromPrimitive + ToPrimitive + Debug + Send + Sync + 'static
{
}

/// Floating point scalar: `f32` or `f64`.
pub trait Real: Scalar + Float {
    /// Lossy conversion from `f64`; never fails for the float types.
    #[inline]
    fn of(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 converts to every float type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("float converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}
