//! Floating-point abstraction shared by the numerical layer.
//!
//! Everything in `rates`, `model`, `spline`, `quadrature`, `simulate` and
//! `estimate` is written against [`Scalar`], so the same code runs in `f32`
//! or `f64`. The harness and I/O layers are `f64` only.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Real scalar: `f32` or `f64`.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Error function.
    fn erf(self) -> Self;

    /// Complementary error function.
    fn erfc(self) -> Self;

    /// Literal conversion from `f64`.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {
    #[inline]
    fn erf(self) -> Self {
        libm::erff(self)
    }

    #[inline]
    fn erfc(self) -> Self {
        libm::erfcf(self)
    }
}

impl Scalar for f64 {
    #[inline]
    fn erf(self) -> Self {
        libm::erf(self)
    }

    #[inline]
    fn erfc(self) -> Self {
        libm::erfc(self)
    }
}

/// Standard normal density.
#[inline]
pub fn normal_pdf<T: Scalar>(z: T) -> T {
    let inv_sqrt_2pi = T::one() / (T::lit(2.0) * T::PI()).sqrt();
    inv_sqrt_2pi * (-(z * z) / T::lit(2.0)).exp()
}

/// Standard normal distribution function.
#[inline]
pub fn normal_cdf<T: Scalar>(z: T) -> T {
    T::lit(0.5) * (-z / T::SQRT_2()).erfc()
}
