//! Scalar abstraction shared by every numerical module.
//!
//! All state and operator math is written against [`Real`], which is
//! implemented for `f32` and `f64`. Tolerances quoted throughout the crate are
//! `f64` figures; [`Real::tol`] rescales them for lower-precision scalars.

use nalgebra::RealField;
use num_complex::Complex;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real floating-point scalar: f32 or f64.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive {
    /// Multiplier applied to f64-calibrated tolerances.
    const TOLERANCE_SCALE: f64;

    /// Converts an `f64` literal into this scalar.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// Converts a count into this scalar.
    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }

    /// Rescaled tolerance: `tol(1e-9)` is `1e-9` for f64.
    #[inline]
    fn tol(base: f64) -> Self {
        Self::lit(base * Self::TOLERANCE_SCALE)
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar")
    }
}

impl Real for f64 {
    const TOLERANCE_SCALE: f64 = 1.0;
}

impl Real for f32 {
    const TOLERANCE_SCALE: f64 = 1e5;
}

/// Complex scalar over `T`.
pub type C<T> = Complex<T>;

#[inline]
pub(crate) fn cr<T: Real>(re: T) -> C<T> {
    Complex::new(re, T::zero())
}

/// `e^{i·angle}`.
#[inline]
pub(crate) fn cis<T: Real>(angle: T) -> C<T> {
    Complex::new(angle.cos(), angle.sin())
}
