//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real floating point type the solvers, filters and networks are generic over.
///
/// Implemented for `f32` and `f64`. Tolerances in this crate are stated for
/// `f64`; the `f32` instantiation is usable but will not meet them.
pub trait Scalar:
    RealField + Copy + FromPrimitive + ToPrimitive + Display + Debug + Send + Sync + 'static
{
    /// Converts an `f64` literal into the scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar type")
    }

    fn is_finite_value(self) -> bool {
        self.as_f64().is_finite()
    }
}

/// Modulus of a complex number over any [`Scalar`].
#[inline]
pub fn cabs<S: Scalar>(z: nalgebra::Complex<S>) -> S {
    z.re.hypot(z.im)
}

impl Scalar for f32 {}
impl Scalar for f64 {}
