use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar used by every geometric and numeric routine.
///
/// Implemented for `f32` and `f64`. The geometry tolerance differs per type
/// because `f32` cannot resolve 1e-9 px² at typical image coordinates.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Areas and cross products at or below this magnitude count as zero.
    const GEOM_EPS: f64;

    /// Converts a literal; every `f64` literal is representable (possibly rounded).
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal converts to any Scalar")
    }

    #[inline]
    fn from_usize_lossy(v: usize) -> Self {
        Self::from_usize(v).expect("usize converts to any Scalar")
    }

    #[inline]
    fn geom_eps() -> Self {
        Self::lit(Self::GEOM_EPS)
    }
}

impl Scalar for f32 {
    const GEOM_EPS: f64 = 1e-5;
}

impl Scalar for f64 {
    const GEOM_EPS: f64 = 1e-9;
}
