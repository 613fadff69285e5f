use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point type carrying probability masses.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + FromStr + Send + Sync + 'static
{
    /// Allowed deviation of a mass vector's sum from one.
    fn mass_tolerance() -> Self;

    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal is representable")
    }

    /// `2^e` for a signed exponent.
    fn exp2i(e: i32) -> Self {
        Self::lit(2.0).powi(e)
    }
}

impl Scalar for f64 {
    fn mass_tolerance() -> Self {
        1e-12
    }
}

impl Scalar for f32 {
    fn mass_tolerance() -> Self {
        1e-5
    }
}
