//! Floating-point abstraction shared by the model and metric code.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar usable for model parameters and losses.
///
/// `Display`/`FromStr` must round-trip exactly; both `f32` and `f64` satisfy
/// this with the standard library formatting.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + FromStr + Send + Sync + 'static
{
    /// Lossy conversion from `f64`.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 is representable in every float type")
    }

    /// Widening conversion to `f64`.
    fn f64(self) -> f64 {
        self.to_f64().expect("float converts to f64")
    }

    /// Short type name written into checkpoint headers.
    const NAME: &'static str;
}

impl Scalar for f32 {
    const NAME: &'static str = "f32";
}

impl Scalar for f64 {
    const NAME: &'static str = "f64";
}

/// Logistic sigmoid, evaluated without overflow for large `|x|`.
pub fn sigmoid<F: Scalar>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}
