//! Scalar abstraction for the numeric core.

use std::fmt;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar the decision math is generic over.
///
/// Implemented by `f32` and `f64`. Exact quantities (sample counts,
/// frequencies) are kept as integers and only converted to a `Scalar`
/// at decision time.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + fmt::Debug + fmt::Display + Send + Sync + 'static
{
}

impl<T> Scalar for T where
    T: Float + FromPrimitive + ToPrimitive + fmt::Debug + fmt::Display + Send + Sync + 'static
{
}

/// Convert an `f64` constant into the working scalar type.
pub fn real<S: Scalar>(x: f64) -> S {
    S::from_f64(x).expect("constant representable in scalar type")
}

/// Logistic function `1 / (1 + exp(-z))`.
pub fn sigmoid<S: Scalar>(z: S) -> S {
    S::one() / (S::one() + (-z).exp())
}

/// Log-odds of `p`; the caller must keep `p` strictly inside `(0, 1)`.
pub fn logit<S: Scalar>(p: S) -> S {
    (p / (S::one() - p)).ln()
}
