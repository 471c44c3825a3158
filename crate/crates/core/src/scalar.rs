//! Floating-point abstraction shared by every numeric kernel.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar the models and metrics are generic over.
///
/// Implemented for `f32` and `f64`. Training and gradient checks are run at
/// `f64`; `f32` is available for inference-sized workloads.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Smallest probability fed to `ln` by the cross-entropy kernels.
    fn prob_floor() -> Self;

    /// Converts a literal; every `f64` is representable (possibly rounded).
    #[inline]
    fn lit(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("f64 literal converts to scalar")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).expect("scalar converts to f64")
    }
}

impl Scalar for f32 {
    fn prob_floor() -> Self {
        f32::MIN_POSITIVE
    }
}

impl Scalar for f64 {
    fn prob_floor() -> Self {
        1e-300
    }
}
