use num_traits::{Float, FromPrimitive};
use serde::{de::DeserializeOwned, Serialize};

/// Scalar type carried by rewards, Q-values and value-iteration estimates.
///
/// The environment and automaton layers are integer/probability code and stay
/// on `f64`; everything that accumulates return values is generic over this
/// trait so the same learner runs on `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + Serialize
    + DeserializeOwned
    + std::fmt::Debug
    + std::fmt::Display
    + Send
    + Sync
    + 'static
{
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("f64 conversion")
    }
    fn to_f64_lossy(self) -> f64;
}

impl Scalar for f64 {
    fn to_f64_lossy(self) -> f64 {
        self
    }
}

impl Scalar for f32 {
    fn to_f64_lossy(self) -> f64 {
        self as f64
    }
}
