//! Floating-point scalar abstraction for the tensor engine.

use num_traits::{Float, FromPrimitive, NumAssign};

/// Real scalar type the engine is generic over.
///
/// `lit` converts an f64 literal; it is the only way numeric constants enter
/// generic kernels, so a single code path serves both precisions.
pub trait Scalar:
    Float + FromPrimitive + NumAssign + Copy + Default + std::fmt::Debug + std::fmt::Display + 'static
{
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn as_f64(self) -> f64 {
        self
    }
}
