//! Reverse-mode automatic differentiation over dense row-major tensors.
//!
//! The primitive set is small and fixed: matmul, elementwise arithmetic with
//! trailing-suffix broadcast, movement ops (reshape, permute, slice, concat,
//! gather, scatter-add), softmax, layer norm, GELU, L2 row normalization,
//! reductions, and a straight-through combinator for quantizers. Everything
//! else in the workspace is composed from these, so one finite-difference
//! check per primitive covers the whole model. Generic over the scalar type
//! (`f32`/`f64`); the crate root fixes `f64` aliases used across the
//! workspace.

pub mod fd;
pub mod param;
pub mod rng;
pub mod scalar;
pub mod tape;
pub mod tensor;

pub use fd::{check_gradients, check_gradients_floored, FdReport, FdWorst};
pub use param::{Param, ParamKey};
pub use scalar::Scalar;
pub use tape::{Grads, TapeError};
pub use tensor::straight_through;

/// Workspace-standard tensor (f64).
pub type Tensor = tensor::TensorBase<f64>;
/// Workspace-standard tape (f64).
pub type Tape = tape::TapeBase<f64>;
