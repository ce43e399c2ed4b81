//! Hierarchical pooling sequence models built on gated diagonal linear
//! recurrences, together with the signal-processing, scan and evaluation
//! kernels they rely on.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root fix the precision for the common cases.

pub mod data;
pub mod dsp;
pub mod error;
pub mod gradcheck;
pub mod layers;
pub mod metrics;
pub mod model;
pub mod training;
pub mod rng;
pub mod scalar;
pub mod scan;
pub mod suite;
pub mod tensor;

pub use error::{Error, Result};
pub use rng::SeededRng;
pub use scalar::{DType, Scalar};
pub use tensor::Tensor;

pub type Tensor32 = Tensor<f32>;
pub type Tensor64 = Tensor<f64>;
