//! Surface-EMG hand-gesture recognition with a hybrid network: 1D
//! convolution blocks wrapped in learnable gated skip connections, a GRU over
//! the convolved sequence, and a dense classification head.
//!
//! Every kernel is generic over [`Scalar`] (`f32` or `f64`). Models ship in
//! single precision; the aliases below name the concrete types used by the
//! data pipeline, training loop, file formats and CLI.

pub mod cli;
pub mod data;
pub mod error;
pub mod kv;
pub mod layers;
pub mod metrics;
pub mod model;
pub mod runtime;
pub mod scalar;
pub mod tensor;

pub use error::{Error, Result};
pub use model::{build_model, ModelConfig};
pub use scalar::Scalar;
pub use tensor::{EwOp, ReduceOp};

/// Single-precision tensor, the numeric carrier of the pipeline.
pub type Tensor = tensor::Tensor<f32>;
/// Double-precision tensor, used for gradient checking.
pub type Tensor64 = tensor::Tensor<f64>;
/// Single-precision model, as stored in `CSGN` files.
pub type Model = model::ModelState<f32>;
/// Double-precision model.
pub type Model64 = model::ModelState<f64>;
