//! Forward and backward kernels for every layer of the network, plus the
//! loss and the optimizer step.
//!
//! Kernels work on one window at a time (no batch axis). Each forward returns
//! a cache; the matching backward consumes it together with the parameters.

mod adam;
mod conv;
mod dense;
mod gated_skip;
mod gru;
mod init;
mod loss;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use conv::{conv1d_backward, conv1d_forward, Conv1dCache, Conv1dGrads, Conv1dParams};
pub use dense::{dense_backward, dense_forward, DenseCache, DenseGrads, DenseParams};
pub use gated_skip::{
    gated_skip_apply, gated_skip_backward, GatedSkipCache, GatedSkipGrads, GatedSkipParams,
};
pub use gru::{gru_backward, gru_forward, GruCache, GruGrads, GruParams};
pub use init::Initializer;
pub use loss::softmax_cross_entropy;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub(crate) fn expect_shape<T>(what: &str, t: &Tensor<T>, shape: &[usize]) -> Result<()>
where
    T: crate::Scalar,
{
    if t.shape() != shape {
        return Err(Error::dim(format!(
            "{what}: expected shape {shape:?}, got {:?}",
            t.shape()
        )));
    }
    Ok(())
}
