//! Dense tensors, layers with hand-written reverse-mode gradients, the
//! recognition networks and the Adam optimizer.
//!
//! Every layer exposes `forward`, which returns its output together with a
//! cache of the activations it needs, and `backward`, which consumes that
//! cache and an upstream gradient, accumulates into the layer's parameter
//! gradients, and returns the gradient with respect to the layer input.

mod adam;
pub mod conv;
mod dense;
mod dropout;
pub mod gru;
mod init;
pub mod linalg;
mod model;
pub mod tcn;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use conv::{maxpool2d, maxpool2d_backward, CausalConv1d, Conv2d};
pub use dense::{dense_softmax, log_softmax, softmax, Dense};
pub use dropout::{dropout, dropout_backward, dropout_mask};
pub use gru::Gru;
pub use init::Initializer;
pub use model::{ModelConfig, ModelGraph, ModelMode, Pass, Tape};
pub use tcn::TcnBlock;
pub use tensor::Tensor;

/// A named trainable tensor and its accumulated gradient.
#[derive(Debug, Clone)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
}

impl Param {
    pub fn new(name: &str, value: Tensor) -> Self {
        let grad = Tensor::zeros(value.shape());
        Self {
            name: name.to_string(),
            value,
            grad,
        }
    }
}
