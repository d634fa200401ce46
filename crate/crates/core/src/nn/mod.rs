//! Layer primitives with hand-written forward and backward passes, the
//! finite-difference checker, and the Adam optimizer.
//!
//! Layers are plain functions over explicit state. A forward pass returns
//! whatever its backward pass needs (a cache or the output itself); nothing
//! is stored behind the caller's back.

pub mod activation;
pub mod adam;
pub mod affine;
pub mod dropout;
pub mod embedding;
pub mod gradcheck;
pub mod layercheck;
pub mod lstm;
pub mod pool;
pub mod softmax;

pub use activation::{relu, relu_backward, sigmoid, sigmoid_scalar, softplus, Activation};
pub use adam::{AdamConfig, AdamState};
pub use affine::{conv_forward, linear, Affine, ConvParams, LinearParams, StackLinearParams};
pub use dropout::{dropout, Dropout};
pub use embedding::{embedding_backward, embedding_forward, window_concat, window_concat_backward};
pub use gradcheck::{grad_check, GradCheckConfig, GradCheckReport};
pub use layercheck::{layer_grad_checks, LayerCheck, LayerDims};
pub use lstm::{lstm_backward, lstm_forward, LstmCache, LstmParams};
pub use pool::{masked_mean, masked_mean_backward, MeanBy};
pub use softmax::{cross_entropy, softmax, softmax_cross_entropy_grad, CrossEntropy};

use crate::tensor::Tensor;

/// Anything that owns an ordered list of named parameter tensors.
///
/// The order is part of the contract: optimizer state, gradient sets and
/// checkpoints all address tensors by position.
pub trait Parameters {
    fn named_tensors(&self) -> Vec<(&str, &Tensor)>;
    fn named_tensors_mut(&mut self) -> Vec<(&str, &mut Tensor)>;

    fn num_parameters(&self) -> usize {
        self.named_tensors().iter().map(|(_, t)| t.len()).sum()
    }
}

/// Ad-hoc parameter list, handy for layer-level checks and toy models.
pub type NamedTensors = Vec<(String, Tensor)>;

impl Parameters for NamedTensors {
    fn named_tensors(&self) -> Vec<(&str, &Tensor)> {
        self.iter().map(|(n, t)| (n.as_str(), t)).collect()
    }

    fn named_tensors_mut(&mut self) -> Vec<(&str, &mut Tensor)> {
        self.iter_mut().map(|(n, t)| (n.as_str(), t)).collect()
    }
}
