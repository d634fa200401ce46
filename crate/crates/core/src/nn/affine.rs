//! Affine maps `y = Wᵀx + b`, shared by the convolution (applied to every
//! window row with the same weights), the output layer and the stack path.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{matmul_a_bt_acc, matmul_acc, matmul_at_b_acc, SeededRng, Tensor};

/// `weight` is stored `in × out` so that `y = Wᵀx + b` reads as a row-vector
/// product `x · W`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub weight: Tensor,
    pub bias: Tensor,
}

pub type ConvParams = Affine;
pub type LinearParams = Affine;
pub type StackLinearParams = Affine;

impl Affine {
    pub fn zeros(input: usize, output: usize) -> Self {
        Affine {
            weight: Tensor::zeros(&[input, output]),
            bias: Tensor::zeros(&[output]),
        }
    }

    /// Weights uniform in ±sqrt(6 / (fan_in + fan_out)), zero bias.
    pub fn glorot(input: usize, output: usize, rng: &mut SeededRng) -> Self {
        let limit = (6.0 / (input + output) as f64).sqrt();
        let mut p = Affine::zeros(input, output);
        p.weight
            .data_mut()
            .iter_mut()
            .for_each(|w| *w = rng.uniform(-limit, limit));
        p
    }

    pub fn input_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.cols()
    }

    /// Applies the map to every row of `x` (N × in) giving N × out.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (n, input, output) = (x.rows(), self.input_dim(), self.output_dim());
        if x.cols() != input {
            return Err(Error::shape("affine input", &[n, input], x.shape()));
        }
        if self.bias.len() != output {
            return Err(Error::shape("affine bias", &[output], self.bias.shape()));
        }
        let mut out = Tensor::zeros(&[n, output]);
        for i in 0..n {
            out.row_mut(i).copy_from_slice(self.bias.data());
        }
        matmul_acc(x.data(), self.weight.data(), out.data_mut(), n, input, output);
        Ok(out)
    }

    /// Accumulates parameter gradients into `grads` and returns dL/dx.
    pub fn backward(&self, x: &Tensor, grad_out: &Tensor, grads: &mut Affine) -> Tensor {
        let (n, input, output) = (x.rows(), self.input_dim(), self.output_dim());
        debug_assert_eq!(grad_out.shape(), &[n, output]);
        matmul_at_b_acc(x.data(), grad_out.data(), grads.weight.data_mut(), n, input, output);
        for i in 0..n {
            for (b, &g) in grads.bias.data_mut().iter_mut().zip(grad_out.row(i)) {
                *b += g;
            }
        }
        let mut grad_x = Tensor::zeros(&[n, input]);
        matmul_a_bt_acc(grad_out.data(), self.weight.data(), grad_x.data_mut(), n, input, output);
        grad_x
    }
}

/// Position-wise convolution over window rows (N × window·d → N × c).
pub fn conv_forward(p: &ConvParams, windows: &Tensor) -> Result<Tensor> {
    p.forward(windows)
}

/// `Wᵀx + b` for a single vector.
pub fn linear(p: &LinearParams, x: &[f64]) -> Result<Vec<f64>> {
    let row = Tensor::from_vec(&[1, x.len()], x.to_vec())?;
    Ok(p.forward(&row)?.into_data())
}
