use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::tensor::Tensor;

/// Activation applied after the convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    /// `max(0, x)`
    #[default]
    Relu,
    /// `ln(1 + eˣ)`
    Softplus,
}

impl Activation {
    pub fn forward(self, x: &Tensor) -> Tensor {
        match self {
            Activation::Relu => relu(x),
            Activation::Softplus => softplus(x),
        }
    }

    /// dL/dx given the pre-activation input and dL/dy.
    pub fn backward(self, x: &Tensor, grad_out: &Tensor) -> Tensor {
        match self {
            Activation::Relu => relu_backward(x, grad_out),
            Activation::Softplus => {
                let mut g = grad_out.clone();
                for (gi, &xi) in g.data_mut().iter_mut().zip(x.data()) {
                    *gi *= sigmoid_scalar(xi);
                }
                g
            }
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Relu => "relu",
            Activation::Softplus => "softplus",
        })
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "relu" => Ok(Activation::Relu),
            "softplus" => Ok(Activation::Softplus),
            other => Err(Error::Config(format!(
                "unknown activation {other:?} (expected relu|softplus)"
            ))),
        }
    }
}

pub fn relu(x: &Tensor) -> Tensor {
    x.map(|v| v.max(0.0))
}

/// Passes the gradient where `x > 0`; the subgradient at 0 is 0.
pub fn relu_backward(x: &Tensor, grad_out: &Tensor) -> Tensor {
    let mut g = grad_out.clone();
    for (gi, &xi) in g.data_mut().iter_mut().zip(x.data()) {
        if xi <= 0.0 {
            *gi = 0.0;
        }
    }
    g
}

pub fn softplus(x: &Tensor) -> Tensor {
    x.map(|v| v.max(0.0) + (-v.abs()).exp().ln_1p())
}

/// Branches on sign so neither side overflows.
#[inline]
pub fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid(x: &Tensor) -> Tensor {
    x.map(sigmoid_scalar)
}
