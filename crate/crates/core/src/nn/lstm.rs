//! Single-layer LSTM with full backpropagation through time.
//!
//! Gate blocks are laid out along the `4H` axis in the fixed order
//! **input, forget, candidate, output**. Checkpoints depend on this order.
//!
//! ```text
//! z_t = x_t·W_x + h_{t-1}·W_h + b
//! i = σ(z_i)   f = σ(z_f)   g = tanh(z_g)   o = σ(z_o)
//! c_t = f ⊙ c_{t-1} + i ⊙ g
//! h_t = o ⊙ tanh(c_t)
//! ```
//!
//! Initial hidden and cell states are zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::activation::sigmoid_scalar;
use crate::tensor::{axpy, matmul_a_bt_acc, matmul_acc, matmul_at_b_acc, SeededRng, Tensor};

pub const GATE_INPUT: usize = 0;
pub const GATE_FORGET: usize = 1;
pub const GATE_CANDIDATE: usize = 2;
pub const GATE_OUTPUT: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    /// `in × 4H`
    pub w_input: Tensor,
    /// `H × 4H`
    pub w_hidden: Tensor,
    /// `4H`
    pub bias: Tensor,
}

impl LstmParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        LstmParams {
            w_input: Tensor::zeros(&[input, 4 * hidden]),
            w_hidden: Tensor::zeros(&[hidden, 4 * hidden]),
            bias: Tensor::zeros(&[4 * hidden]),
        }
    }

    /// Weights uniform in ±sqrt(6 / (fan_in + H)) per gate block; biases zero
    /// except the forget gate, which starts at `forget_bias`.
    pub fn init(input: usize, hidden: usize, forget_bias: f64, rng: &mut SeededRng) -> Self {
        let mut p = LstmParams::zeros(input, hidden);
        let limit_x = (6.0 / (input + hidden) as f64).sqrt();
        let limit_h = (6.0 / (2 * hidden) as f64).sqrt();
        for w in p.w_input.data_mut() {
            *w = rng.uniform(-limit_x, limit_x);
        }
        for w in p.w_hidden.data_mut() {
            *w = rng.uniform(-limit_h, limit_h);
        }
        let forget = GATE_FORGET * hidden..(GATE_FORGET + 1) * hidden;
        p.bias.data_mut()[forget].iter_mut().for_each(|b| *b = forget_bias);
        p
    }

    pub fn input_dim(&self) -> usize {
        self.w_input.rows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_hidden.rows()
    }
}

/// Everything the backward pass needs from a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCache {
    /// Post-activation gates, `N × 4H`.
    pub gates: Tensor,
    /// Cell states `c_t`, `N × H`.
    pub cells: Tensor,
    /// `tanh(c_t)`, `N × H`.
    pub cells_tanh: Tensor,
    /// Hidden states `h_t`, `N × H`.
    pub hidden: Tensor,
}

pub fn lstm_forward(p: &LstmParams, seq: &Tensor) -> Result<LstmCache> {
    let (n, input, h) = (seq.rows(), p.input_dim(), p.hidden_dim());
    if seq.cols() != input {
        return Err(Error::shape("lstm input", &[n, input], seq.shape()));
    }
    p.w_hidden.expect_shape("lstm recurrent weight", &[h, 4 * h])?;
    p.bias.expect_shape("lstm bias", &[4 * h])?;

    let mut gates = Tensor::zeros(&[n, 4 * h]);
    for t in 0..n {
        gates.row_mut(t).copy_from_slice(p.bias.data());
    }
    matmul_acc(seq.data(), p.w_input.data(), gates.data_mut(), n, input, 4 * h);

    let mut cells = Tensor::zeros(&[n, h]);
    let mut cells_tanh = Tensor::zeros(&[n, h]);
    let mut hidden = Tensor::zeros(&[n, h]);
    let mut h_prev = vec![0.0; h];
    let mut c_prev = vec![0.0; h];
    for t in 0..n {
        let z = gates.row_mut(t);
        for (k, &hk) in h_prev.iter().enumerate() {
            if hk != 0.0 {
                axpy(hk, p.w_hidden.row(k), z);
            }
        }
        for j in 0..h {
            z[j] = sigmoid_scalar(z[j]);
            z[h + j] = sigmoid_scalar(z[h + j]);
            z[2 * h + j] = z[2 * h + j].tanh();
            z[3 * h + j] = sigmoid_scalar(z[3 * h + j]);
        }
        let z = gates.row(t);
        let c = cells.row_mut(t);
        for j in 0..h {
            c[j] = z[h + j] * c_prev[j] + z[j] * z[2 * h + j];
        }
        let ct = cells_tanh.row_mut(t);
        for j in 0..h {
            ct[j] = c[j].tanh();
        }
        let hrow = hidden.row_mut(t);
        for j in 0..h {
            hrow[j] = z[3 * h + j] * ct[j];
        }
        h_prev.copy_from_slice(hrow);
        c_prev.copy_from_slice(cells.row(t));
    }
    Ok(LstmCache {
        gates,
        cells,
        cells_tanh,
        hidden,
    })
}

/// Backpropagation through time over all N steps. Accumulates parameter
/// gradients into `grads` and returns dL/d(input sequence).
pub fn lstm_backward(
    p: &LstmParams,
    seq: &Tensor,
    cache: &LstmCache,
    grad_hidden: &Tensor,
    grads: &mut LstmParams,
) -> Tensor {
    let (n, input, h) = (seq.rows(), p.input_dim(), p.hidden_dim());
    debug_assert_eq!(grad_hidden.shape(), &[n, h]);
    let mut dz = Tensor::zeros(&[n, 4 * h]);
    let mut dh_next = vec![0.0; h];
    let mut dc_next = vec![0.0; h];
    let zeros = vec![0.0; h];

    for t in (0..n).rev() {
        let z = cache.gates.row(t);
        let ct = cache.cells_tanh.row(t);
        let c_prev = if t > 0 { cache.cells.row(t - 1) } else { &zeros[..] };
        let gh = grad_hidden.row(t);
        let dzt = dz.row_mut(t);
        for j in 0..h {
            let (i, f, g, o) = (z[j], z[h + j], z[2 * h + j], z[3 * h + j]);
            let dh = gh[j] + dh_next[j];
            let d_o = dh * ct[j];
            let dc = dh * o * (1.0 - ct[j] * ct[j]) + dc_next[j];
            dzt[j] = dc * g * i * (1.0 - i);
            dzt[h + j] = dc * c_prev[j] * f * (1.0 - f);
            dzt[2 * h + j] = dc * i * (1.0 - g * g);
            dzt[3 * h + j] = d_o * o * (1.0 - o);
            dc_next[j] = dc * f;
        }
        dh_next.iter_mut().for_each(|v| *v = 0.0);
        matmul_a_bt_acc(dzt, p.w_hidden.data(), &mut dh_next, 1, h, 4 * h);
        if t > 0 {
            let h_prev = cache.hidden.row(t - 1);
            for (k, &hk) in h_prev.iter().enumerate() {
                if hk != 0.0 {
                    axpy(hk, dzt, grads.w_hidden.row_mut(k));
                }
            }
        }
    }

    matmul_at_b_acc(seq.data(), dz.data(), grads.w_input.data_mut(), n, input, 4 * h);
    for t in 0..n {
        axpy(1.0, dz.row(t), grads.bias.data_mut());
    }
    let mut grad_x = Tensor::zeros(&[n, input]);
    matmul_a_bt_acc(dz.data(), p.w_input.data(), grad_x.data_mut(), n, input, 4 * h);
    grad_x
}
