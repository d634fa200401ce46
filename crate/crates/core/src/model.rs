//! CNN-LSTM2 and CNN-LSTM2-STACK.
//!
//! Both variants share the trunk
//!
//! ```text
//! v   = lookup(ids)                      N × d
//! h1  = conv(window5(v))                 N × c
//! h2  = activation(h1)                   N × c
//! h3  = lstm1(h2), h4 = lstm2(h3)        N × H
//! h5  = dropout(h4)                      N × H
//! h6  = masked_mean(h5)                  H
//! h7  = output(h6)                       M
//! p   = softmax(h7)
//! ```
//!
//! The stack variant adds a per-position path from the raw embeddings,
//! `h9_i = sigmoid(stack(v_i))`, and pools it into the same vector:
//! `h6 = masked_mean(h5) + masked_mean(h9)` (same divisor for both terms).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::EncodedSample;
use crate::label::{SentimentLabel, NUM_CLASSES};
use crate::nn::{
    cross_entropy, dropout, embedding_backward, embedding_forward, lstm_backward, lstm_forward, masked_mean,
    masked_mean_backward, sigmoid, softmax, softmax_cross_entropy_grad, window_concat, window_concat_backward,
    Activation, Affine, Dropout, LstmCache, LstmParams, MeanBy, Parameters,
};
use crate::nn::{grad_check, GradCheckConfig, GradCheckReport};
use crate::tensor::{axpy, SeededRng, Tensor};

/// LSTM forget-gate bias at initialization.
pub const FORGET_BIAS_INIT: f64 = 1.0;
/// Embedding entries are drawn uniformly from ±this value.
pub const EMBED_INIT_RANGE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Parts I and II.
    CnnLstm2,
    /// Parts I, II and the stack path.
    CnnLstm2Stack,
}

impl ModelKind {
    pub const ALL: [ModelKind; 2] = [ModelKind::CnnLstm2, ModelKind::CnnLstm2Stack];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::CnnLstm2 => "cnn_lstm2",
            ModelKind::CnnLstm2Stack => "cnn_lstm2_stack",
        }
    }

    /// Column label used in report grids.
    pub fn short(self) -> &'static str {
        match self {
            ModelKind::CnnLstm2 => "M1",
            ModelKind::CnnLstm2Stack => "M2",
        }
    }

    pub fn has_stack(self) -> bool {
        self == ModelKind::CnnLstm2Stack
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('-', "_");
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == norm || k.short().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown model kind {s:?} (expected cnn_lstm2|cnn_lstm2_stack)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub embed_dim: usize,
    pub conv_out: usize,
    pub lstm_hidden: usize,
    pub stack_dim: usize,
    pub num_classes: usize,
    pub window: usize,
    pub dropout_rate: f64,
    pub seq_len: usize,
    pub activation: Activation,
    pub mean_by: MeanBy,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            embed_dim: 100,
            conv_out: 100,
            lstm_hidden: 128,
            stack_dim: 128,
            num_classes: NUM_CLASSES,
            window: 5,
            dropout_rate: 0.5,
            seq_len: 64,
            activation: Activation::Relu,
            mean_by: MeanBy::Padded,
        }
    }
}

impl ModelConfig {
    /// d=4, c=4, H=5, N=7, dropout off: the gradient-check configuration.
    pub fn tiny() -> Self {
        ModelConfig {
            embed_dim: 4,
            conv_out: 4,
            lstm_hidden: 5,
            stack_dim: 5,
            seq_len: 7,
            dropout_rate: 0.0,
            ..ModelConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.window == 0 || self.window.is_multiple_of(2) {
            return fail(format!("window must be odd, got {}", self.window));
        }
        if self.stack_dim != self.lstm_hidden {
            return fail(format!(
                "stack_dim ({}) must equal lstm_hidden ({})",
                self.stack_dim, self.lstm_hidden
            ));
        }
        if self.num_classes != NUM_CLASSES {
            return fail(format!("num_classes must be {NUM_CLASSES}, got {}", self.num_classes));
        }
        if self.embed_dim == 0 || self.conv_out == 0 || self.lstm_hidden == 0 || self.seq_len == 0 {
            return fail("embed_dim, conv_out, lstm_hidden and seq_len must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return fail(format!("dropout_rate must be in [0, 1), got {}", self.dropout_rate));
        }
        Ok(())
    }
}

/// All learnable tensors of one model. Gradient sets share this layout
/// (see [`GradSet`]).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub kind: ModelKind,
    /// `V × d`
    pub embedding: Tensor,
    /// `(window·d) × c`
    pub conv: Affine,
    pub lstm1: LstmParams,
    pub lstm2: LstmParams,
    /// `d × H`, stack variant only.
    pub stack: Option<Affine>,
    /// `H × M`
    pub output: Affine,
}

/// Gradients with the exact layout of [`ModelParams`].
pub type GradSet = ModelParams;

impl ModelParams {
    /// All-zero tensors shaped for `(kind, config, vocab_size)`.
    pub fn zeros(kind: ModelKind, config: &ModelConfig, vocab_size: usize) -> Self {
        let (d, c, h, m) = (
            config.embed_dim,
            config.conv_out,
            config.lstm_hidden,
            config.num_classes,
        );
        ModelParams {
            kind,
            embedding: Tensor::zeros(&[vocab_size, d]),
            conv: Affine::zeros(config.window * d, c),
            lstm1: LstmParams::zeros(c, h),
            lstm2: LstmParams::zeros(h, h),
            stack: kind.has_stack().then(|| Affine::zeros(d, config.stack_dim)),
            output: Affine::zeros(h, m),
        }
    }

    /// Embeddings uniform in ±0.1; conv, stack and output weights uniform in
    /// ±sqrt(6/(fan_in+fan_out)); LSTM forget bias 1.0, other biases zero.
    /// Tensors are drawn in parameter order.
    pub fn init(kind: ModelKind, config: &ModelConfig, vocab_size: usize, rng: &mut SeededRng) -> Result<Self> {
        config.validate()?;
        if vocab_size < 2 {
            return Err(Error::Config(format!(
                "vocabulary size must be at least 2, got {vocab_size}"
            )));
        }
        let (d, c, h, m) = (
            config.embed_dim,
            config.conv_out,
            config.lstm_hidden,
            config.num_classes,
        );
        let mut embedding = Tensor::zeros(&[vocab_size, d]);
        for e in embedding.data_mut() {
            *e = rng.uniform(-EMBED_INIT_RANGE, EMBED_INIT_RANGE);
        }
        let conv = Affine::glorot(config.window * d, c, rng);
        let lstm1 = LstmParams::init(c, h, FORGET_BIAS_INIT, rng);
        let lstm2 = LstmParams::init(h, h, FORGET_BIAS_INIT, rng);
        let stack = kind.has_stack().then(|| Affine::glorot(d, config.stack_dim, rng));
        let output = Affine::glorot(h, m, rng);
        Ok(ModelParams {
            kind,
            embedding,
            conv,
            lstm1,
            lstm2,
            stack,
            output,
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.embedding.rows()
    }

    pub fn zeros_like(&self) -> GradSet {
        let mut g = self.clone();
        for (_, t) in g.named_tensors_mut() {
            t.fill(0.0);
        }
        g
    }

    pub fn is_finite(&self) -> bool {
        self.named_tensors().iter().all(|(_, t)| t.is_finite())
    }

    /// Checks every tensor against the shapes implied by `config`.
    pub fn check_shapes(&self, config: &ModelConfig) -> Result<()> {
        let expected = ModelParams::zeros(self.kind, config, self.vocab_size());
        for ((name, a), (_, b)) in self.named_tensors().iter().zip(expected.named_tensors()) {
            if a.shape() != b.shape() {
                return Err(Error::Input(format!(
                    "parameter {name} has shape {:?}, config implies {:?}",
                    a.shape(),
                    b.shape()
                )));
            }
        }
        if self.stack.is_some() != self.kind.has_stack() {
            return Err(Error::Input(format!(
                "stack path presence does not match kind {}",
                self.kind
            )));
        }
        Ok(())
    }

    /// `self += scale · other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &ModelParams, scale: f64) {
        let src = other.named_tensors();
        for (k, (_, t)) in self.named_tensors_mut().into_iter().enumerate() {
            axpy(scale, src[k].1.data(), t.data_mut());
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for (_, t) in self.named_tensors_mut() {
            t.scale(factor);
        }
    }

    /// Drops the stack path, giving the base-variant view of shared tensors.
    pub fn without_stack(&self) -> ModelParams {
        ModelParams {
            kind: ModelKind::CnnLstm2,
            stack: None,
            ..self.clone()
        }
    }
}

impl Parameters for ModelParams {
    /// Canonical order: embedding, conv, lstm1, lstm2, [stack], output.
    fn named_tensors(&self) -> Vec<(&str, &Tensor)> {
        let mut v: Vec<(&str, &Tensor)> = vec![
            ("embedding", &self.embedding),
            ("conv.weight", &self.conv.weight),
            ("conv.bias", &self.conv.bias),
            ("lstm1.w_input", &self.lstm1.w_input),
            ("lstm1.w_hidden", &self.lstm1.w_hidden),
            ("lstm1.bias", &self.lstm1.bias),
            ("lstm2.w_input", &self.lstm2.w_input),
            ("lstm2.w_hidden", &self.lstm2.w_hidden),
            ("lstm2.bias", &self.lstm2.bias),
        ];
        if let Some(s) = &self.stack {
            v.push(("stack.weight", &s.weight));
            v.push(("stack.bias", &s.bias));
        }
        v.push(("output.weight", &self.output.weight));
        v.push(("output.bias", &self.output.bias));
        v
    }

    fn named_tensors_mut(&mut self) -> Vec<(&str, &mut Tensor)> {
        let mut v: Vec<(&str, &mut Tensor)> = vec![
            ("embedding", &mut self.embedding),
            ("conv.weight", &mut self.conv.weight),
            ("conv.bias", &mut self.conv.bias),
            ("lstm1.w_input", &mut self.lstm1.w_input),
            ("lstm1.w_hidden", &mut self.lstm1.w_hidden),
            ("lstm1.bias", &mut self.lstm1.bias),
            ("lstm2.w_input", &mut self.lstm2.w_input),
            ("lstm2.w_hidden", &mut self.lstm2.w_hidden),
            ("lstm2.bias", &mut self.lstm2.bias),
        ];
        if let Some(s) = &mut self.stack {
            v.push(("stack.weight", &mut s.weight));
            v.push(("stack.bias", &mut s.bias));
        }
        v.push(("output.weight", &mut self.output.weight));
        v.push(("output.bias", &mut self.output.bias));
        v
    }
}

/// Activations of one forward pass, kept for backward and inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub ids: Vec<usize>,
    pub mask: Vec<f64>,
    /// Looked-up embeddings `v`, `N × d`.
    pub embeds: Tensor,
    /// Window rows fed to the convolution, `N × window·d`.
    pub windows: Tensor,
    /// Convolution output (pre-activation).
    pub h1: Tensor,
    /// Activation output.
    pub h2: Tensor,
    pub lstm1: LstmCache,
    pub lstm2: LstmCache,
    /// Dropout output and mask.
    pub dropout: Dropout,
    /// Pooled vector.
    pub h6: Vec<f64>,
    /// Logits.
    pub h7: Vec<f64>,
    pub probs: Vec<f64>,
    /// Stack-path pre-activation, `N × H` (stack variant only).
    pub h8: Option<Tensor>,
    /// Stack-path sigmoid output, `N × H` (stack variant only).
    pub h9: Option<Tensor>,
}

impl ForwardTrace {
    pub fn h3(&self) -> &Tensor {
        &self.lstm1.hidden
    }

    pub fn h4(&self) -> &Tensor {
        &self.lstm2.hidden
    }

    pub fn h5(&self) -> &Tensor {
        &self.dropout.output
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub probs: Vec<f64>,
    pub label: SentimentLabel,
}

fn check_sample(params: &ModelParams, sample: &EncodedSample) -> Result<()> {
    if sample.ids.is_empty() || sample.ids.len() != sample.mask.len() {
        return Err(Error::Input(format!(
            "sample {}: ids ({}) and mask ({}) must be non-empty and equal length",
            sample.id,
            sample.ids.len(),
            sample.mask.len()
        )));
    }
    if let Some(&bad) = sample.ids.iter().find(|&&i| i >= params.vocab_size()) {
        return Err(Error::IdOutOfRange {
            id: bad,
            vocab_size: params.vocab_size(),
        });
    }
    Ok(())
}

/// Runs the network on one sample. In eval mode (`training == false`)
/// dropout is the identity and `rng` is untouched.
pub fn forward(
    params: &ModelParams,
    config: &ModelConfig,
    sample: &EncodedSample,
    training: bool,
    rng: &mut SeededRng,
) -> Result<ForwardTrace> {
    check_sample(params, sample)?;
    let mask = sample.mask_f64();

    let embeds = embedding_forward(&params.embedding, &sample.ids)?;
    let windows = window_concat(&embeds, params.embedding.row(0), config.window)?;
    let h1 = params.conv.forward(&windows)?;
    let h2 = config.activation.forward(&h1);
    let lstm1 = lstm_forward(&params.lstm1, &h2)?;
    let lstm2 = lstm_forward(&params.lstm2, &lstm1.hidden)?;
    let drop = dropout(&lstm2.hidden, config.dropout_rate, rng, training)?;
    let mut h6 = masked_mean(&drop.output, &mask, config.mean_by);

    let (h8, h9) = match &params.stack {
        Some(stack) => {
            let h8 = stack.forward(&embeds)?;
            let h9 = sigmoid(&h8);
            let pooled = masked_mean(&h9, &mask, config.mean_by);
            axpy(1.0, &pooled, &mut h6);
            (Some(h8), Some(h9))
        }
        None => (None, None),
    };

    let h6_row = Tensor::from_vec(&[1, h6.len()], h6.clone())?;
    let h7 = params.output.forward(&h6_row)?.into_data();
    let probs = softmax(&h7);

    Ok(ForwardTrace {
        ids: sample.ids.clone(),
        mask,
        embeds,
        windows,
        h1,
        h2,
        lstm1,
        lstm2,
        dropout: drop,
        h6,
        h7,
        probs,
        h8,
        h9,
    })
}

/// Accumulates dL/dθ for `L = −ln p[gold]` into `grads`.
pub fn backward_into(
    params: &ModelParams,
    config: &ModelConfig,
    trace: &ForwardTrace,
    gold: SentimentLabel,
    grads: &mut GradSet,
) {
    let dlogits = softmax_cross_entropy_grad(&trace.probs, gold.index());
    let h6_row = Tensor::from_vec(&[1, trace.h6.len()], trace.h6.clone()).expect("pooled vector");
    let dlogits_row = Tensor::from_vec(&[1, dlogits.len()], dlogits).expect("logit gradient");
    let dh6 = params.output.backward(&h6_row, &dlogits_row, &mut grads.output);

    // Both pooled terms receive the same per-position gradient.
    let dpooled = masked_mean_backward(dh6.data(), &trace.mask, config.mean_by);

    let mut dv_stack = None;
    if let (Some(stack), Some(h9)) = (&params.stack, &trace.h9) {
        let mut dh8 = dpooled.clone();
        for (g, &s) in dh8.data_mut().iter_mut().zip(h9.data()) {
            *g *= s * (1.0 - s);
        }
        let gstack = grads.stack.as_mut().expect("stack gradient slot");
        dv_stack = Some(stack.backward(&trace.embeds, &dh8, gstack));
    }

    let dh4 = trace.dropout.backward(&dpooled);
    let dh3 = lstm_backward(&params.lstm2, &trace.lstm1.hidden, &trace.lstm2, &dh4, &mut grads.lstm2);
    let dh2 = lstm_backward(&params.lstm1, &trace.h2, &trace.lstm1, &dh3, &mut grads.lstm1);
    let dh1 = config.activation.backward(&trace.h1, &dh2);
    let dwindows = params.conv.backward(&trace.windows, &dh1, &mut grads.conv);
    let (mut dv, dnone) = window_concat_backward(&dwindows, config.window);
    if let Some(ds) = dv_stack {
        dv.add_assign(&ds);
    }
    embedding_backward(&mut grads.embedding, &trace.ids, &dv);
    axpy(1.0, &dnone, grads.embedding.row_mut(0));
}

/// Loss and fresh gradients for one traced sample.
pub fn backward(
    params: &ModelParams,
    config: &ModelConfig,
    trace: &ForwardTrace,
    gold: SentimentLabel,
) -> (f64, GradSet) {
    let mut grads = params.zeros_like();
    backward_into(params, config, trace, gold, &mut grads);
    (cross_entropy(&trace.probs, gold.index()).loss, grads)
}

/// Mean cross-entropy over `batch` and the mean of per-sample gradients.
/// Each sample's dropout mask comes from its own child of `rng`, forked in
/// batch order.
pub fn loss_and_grads(
    params: &ModelParams,
    config: &ModelConfig,
    batch: &[&EncodedSample],
    rng: &mut SeededRng,
) -> Result<(f64, GradSet)> {
    if batch.is_empty() {
        return Err(Error::Input("empty batch".into()));
    }
    let mut grads = params.zeros_like();
    let mut total = 0.0;
    for sample in batch {
        let mut sample_rng = rng.fork();
        let trace = forward(params, config, sample, true, &mut sample_rng)?;
        let loss = cross_entropy(&trace.probs, sample.label.index()).loss;
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("loss of sample {}", sample.id)));
        }
        total += loss;
        backward_into(params, config, &trace, sample.label, &mut grads);
    }
    let n = batch.len() as f64;
    grads.scale(1.0 / n);
    Ok((total / n, grads))
}

/// Eval-mode class probabilities and argmax label (lowest index on ties).
pub fn predict(params: &ModelParams, config: &ModelConfig, sample: &EncodedSample) -> Result<Prediction> {
    // Eval mode never draws from the generator.
    let mut unused = SeededRng::new(0);
    let trace = forward(params, config, sample, false, &mut unused)?;
    Ok(Prediction {
        label: SentimentLabel::argmax(&trace.probs),
        probs: trace.probs,
    })
}

/// Half-width of the uniform draw used for gradient-check instances.
pub const GRAD_CHECK_PARAM_RANGE: f64 = 0.5;
/// Difference step for full-model checks. Smaller steps let loss roundoff
/// (~1e-16·|L|/eps) dominate entries near the 1e-8 floor; larger ones start
/// straddling ReLU kinks.
pub const MODEL_GRAD_CHECK_EPS: f64 = 3e-4;

/// Default full-model check settings for `seed`.
pub fn model_grad_check_config(seed: u64) -> GradCheckConfig {
    GradCheckConfig {
        eps: MODEL_GRAD_CHECK_EPS,
        seed,
        ..GradCheckConfig::default()
    }
}

/// Full-model finite-difference check on one random instance: every
/// parameter uniform in ±[`GRAD_CHECK_PARAM_RANGE`], dropout off, one
/// sample with `seq_len - 2` valid random ids.
///
/// Training-scale init leaves many recurrent gradients near 1e-8, where the
/// relative-error floor turns difference roundoff into ~1e-3 error; the
/// wider draw moves most of them well above it.
pub fn model_grad_check(
    kind: ModelKind,
    config: &ModelConfig,
    vocab_size: usize,
    check: &GradCheckConfig,
) -> Result<GradCheckReport> {
    let config = ModelConfig {
        dropout_rate: 0.0,
        ..*config
    };
    config.validate()?;
    let mut rng = SeededRng::new(check.seed);
    let mut params = ModelParams::zeros(kind, &config, vocab_size);
    for (_, t) in params.named_tensors_mut() {
        for v in t.data_mut() {
            *v = rng.uniform(-GRAD_CHECK_PARAM_RANGE, GRAD_CHECK_PARAM_RANGE);
        }
    }
    let n = config.seq_len;
    let valid = n.saturating_sub(2).max(1);
    let ids = (0..n)
        .map(|i| if i < valid { 1 + rng.below(vocab_size - 1) } else { 0 })
        .collect();
    let mask = (0..n).map(|i| u8::from(i < valid)).collect();
    let label = SentimentLabel::from_index(rng.below(NUM_CLASSES)).expect("class index");
    let sample = EncodedSample::new("gradcheck", label, "gradcheck", (ids, mask));

    let (_, grads) = loss_and_grads(&params, &config, &[&sample], &mut SeededRng::new(0))?;
    grad_check(
        &mut params,
        &grads,
        |q| Ok(loss_and_grads(q, &config, &[&sample], &mut SeededRng::new(0))?.0),
        check,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(ids: &[usize], valid: usize, label: SentimentLabel) -> EncodedSample {
        let mask = (0..ids.len()).map(|i| u8::from(i < valid)).collect();
        let mut ids = ids.to_vec();
        ids[valid..].iter_mut().for_each(|i| *i = 0);
        EncodedSample::new("s", label, "d", (ids, mask))
    }

    fn tiny_sample() -> EncodedSample {
        sample(&[3, 7, 7, 12, 19, 0, 0], 5, SentimentLabel::Sadness)
    }

    #[test]
    fn zero_params_give_bias_logits() {
        let config = ModelConfig::tiny();
        for kind in ModelKind::ALL {
            let mut p = ModelParams::zeros(kind, &config, 20);
            let mut rng = SeededRng::new(0);
            let t = forward(&p, &config, &tiny_sample(), false, &mut rng).unwrap();
            assert!(t.h4().data().iter().all(|&v| v == 0.0));
            if kind == ModelKind::CnnLstm2 {
                assert!(t.probs.iter().all(|&q| (q - 1.0 / 6.0).abs() < 1e-15));
                p.output.bias = Tensor::vector(vec![1.0, 0.0, -1.0, 2.0, 0.5, 0.0]);
                let t = forward(&p, &config, &tiny_sample(), false, &mut rng).unwrap();
                assert_eq!(t.h7, vec![1.0, 0.0, -1.0, 2.0, 0.5, 0.0]);
            }
        }
    }

    #[test]
    fn uniform_model_loss_is_ln6() {
        let config = ModelConfig::tiny();
        let p = ModelParams::zeros(ModelKind::CnnLstm2, &config, 20);
        let batch = [
            sample(&[1, 2, 3, 0, 0, 0, 0], 3, SentimentLabel::Anger),
            sample(&[4, 5, 6, 7, 0, 0, 0], 4, SentimentLabel::Joy),
        ];
        let refs: Vec<&EncodedSample> = batch.iter().collect();
        let (loss, _) = loss_and_grads(&p, &config, &refs, &mut SeededRng::new(1)).unwrap();
        assert!((loss - 6f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn init_is_seeded_and_in_range() {
        let config = ModelConfig::tiny();
        let a = ModelParams::init(ModelKind::CnnLstm2Stack, &config, 20, &mut SeededRng::new(7)).unwrap();
        let b = ModelParams::init(ModelKind::CnnLstm2Stack, &config, 20, &mut SeededRng::new(7)).unwrap();
        let c = ModelParams::init(ModelKind::CnnLstm2Stack, &config, 20, &mut SeededRng::new(8)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);

        let (d, cc, h) = (4.0, 4.0, 5.0);
        let lim = |fi: f64, fo: f64| (6.0 / (fi + fo)).sqrt();
        let within = |t: &Tensor, l: f64| t.data().iter().all(|v| v.abs() <= l);
        assert!(within(&a.embedding, 0.1));
        assert!(within(&a.conv.weight, lim(5.0 * d, cc)));
        assert!(within(&a.stack.as_ref().unwrap().weight, lim(d, h)));
        assert!(within(&a.output.weight, lim(h, 6.0)));
        assert!(within(&a.lstm1.w_input, lim(cc, h)));
        assert!(within(&a.lstm2.w_hidden, lim(h, h)));
        assert!(a.conv.bias.data().iter().all(|&v| v == 0.0));
        let fb = &a.lstm2.bias.data()[5..10];
        assert!(fb.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn init_rejects_bad_inputs() {
        let config = ModelConfig::tiny();
        assert!(ModelParams::init(ModelKind::CnnLstm2, &config, 1, &mut SeededRng::new(0)).is_err());
        let bad = ModelConfig { stack_dim: 3, ..config };
        assert!(ModelParams::init(ModelKind::CnnLstm2, &bad, 20, &mut SeededRng::new(0)).is_err());
    }

    #[test]
    fn eval_forward_is_bitwise_repeatable() {
        let config = ModelConfig {
            dropout_rate: 0.5,
            ..ModelConfig::tiny()
        };
        let p = ModelParams::init(ModelKind::CnnLstm2Stack, &config, 20, &mut SeededRng::new(3)).unwrap();
        let s = tiny_sample();
        let a = forward(&p, &config, &s, false, &mut SeededRng::new(1)).unwrap();
        let b = forward(&p, &config, &s, false, &mut SeededRng::new(99)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn huge_negative_stack_bias_reduces_to_base() {
        let config = ModelConfig::tiny();
        let mut p = ModelParams::init(ModelKind::CnnLstm2Stack, &config, 20, &mut SeededRng::new(5)).unwrap();
        p.stack.as_mut().unwrap().bias.fill(-1e6);
        let base = p.without_stack();
        let s = tiny_sample();
        let mut rng = SeededRng::new(0);
        let ts = forward(&p, &config, &s, false, &mut rng).unwrap();
        let tb = forward(&base, &config, &s, false, &mut rng).unwrap();
        for (a, b) in ts.h6.iter().zip(&tb.h6) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn stack_term_decomposes() {
        let config = ModelConfig::tiny();
        let p = ModelParams::init(ModelKind::CnnLstm2Stack, &config, 20, &mut SeededRng::new(6)).unwrap();
        let s = tiny_sample();
        let mut rng = SeededRng::new(0);
        let ts = forward(&p, &config, &s, false, &mut rng).unwrap();
        let tb = forward(&p.without_stack(), &config, &s, false, &mut rng).unwrap();

        // (1/N) Σ_i σ(W_sᵀ v_i + b_s) · ms_i, recomputed from scratch.
        let stack = p.stack.as_ref().unwrap();
        let (d, h, n) = (4, 5, 7);
        let mut expected = vec![0.0; h];
        for i in 0..n {
            if s.mask[i] == 0 {
                continue;
            }
            let v = p.embedding.row(s.ids[i]);
            for j in 0..h {
                let mut z = stack.bias.data()[j];
                for k in 0..d {
                    z += stack.weight.data()[k * h + j] * v[k];
                }
                expected[j] += 1.0 / (1.0 + (-z).exp()) / n as f64;
            }
        }
        for j in 0..h {
            assert!((ts.h6[j] - tb.h6[j] - expected[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn duplicated_batch_matches_single() {
        let config = ModelConfig::tiny();
        let p = ModelParams::init(ModelKind::CnnLstm2Stack, &config, 20, &mut SeededRng::new(2)).unwrap();
        let s = tiny_sample();
        let (l1, g1) = loss_and_grads(&p, &config, &[&s], &mut SeededRng::new(0)).unwrap();
        let (l2, g2) = loss_and_grads(&p, &config, &[&s, &s], &mut SeededRng::new(0)).unwrap();
        assert!((l1 - l2).abs() <= 1e-15 * l1.abs());
        // Repeated ids make the scatter-add order differ, so allow a few ulps.
        for ((_, a), (_, b)) in g1.named_tensors().iter().zip(g2.named_tensors()) {
            for (x, y) in a.data().iter().zip(b.data()) {
                assert!((x - y).abs() <= 1e-14 * x.abs().max(1e-300), "{x} vs {y}");
            }
        }
    }

    #[test]
    fn full_model_gradients_pass_finite_differences() {
        let config = ModelConfig::tiny();
        for kind in ModelKind::ALL {
            for seed in 0..4 {
                let report = model_grad_check(kind, &config, 20, &model_grad_check_config(seed)).unwrap();
                assert!(report.max_rel_error < 1e-4, "{kind} seed {seed}: {report:?}");
            }
        }
    }

    #[test]
    fn predict_is_argmax_and_ignores_dropout_rate() {
        let config = ModelConfig::tiny();
        let p = ModelParams::init(ModelKind::CnnLstm2, &config, 20, &mut SeededRng::new(4)).unwrap();
        let s = tiny_sample();
        let a = predict(&p, &config, &s).unwrap();
        let b = predict(
            &p,
            &ModelConfig {
                dropout_rate: 0.9,
                ..config
            },
            &s,
        )
        .unwrap();
        assert_eq!(a, b);
        assert_eq!(a.label, SentimentLabel::argmax(&a.probs));
        assert!((a.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn out_of_range_ids_rejected() {
        let config = ModelConfig::tiny();
        let p = ModelParams::zeros(ModelKind::CnnLstm2, &config, 10);
        let s = sample(&[3, 12, 0, 0, 0, 0, 0], 2, SentimentLabel::Love);
        assert!(matches!(
            predict(&p, &config, &s),
            Err(Error::IdOutOfRange { id: 12, .. })
        ));
    }

    #[test]
    fn parameter_order_is_canonical() {
        let p = ModelParams::zeros(ModelKind::CnnLstm2Stack, &ModelConfig::tiny(), 20);
        let names: Vec<&str> = p.named_tensors().iter().map(|(n, _)| *n).collect();
        assert_eq!(
            names,
            [
                "embedding",
                "conv.weight",
                "conv.bias",
                "lstm1.w_input",
                "lstm1.w_hidden",
                "lstm1.bias",
                "lstm2.w_input",
                "lstm2.w_hidden",
                "lstm2.bias",
                "stack.weight",
                "stack.bias",
                "output.weight",
                "output.bias"
            ]
        );
        let base = ModelParams::zeros(ModelKind::CnnLstm2, &ModelConfig::tiny(), 20);
        assert_eq!(base.named_tensors().len(), 11);
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("cnn_lstm2".parse::<ModelKind>().unwrap(), ModelKind::CnnLstm2);
        assert_eq!(
            "CNN-LSTM2-STACK".parse::<ModelKind>().unwrap(),
            ModelKind::CnnLstm2Stack
        );
        assert_eq!("m2".parse::<ModelKind>().unwrap(), ModelKind::CnnLstm2Stack);
        assert!("lstm".parse::<ModelKind>().is_err());
    }
}
