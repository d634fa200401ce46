//! Finite-difference checks of each layer in isolation.
//!
//! Every check draws random inputs and parameters, projects the layer
//! output onto a random tensor `r` (so the upstream gradient is `r`), and
//! compares the layer's backward pass with central differences of
//! `Σ r ⊙ output`, inputs included.

use crate::error::Result;
use crate::nn::{
    cross_entropy, dropout, embedding_backward, embedding_forward, grad_check, lstm_backward, lstm_forward,
    masked_mean, masked_mean_backward, sigmoid, softmax, softmax_cross_entropy_grad, window_concat,
    window_concat_backward, Activation, Affine, GradCheckConfig, GradCheckReport, LstmParams, MeanBy, NamedTensors,
};
use crate::tensor::{SeededRng, Tensor};

/// Step for layer checks. Every layer is smooth at the drawn points
/// (ReLU inputs are kept at least 0.1 from the kink).
pub const LAYER_GRAD_CHECK_EPS: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct LayerCheck {
    pub layer: &'static str,
    /// Backpropagation through time is involved.
    pub bptt: bool,
    pub report: GradCheckReport,
}

/// Dimensions of the checked layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerDims {
    pub vocab: usize,
    pub embed: usize,
    pub conv: usize,
    pub hidden: usize,
    pub seq_len: usize,
    pub window: usize,
    pub classes: usize,
}

impl Default for LayerDims {
    fn default() -> Self {
        LayerDims {
            vocab: 20,
            embed: 4,
            conv: 4,
            hidden: 5,
            seq_len: 7,
            window: 5,
            classes: 6,
        }
    }
}

fn random(rng: &mut SeededRng, shape: &[usize], scale: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.uniform(-scale, scale)).collect()).expect("shape product")
}

fn dot(a: &Tensor, b: &Tensor) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

fn named(items: Vec<(&str, Tensor)>) -> NamedTensors {
    items.into_iter().map(|(n, t)| (n.to_string(), t)).collect()
}

fn affine(p: &NamedTensors, w: usize) -> Affine {
    Affine {
        weight: p[w].1.clone(),
        bias: p[w + 1].1.clone(),
    }
}

fn check(
    p: &mut NamedTensors,
    g: &NamedTensors,
    loss: impl FnMut(&NamedTensors) -> Result<f64>,
    seed: u64,
) -> Result<GradCheckReport> {
    let cfg = GradCheckConfig {
        eps: LAYER_GRAD_CHECK_EPS,
        seed,
        ..GradCheckConfig::default()
    };
    grad_check(p, g, loss, &cfg)
}

/// Mask with `valid` leading ones.
fn prefix_mask(n: usize, valid: usize) -> Vec<f64> {
    (0..n).map(|i| if i < valid { 1.0 } else { 0.0 }).collect()
}

/// Runs every layer check with inputs drawn from `seed`.
pub fn layer_grad_checks(dims: LayerDims, seed: u64) -> Result<Vec<LayerCheck>> {
    let LayerDims {
        vocab,
        embed,
        conv,
        hidden,
        seq_len: n,
        window,
        classes,
    } = dims;
    let mut rng = SeededRng::new(seed);
    let mut out = Vec::new();
    let mut push = |layer, bptt, report| out.push(LayerCheck { layer, bptt, report });

    // Embedding lookup and window concatenation; row 0 doubles as the
    // out-of-range filler, as in the model.
    {
        let ids: Vec<usize> = (0..n).map(|i| if i + 2 < n { rng.below(vocab) } else { 0 }).collect();
        let r = random(&mut rng, &[n, window * embed], 1.0);
        let mut p = named(vec![("table", random(&mut rng, &[vocab, embed], 1.0))]);
        let f = |p: &NamedTensors| -> Result<f64> {
            let e = embedding_forward(&p[0].1, &ids)?;
            Ok(dot(&window_concat(&e, p[0].1.row(0), window)?, &r))
        };
        let (de, dnone) = window_concat_backward(&r, window);
        let mut g = p[0].1.zeros_like();
        embedding_backward(&mut g, &ids, &de);
        g.row_mut(0).iter_mut().zip(&dnone).for_each(|(a, b)| *a += b);
        push(
            "embedding+window",
            false,
            check(&mut p, &named(vec![("table", g)]), f, seed)?,
        );
    }

    // Convolution as an affine map over windows.
    {
        let r = random(&mut rng, &[n, conv], 1.0);
        let mut p = named(vec![
            ("x", random(&mut rng, &[n, window * embed], 1.0)),
            ("weight", random(&mut rng, &[window * embed, conv], 0.5)),
            ("bias", random(&mut rng, &[conv], 0.5)),
        ]);
        let f = |p: &NamedTensors| Ok(dot(&affine(p, 1).forward(&p[0].1)?, &r));
        let a = affine(&p, 1);
        let mut ga = Affine::zeros(window * embed, conv);
        let dx = a.backward(&p[0].1, &r, &mut ga);
        let g = named(vec![("x", dx), ("weight", ga.weight), ("bias", ga.bias)]);
        push("conv", false, check(&mut p, &g, f, seed)?);
    }

    for (layer, act) in [("relu", Activation::Relu), ("softplus", Activation::Softplus)] {
        let r = random(&mut rng, &[n, conv], 1.0);
        let mut x = random(&mut rng, &[n, conv], 2.0);
        for v in x.data_mut() {
            if v.abs() < 0.1 {
                *v += 0.2f64.copysign(*v);
            }
        }
        let g = named(vec![("x", act.backward(&x, &r))]);
        let mut p = named(vec![("x", x)]);
        let f = |p: &NamedTensors| Ok(dot(&act.forward(&p[0].1), &r));
        push(layer, false, check(&mut p, &g, f, seed)?);
    }

    // Stacked recurrences: gradients flow back through every step.
    for (layer, input) in [("lstm1", conv), ("lstm2", hidden)] {
        let r = random(&mut rng, &[n, hidden], 1.0);
        let mut p = named(vec![
            ("x", random(&mut rng, &[n, input], 1.0)),
            ("w_input", random(&mut rng, &[input, 4 * hidden], 0.8)),
            ("w_hidden", random(&mut rng, &[hidden, 4 * hidden], 0.8)),
            ("bias", random(&mut rng, &[4 * hidden], 0.5)),
        ]);
        let lstm = |p: &NamedTensors| LstmParams {
            w_input: p[1].1.clone(),
            w_hidden: p[2].1.clone(),
            bias: p[3].1.clone(),
        };
        let f = |p: &NamedTensors| Ok(dot(&lstm_forward(&lstm(p), &p[0].1)?.hidden, &r));
        let params = lstm(&p);
        let cache = lstm_forward(&params, &p[0].1)?;
        let mut gp = LstmParams::zeros(input, hidden);
        let dx = lstm_backward(&params, &p[0].1, &cache, &r, &mut gp);
        let g = named(vec![
            ("x", dx),
            ("w_input", gp.w_input),
            ("w_hidden", gp.w_hidden),
            ("bias", gp.bias),
        ]);
        push(layer, true, check(&mut p, &g, f, seed)?);
    }

    // Training-mode dropout with a fixed mask is linear in its input.
    {
        let r = random(&mut rng, &[n, hidden], 1.0);
        let drop_seed = rng.next_u64();
        let x = random(&mut rng, &[n, hidden], 1.0);
        let d = dropout(&x, 0.5, &mut SeededRng::new(drop_seed), true)?;
        let g = named(vec![("x", d.backward(&r))]);
        let mut p = named(vec![("x", x)]);
        let f = |p: &NamedTensors| {
            Ok(dot(
                &dropout(&p[0].1, 0.5, &mut SeededRng::new(drop_seed), true)?.output,
                &r,
            ))
        };
        push("dropout", false, check(&mut p, &g, f, seed)?);
    }

    for (layer, mean_by) in [
        ("masked-mean padded", MeanBy::Padded),
        ("masked-mean valid", MeanBy::Valid),
    ] {
        let mask = prefix_mask(n, n.saturating_sub(2).max(1));
        let r = random(&mut rng, &[hidden], 1.0);
        let x = random(&mut rng, &[n, hidden], 1.0);
        let g = named(vec![("h", masked_mean_backward(r.data(), &mask, mean_by))]);
        let mut p = named(vec![("h", x)]);
        let f = |p: &NamedTensors| Ok(dot(&Tensor::vector(masked_mean(&p[0].1, &mask, mean_by)), &r));
        push(layer, false, check(&mut p, &g, f, seed)?);
    }

    // Stack path: masked mean of sigmoid(affine(embeddings)).
    {
        let mask = prefix_mask(n, n.saturating_sub(2).max(1));
        let r = random(&mut rng, &[hidden], 1.0);
        let mut p = named(vec![
            ("v", random(&mut rng, &[n, embed], 1.0)),
            ("weight", random(&mut rng, &[embed, hidden], 1.0)),
            ("bias", random(&mut rng, &[hidden], 0.5)),
        ]);
        let f = |p: &NamedTensors| {
            let s = sigmoid(&affine(p, 1).forward(&p[0].1)?);
            Ok(dot(&Tensor::vector(masked_mean(&s, &mask, MeanBy::Padded)), &r))
        };
        let a = affine(&p, 1);
        let s = sigmoid(&a.forward(&p[0].1)?);
        let mut dpre = masked_mean_backward(r.data(), &mask, MeanBy::Padded);
        dpre.data_mut()
            .iter_mut()
            .zip(s.data())
            .for_each(|(g, &s)| *g *= s * (1.0 - s));
        let mut ga = Affine::zeros(embed, hidden);
        let dv = a.backward(&p[0].1, &dpre, &mut ga);
        let g = named(vec![("v", dv), ("weight", ga.weight), ("bias", ga.bias)]);
        push("stack", false, check(&mut p, &g, f, seed)?);
    }

    // Output layer with softmax cross-entropy.
    {
        let gold = rng.below(classes);
        let mut p = named(vec![
            ("h6", random(&mut rng, &[1, hidden], 1.0)),
            ("weight", random(&mut rng, &[hidden, classes], 1.0)),
            ("bias", random(&mut rng, &[classes], 0.5)),
        ]);
        let f = |p: &NamedTensors| {
            let z = affine(p, 1).forward(&p[0].1)?;
            Ok(cross_entropy(&softmax(z.data()), gold).loss)
        };
        let a = affine(&p, 1);
        let probs = softmax(a.forward(&p[0].1)?.data());
        let dz = Tensor::from_vec(&[1, classes], softmax_cross_entropy_grad(&probs, gold))?;
        let mut ga = Affine::zeros(hidden, classes);
        let dh = a.backward(&p[0].1, &dz, &mut ga);
        let g = named(vec![("h6", dh), ("weight", ga.weight), ("bias", ga.bias)]);
        push("output+softmax-ce", false, check(&mut p, &g, f, seed)?);
    }

    Ok(out)
}
