//! Central finite-difference gradient checker.

use crate::error::{Error, Result};
use crate::nn::Parameters;
use crate::tensor::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckConfig {
    pub eps: f64,
    /// Tensors with more entries than this are subsampled.
    pub subsample_above: usize,
    pub subsample_size: usize,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            eps: 1e-5,
            subsample_above: 500,
            subsample_size: 200,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorCheck {
    pub name: String,
    pub checked: usize,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorstEntry {
    pub tensor: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub entries_checked: usize,
    pub tensors: Vec<TensorCheck>,
    pub worst: Option<WorstEntry>,
}

/// `|a − n| / max(|a|, |n|, 1e-8)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compares `analytic` (gradients shaped like `params`) with central
/// differences `(L(θ+ε) − L(θ−ε)) / 2ε` of `loss`. Every entry is checked
/// unless a tensor exceeds `subsample_above`, in which case a seeded random
/// subset of `subsample_size` entries is used. `params` is restored exactly.
pub fn grad_check<P, G, F>(
    params: &mut P,
    analytic: &G,
    mut loss: F,
    config: &GradCheckConfig,
) -> Result<GradCheckReport>
where
    P: Parameters,
    G: Parameters,
    F: FnMut(&P) -> Result<f64>,
{
    let analytic = analytic.named_tensors();
    let layout: Vec<(String, usize)> = params
        .named_tensors()
        .iter()
        .map(|(n, t)| (n.to_string(), t.len()))
        .collect();
    if layout.len() != analytic.len() {
        return Err(Error::Input(format!(
            "grad_check: {} parameter tensors but {} gradients",
            layout.len(),
            analytic.len()
        )));
    }
    let mut rng = SeededRng::new(config.seed);
    let mut eval = |params: &P, name: &str| -> Result<f64> {
        let l = loss(params)?;
        if !l.is_finite() {
            return Err(Error::NonFinite(format!("loss while perturbing {name}")));
        }
        Ok(l)
    };

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        entries_checked: 0,
        tensors: Vec::new(),
        worst: None,
    };
    for (ti, (name, len)) in layout.iter().enumerate() {
        if analytic[ti].1.len() != *len {
            return Err(Error::shape("grad_check gradient", &[*len], analytic[ti].1.shape()));
        }
        let indices: Vec<usize> = if *len > config.subsample_above {
            let mut all: Vec<usize> = (0..*len).collect();
            rng.shuffle(&mut all);
            all.truncate(config.subsample_size);
            all.sort_unstable();
            all
        } else {
            (0..*len).collect()
        };
        let mut tensor_max = 0.0f64;
        for &k in &indices {
            let original = params.named_tensors()[ti].1.data()[k];
            params.named_tensors_mut()[ti].1.data_mut()[k] = original + config.eps;
            let plus = eval(params, name);
            params.named_tensors_mut()[ti].1.data_mut()[k] = original - config.eps;
            let minus = eval(params, name);
            params.named_tensors_mut()[ti].1.data_mut()[k] = original;
            let numeric = (plus? - minus?) / (2.0 * config.eps);
            let a = analytic[ti].1.data()[k];
            let err = relative_error(a, numeric);
            tensor_max = tensor_max.max(err);
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(err);
                report.worst = Some(WorstEntry {
                    tensor: name.clone(),
                    index: k,
                    analytic: a,
                    numeric,
                });
            }
        }
        report.entries_checked += indices.len();
        report.tensors.push(TensorCheck {
            name: name.clone(),
            checked: indices.len(),
            max_rel_error: tensor_max,
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{softmax, softmax_cross_entropy_grad, NamedTensors};
    use crate::tensor::Tensor;

    /// logits = Wᵀx + b, loss = CE(softmax(logits), gold)
    fn toy_loss(p: &NamedTensors, x: &[f64], gold: usize) -> (f64, NamedTensors) {
        let (w, b) = (&p[0].1, &p[1].1);
        let (input, output) = (w.rows(), w.cols());
        let logits: Vec<f64> = (0..output)
            .map(|j| b.data()[j] + (0..input).map(|k| w.data()[k * output + j] * x[k]).sum::<f64>())
            .collect();
        let probs = softmax(&logits);
        let loss = -probs[gold].ln();
        let dz = softmax_cross_entropy_grad(&probs, gold);
        let mut gw = w.zeros_like();
        for k in 0..input {
            for j in 0..output {
                gw.data_mut()[k * output + j] = x[k] * dz[j];
            }
        }
        let gb = Tensor::vector(dz);
        (loss, vec![("w".into(), gw), ("b".into(), gb)])
    }

    #[test]
    fn linear_softmax_toy_model_passes() {
        let mut rng = SeededRng::new(4);
        let mut params: NamedTensors = vec![
            (
                "w".into(),
                Tensor::from_vec(&[4, 6], (0..24).map(|_| rng.uniform(-1.0, 1.0)).collect()).unwrap(),
            ),
            (
                "b".into(),
                Tensor::vector((0..6).map(|_| rng.uniform(-1.0, 1.0)).collect()),
            ),
        ];
        let x: Vec<f64> = (0..4).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let (_, grads) = toy_loss(&params, &x, 2);
        let before = params.clone();
        let report = grad_check(
            &mut params,
            &grads,
            |p| Ok(toy_loss(p, &x, 2).0),
            &GradCheckConfig::default(),
        )
        .unwrap();
        assert!(report.max_rel_error < 1e-8, "{report:?}");
        assert_eq!(report.entries_checked, 30);
        assert_eq!(params, before);
    }

    #[test]
    fn detects_a_wrong_gradient() {
        let mut params: NamedTensors = vec![("x".into(), Tensor::vector(vec![1.5, -0.5]))];
        let wrong: NamedTensors = vec![("x".into(), Tensor::vector(vec![3.0, 0.0]))];
        let report = grad_check(
            &mut params,
            &wrong,
            |p| Ok(p[0].1.data().iter().map(|v| v * v).sum()),
            &GradCheckConfig::default(),
        )
        .unwrap();
        // d/dx1 = -1 but we claimed 0.
        assert!((report.max_rel_error - 1.0).abs() < 1e-6);
        assert_eq!(report.worst.unwrap().index, 1);
    }

    #[test]
    fn large_tensors_are_subsampled() {
        let mut params: NamedTensors = vec![("big".into(), Tensor::vector(vec![0.5; 600]))];
        let grads: NamedTensors = vec![("big".into(), Tensor::vector(vec![1.0; 600]))];
        let report = grad_check(
            &mut params,
            &grads,
            |p| Ok(p[0].1.data().iter().sum()),
            &GradCheckConfig::default(),
        )
        .unwrap();
        assert_eq!(report.entries_checked, 200);
    }

    #[test]
    fn non_finite_loss_is_fatal() {
        let mut params: NamedTensors = vec![("x".into(), Tensor::vector(vec![0.0]))];
        let grads = params.clone();
        let err = grad_check(&mut params, &grads, |_| Ok(f64::NAN), &GradCheckConfig::default());
        assert!(matches!(err, Err(Error::NonFinite(_))));
    }
}
