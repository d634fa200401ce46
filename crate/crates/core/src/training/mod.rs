//! Epoch loop, evaluation metrics, checkpoints and report rendering.

mod checkpoint;
mod metrics;
mod report;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint, Dtype, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use metrics::{history_csv, write_history, ClassMetrics, MetricsFile, MetricsRecord};
pub use report::{render_report, row_label};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{EncodedSample, Split};
use crate::label::SentimentLabel;
use crate::model::{forward, loss_and_grads, ModelConfig, ModelKind, ModelParams};
use crate::nn::{cross_entropy, AdamConfig, AdamState};
use crate::tensor::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Samples per optimizer step; the last batch of an epoch may be smaller.
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    /// Evaluate the test split every this many epochs (and after the last).
    pub eval_every: usize,
    pub shuffle: bool,
    /// Stop after this many evaluations without a lower monitored loss.
    /// The test loss is monitored when a test split is given, else the
    /// train loss.
    pub patience: Option<usize>,
    /// Stop once eval-mode train accuracy reaches this value.
    pub target_accuracy: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            batch_size: 32,
            adam: AdamConfig::default(),
            seed: 42,
            eval_every: 1,
            shuffle: true,
            patience: None,
            target_accuracy: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.epochs == 0 {
            return fail("epochs must be at least 1".into());
        }
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1".into());
        }
        if self.eval_every == 0 {
            return fail("eval_every must be at least 1".into());
        }
        if self.patience == Some(0) {
            return fail("patience must be at least 1 when set".into());
        }
        if let Some(t) = self.target_accuracy {
            if !(t > 0.0 && t <= 1.0) {
                return fail(format!("target_accuracy must be in (0, 1], got {t}"));
            }
        }
        let a = &self.adam;
        if !(a.learning_rate > 0.0 && a.learning_rate.is_finite()) {
            return fail(format!("learning_rate must be positive, got {}", a.learning_rate));
        }
        if !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) {
            return fail(format!("adam betas must be in [0, 1), got {} and {}", a.beta1, a.beta2));
        }
        if a.epsilon.is_nan() || a.epsilon <= 0.0 {
            return fail(format!("adam epsilon must be positive, got {}", a.epsilon));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Completed,
    TargetAccuracy,
    Patience,
    /// A loss, gradient or parameter became non-finite. The returned params
    /// are the state at detection and may themselves be non-finite.
    Diverged(String),
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    /// One train record per epoch, test records interleaved after them.
    pub history: Vec<MetricsRecord>,
    pub epochs_completed: usize,
    pub stop: StopReason,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplePrediction {
    pub sample_id: String,
    pub gold: SentimentLabel,
    pub predicted: SentimentLabel,
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub metrics: MetricsRecord,
    pub predictions: Vec<SamplePrediction>,
}

/// Eval-mode loss, accuracy and per-class metrics over `samples`.
pub fn evaluate(
    params: &ModelParams,
    config: &ModelConfig,
    samples: &[EncodedSample],
    epoch: usize,
    split: Split,
) -> Result<Evaluation> {
    if samples.is_empty() {
        return Err(Error::Input(format!("cannot evaluate an empty {split} split")));
    }
    // Eval mode never draws from the generator.
    let mut unused = SeededRng::new(0);
    let mut predictions = Vec::with_capacity(samples.len());
    let mut loss = 0.0;
    for s in samples {
        let trace = forward(params, config, s, false, &mut unused)?;
        loss += cross_entropy(&trace.probs, s.label.index()).loss;
        predictions.push(SamplePrediction {
            sample_id: s.id.clone(),
            gold: s.label,
            predicted: SentimentLabel::argmax(&trace.probs),
            probs: trace.probs,
        });
    }
    let loss = loss / samples.len() as f64;
    let metrics = MetricsRecord::from_pairs(epoch, split, loss, predictions.iter().map(|p| (p.gold, p.predicted)));
    Ok(Evaluation { metrics, predictions })
}

/// Trains a freshly initialized model.
///
/// Generators are forked from `config.seed` in a fixed order (init,
/// shuffle, dropout), so `(config, model_config, data)` determine the
/// result bitwise.
pub fn train(
    config: &TrainConfig,
    model_config: &ModelConfig,
    kind: ModelKind,
    vocab_size: usize,
    train_set: &[EncodedSample],
    test_set: &[EncodedSample],
) -> Result<TrainOutcome> {
    config.validate()?;
    model_config.validate()?;
    if train_set.is_empty() {
        return Err(Error::Input("training split is empty".into()));
    }
    let mut root = SeededRng::new(config.seed);
    let mut init_rng = root.fork();
    let mut shuffle_rng = root.fork();
    let mut dropout_rng = root.fork();

    let mut params = ModelParams::init(kind, model_config, vocab_size, &mut init_rng)?;
    let mut adam = AdamState::new(&params);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = Vec::new();
    let mut best_loss = f64::INFINITY;
    let mut stale = 0usize;

    for epoch in 1..=config.epochs {
        if config.shuffle {
            shuffle_rng.shuffle(&mut order);
        }
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&EncodedSample> = chunk.iter().map(|&i| &train_set[i]).collect();
            let step = loss_and_grads(&params, model_config, &batch, &mut dropout_rng)
                .and_then(|(_, grads)| adam.step(&mut params, &grads, &config.adam))
                .and_then(|()| {
                    if params.is_finite() {
                        Ok(())
                    } else {
                        Err(Error::NonFinite("parameters after optimizer step".into()))
                    }
                });
            match step {
                Ok(()) => {}
                Err(Error::NonFinite(what)) => {
                    log::error!("epoch {epoch}: non-finite {what}; stopping");
                    return Ok(TrainOutcome {
                        params,
                        history,
                        epochs_completed: epoch - 1,
                        stop: StopReason::Diverged(format!("epoch {epoch}: non-finite {what}")),
                    });
                }
                Err(e) => return Err(e),
            }
        }

        let train_metrics = evaluate(&params, model_config, train_set, epoch, Split::Train)?.metrics;
        let train_acc = train_metrics.accuracy;
        let mut monitored = train_metrics.loss;
        log::info!(
            "epoch {epoch}: train loss {:.4} acc {:.4}",
            train_metrics.loss,
            train_acc
        );
        history.push(train_metrics);

        let target_hit = config.target_accuracy.is_some_and(|t| train_acc >= t);
        let last = epoch == config.epochs || target_hit;
        if !test_set.is_empty() && (epoch % config.eval_every == 0 || last) {
            let m = evaluate(&params, model_config, test_set, epoch, Split::Test)?.metrics;
            log::info!("epoch {epoch}: test loss {:.4} acc {:.4}", m.loss, m.accuracy);
            monitored = m.loss;
            history.push(m);
        } else if !test_set.is_empty() {
            monitored = f64::NAN;
        }

        if target_hit {
            return Ok(TrainOutcome {
                params,
                history,
                epochs_completed: epoch,
                stop: StopReason::TargetAccuracy,
            });
        }
        if let Some(patience) = config.patience {
            if !monitored.is_nan() {
                if monitored < best_loss {
                    best_loss = monitored;
                    stale = 0;
                } else {
                    stale += 1;
                    if stale >= patience {
                        return Ok(TrainOutcome {
                            params,
                            history,
                            epochs_completed: epoch,
                            stop: StopReason::Patience,
                        });
                    }
                }
            }
        }
    }
    Ok(TrainOutcome {
        params,
        history,
        epochs_completed: config.epochs,
        stop: StopReason::Completed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::EncodedSample;

    fn toy_set(n: usize, seed: u64) -> Vec<EncodedSample> {
        // Class k is marked by id 2 + k at a random position.
        let mut rng = SeededRng::new(seed);
        (0..n)
            .map(|i| {
                let label = SentimentLabel::from_index(i % 6).unwrap();
                let mut ids: Vec<usize> = (0..6).map(|_| 8 + rng.below(12)).collect();
                let at = rng.below(6);
                ids[at] = 2 + label.index();
                EncodedSample::new(format!("s{i}"), label, "toy", (ids, vec![1; 6]))
            })
            .collect()
    }

    fn small_config() -> ModelConfig {
        ModelConfig {
            embed_dim: 8,
            conv_out: 8,
            lstm_hidden: 8,
            stack_dim: 8,
            seq_len: 6,
            dropout_rate: 0.1,
            ..ModelConfig::default()
        }
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        for bad in [
            TrainConfig {
                epochs: 0,
                ..Default::default()
            },
            TrainConfig {
                batch_size: 0,
                ..Default::default()
            },
            TrainConfig {
                eval_every: 0,
                ..Default::default()
            },
            TrainConfig {
                patience: Some(0),
                ..Default::default()
            },
            TrainConfig {
                target_accuracy: Some(1.5),
                ..Default::default()
            },
        ] {
            assert!(matches!(bad.validate(), Err(Error::Config(_))));
        }
    }

    #[test]
    fn same_seed_same_history() {
        let data = toy_set(36, 1);
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 8,
            ..Default::default()
        };
        let a = train(&cfg, &small_config(), ModelKind::CnnLstm2Stack, 20, &data, &data[..12]).unwrap();
        let b = train(&cfg, &small_config(), ModelKind::CnnLstm2Stack, 20, &data, &data[..12]).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.params, b.params);
        assert_eq!(a.history.len(), 6);
        let c = train(
            &TrainConfig { seed: 7, ..cfg },
            &small_config(),
            ModelKind::CnnLstm2Stack,
            20,
            &data,
            &[],
        )
        .unwrap();
        assert_ne!(a.params, c.params);
    }

    #[test]
    fn learns_a_toy_marker_task() {
        let data = toy_set(120, 2);
        let cfg = TrainConfig {
            epochs: 60,
            batch_size: 8,
            adam: AdamConfig {
                learning_rate: 1e-2,
                ..AdamConfig::default()
            },
            target_accuracy: Some(1.0),
            ..Default::default()
        };
        let out = train(&cfg, &small_config(), ModelKind::CnnLstm2, 20, &data, &[]).unwrap();
        assert_eq!(out.stop, StopReason::TargetAccuracy, "{:?}", out.history.last());
        assert_eq!(out.history.last().unwrap().accuracy, 1.0);
    }

    #[test]
    fn eval_every_and_final_test_record() {
        let data = toy_set(12, 3);
        let cfg = TrainConfig {
            epochs: 5,
            eval_every: 2,
            ..Default::default()
        };
        let out = train(&cfg, &small_config(), ModelKind::CnnLstm2, 20, &data, &data).unwrap();
        let test_epochs: Vec<usize> = out
            .history
            .iter()
            .filter(|m| m.split == Split::Test)
            .map(|m| m.epoch)
            .collect();
        assert_eq!(test_epochs, [2, 4, 5]);
        assert_eq!(out.history.iter().filter(|m| m.split == Split::Train).count(), 5);
    }

    #[test]
    fn divergence_returns_partial_history() {
        let data = toy_set(12, 4);
        let cfg = TrainConfig {
            epochs: 3,
            adam: AdamConfig {
                learning_rate: f64::MAX,
                ..AdamConfig::default()
            },
            ..Default::default()
        };
        let out = train(&cfg, &small_config(), ModelKind::CnnLstm2, 20, &data, &[]).unwrap();
        assert!(matches!(out.stop, StopReason::Diverged(_)), "{:?}", out.stop);
        assert!(out.epochs_completed < 3);
        assert_eq!(out.history.len(), out.epochs_completed);
    }

    #[test]
    fn evaluate_identities() {
        let data = toy_set(30, 5);
        let config = small_config();
        let params = ModelParams::init(ModelKind::CnnLstm2, &config, 20, &mut SeededRng::new(0)).unwrap();
        let ev = evaluate(&params, &config, &data, 0, Split::Test).unwrap();
        let correct = ev.predictions.iter().filter(|p| p.gold == p.predicted).count();
        assert_eq!(ev.metrics.accuracy, correct as f64 / 30.0);
        assert!(evaluate(&params, &config, &[], 0, Split::Test).is_err());
    }
}
