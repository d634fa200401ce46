use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Split;
use crate::fsutil::write_atomic;
use crate::label::{SentimentLabel, NUM_CLASSES};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// No sample was predicted as this class; `precision` is reported as 0.
    #[serde(default)]
    pub precision_undefined: bool,
    /// No gold sample has this class; `recall` is reported as 0.
    #[serde(default)]
    pub recall_undefined: bool,
}

impl ClassMetrics {
    /// Metrics from true-positive, false-positive and false-negative counts.
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        ClassMetrics {
            precision,
            recall,
            f1,
            precision_undefined: tp + fp == 0,
            recall_undefined: tp + fn_ == 0,
        }
    }
}

/// One evaluation of one split. `classes` is indexed by [`SentimentLabel::index`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub epoch: usize,
    pub split: Split,
    pub loss: f64,
    pub accuracy: f64,
    pub classes: [ClassMetrics; NUM_CLASSES],
}

impl MetricsRecord {
    /// Accuracy and per-class metrics over `(gold, predicted)` pairs.
    pub fn from_pairs(
        epoch: usize,
        split: Split,
        loss: f64,
        pairs: impl IntoIterator<Item = (SentimentLabel, SentimentLabel)>,
    ) -> Self {
        let mut tp = [0usize; NUM_CLASSES];
        let mut fp = [0usize; NUM_CLASSES];
        let mut fn_ = [0usize; NUM_CLASSES];
        let mut total = 0usize;
        for (gold, pred) in pairs {
            total += 1;
            if gold == pred {
                tp[gold.index()] += 1;
            } else {
                fp[pred.index()] += 1;
                fn_[gold.index()] += 1;
            }
        }
        let correct: usize = tp.iter().sum();
        MetricsRecord {
            epoch,
            split,
            loss,
            accuracy: if total == 0 { 0.0 } else { correct as f64 / total as f64 },
            classes: std::array::from_fn(|k| ClassMetrics::from_counts(tp[k], fp[k], fn_[k])),
        }
    }

    pub fn class(&self, label: SentimentLabel) -> &ClassMetrics {
        &self.classes[label.index()]
    }

    pub fn csv_header() -> Vec<String> {
        let mut h: Vec<String> = ["epoch", "split", "loss", "accuracy"].map(String::from).into();
        for label in SentimentLabel::ALL {
            for m in ["precision", "recall", "f1"] {
                h.push(format!("{}_{m}", label.tag()));
            }
        }
        h
    }

    /// Values in [`csv_header`](Self::csv_header) order; reals use shortest
    /// round-trip formatting.
    pub fn csv_row(&self) -> Vec<String> {
        let mut row = vec![
            self.epoch.to_string(),
            self.split.to_string(),
            self.loss.to_string(),
            self.accuracy.to_string(),
        ];
        for c in &self.classes {
            row.extend([c.precision, c.recall, c.f1].map(|v| v.to_string()));
        }
        row
    }
}

/// Renders a history as CSV text.
pub fn history_csv(records: &[MetricsRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(MetricsRecord::csv_header()).expect("in-memory write");
    for r in records {
        w.write_record(r.csv_row()).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii csv")
}

pub fn write_history(path: impl AsRef<Path>, records: &[MetricsRecord]) -> Result<()> {
    write_atomic(path.as_ref(), history_csv(records).as_bytes())
}

/// A metrics record labeled with the combination that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsFile {
    pub dataset: String,
    pub feature: String,
    pub model: String,
    pub metrics: MetricsRecord,
}

impl MetricsFile {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let json = serde_json::to_string_pretty(self).expect("metrics serialize");
        write_atomic(path.as_ref(), json.as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.line(), e.to_string()))
    }
}
