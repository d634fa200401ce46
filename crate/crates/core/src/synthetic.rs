//! Seeded keyword corpus for learnability checks.
//!
//! Every class owns a few signal tokens no other class uses. A sample is a
//! run of noise tokens with distinct signal tokens of its class (all of
//! them by default) at random positions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{Corpus, RawRecord, Split, SynonymDictionary};
use crate::label::{SentimentLabel, NUM_CLASSES};
use crate::tensor::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub signals_per_class: usize,
    pub noise_vocab: usize,
    /// Token count range, signal tokens included.
    pub min_len: usize,
    pub max_len: usize,
    /// Distinct signal tokens per sample, at most `signals_per_class`.
    pub signals_per_sample: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    /// 600 train and 120 test samples; each sample is its class's 3 signal
    /// tokens plus 2 to 6 noise tokens.
    fn default() -> Self {
        SyntheticConfig {
            train_per_class: 100,
            test_per_class: 20,
            signals_per_class: 3,
            noise_vocab: 60,
            min_len: 5,
            max_len: 9,
            signals_per_sample: 3,
            seed: 2024,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.noise_vocab == 0 || self.signals_per_sample == 0 {
            return Err(Error::Config(
                "noise_vocab and signals_per_sample must be positive".into(),
            ));
        }
        if self.signals_per_sample > self.signals_per_class {
            return Err(Error::Config(format!(
                "signals_per_sample ({}) exceeds signals_per_class ({})",
                self.signals_per_sample, self.signals_per_class
            )));
        }
        if self.min_len < self.signals_per_sample || self.min_len > self.max_len {
            return Err(Error::Config(format!(
                "need signals_per_sample <= min_len <= max_len, got {} / {} / {}",
                self.signals_per_sample, self.min_len, self.max_len
            )));
        }
        if self.train_per_class == 0 {
            return Err(Error::Config("train_per_class must be positive".into()));
        }
        Ok(())
    }
}

pub fn signal_token(label: SentimentLabel, j: usize) -> String {
    format!("{}kw{j}", label.tag())
}

pub fn noise_token(i: usize) -> String {
    format!("w{i:03}")
}

/// Balanced corpus with dataset key `synthetic`; record order is shuffled.
pub fn keyword_corpus(cfg: &SyntheticConfig) -> Result<Corpus> {
    cfg.validate()?;
    let mut rng = SeededRng::new(cfg.seed);
    let mut records = Vec::new();
    for (split, per_class) in [(Split::Train, cfg.train_per_class), (Split::Test, cfg.test_per_class)] {
        let mut labels: Vec<SentimentLabel> = (0..per_class * NUM_CLASSES)
            .map(|i| SentimentLabel::from_index(i % NUM_CLASSES).expect("class index"))
            .collect();
        rng.shuffle(&mut labels);
        for (i, label) in labels.into_iter().enumerate() {
            let len = cfg.min_len + rng.below(cfg.max_len - cfg.min_len + 1);
            let mut tokens: Vec<String> = (0..len).map(|_| noise_token(rng.below(cfg.noise_vocab))).collect();
            let mut slots: Vec<usize> = (0..len).collect();
            rng.shuffle(&mut slots);
            let mut which: Vec<usize> = (0..cfg.signals_per_class).collect();
            rng.shuffle(&mut which);
            for (&slot, &j) in slots.iter().zip(&which).take(cfg.signals_per_sample) {
                tokens[slot] = signal_token(label, j);
            }
            records.push(RawRecord {
                id: format!("syn-{split}-{i:04}"),
                text: tokens.join(" "),
                label,
                split,
            });
        }
    }
    Ok(Corpus::new("synthetic", records))
}

/// Maps each class's signal tokens to one shared tag `syn_<class tag>`.
pub fn keyword_dictionary(cfg: &SyntheticConfig) -> SynonymDictionary {
    let mut text = String::new();
    for label in SentimentLabel::ALL {
        for j in 0..cfg.signals_per_class {
            text.push_str(&format!("syn_{}\t{}\n", label.tag(), signal_token(label, j)));
        }
    }
    SynonymDictionary::parse(&text, "synthetic").expect("generated dictionary is well formed")
}
