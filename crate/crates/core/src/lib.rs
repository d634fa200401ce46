// Matrix code and its oracles index rows and columns explicitly.
#![allow(clippy::needless_range_loop)]

pub mod correlation;
pub mod error;
pub mod features;
pub mod fsutil;
pub mod label;
pub mod model;
pub mod nn;
pub mod synthetic;
pub mod tensor;
pub mod training;

pub use correlation::{ComboKey, ConfusionMatrix, PredictionRecord};
pub use error::{Error, Result};
pub use features::{Corpus, EncodedSample, FeatureMode, Split, Vocabulary};
pub use label::{SentimentLabel, NUM_CLASSES};
pub use model::{ModelConfig, ModelKind, ModelParams};
pub use tensor::{SeededRng, Tensor};
pub use training::{Checkpoint, MetricsFile, MetricsRecord, TrainConfig};
