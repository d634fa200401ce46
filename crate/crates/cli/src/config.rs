//! Flat `key = value` run configuration.
//!
//! Resolution order: built-in defaults, then the config file, then `--set`
//! overrides. Every key has a default; unknown keys are rejected.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sentcorr_core::correlation::BinarizeRule;
use sentcorr_core::features::FeatureMode;
use sentcorr_core::nn::{Activation, AdamConfig, MeanBy};
use sentcorr_core::training::{Dtype, TrainConfig};
use sentcorr_core::{ModelConfig, ModelKind};

use crate::exit::CliError;

pub const SNAPSHOT_FILE: &str = "config.resolved";

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub corpus: Option<PathBuf>,
    pub dataset: Option<String>,
    pub dict: Option<PathBuf>,
    pub vocab: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub out_dir: PathBuf,

    pub feature: FeatureMode,
    pub model: ModelKind,
    pub min_count: usize,
    /// 0 derives the length from the longest training text.
    pub seq_len: usize,
    pub max_seq_len: usize,

    pub embed_dim: usize,
    pub conv_out: usize,
    pub lstm_hidden: usize,
    pub stack_dim: usize,
    pub window: usize,
    pub dropout_rate: f64,
    pub activation: Activation,
    pub mean_by: MeanBy,

    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    pub seed: u64,
    pub eval_every: usize,
    pub shuffle: bool,
    pub patience: Option<usize>,
    pub target_accuracy: Option<f64>,
    pub checkpoint_dtype: Dtype,

    pub eval_split: sentcorr_core::features::Split,

    pub binarize: Binarize,
    pub theta: f64,
    pub top_k: usize,
    pub include_diagonal: bool,
    /// `None` means every input must agree.
    pub quorum: Option<usize>,

    pub gradcheck_seed: u64,
    pub gradcheck_eps: f64,
    pub gradcheck_tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Binarize {
    TopK,
    Fixed,
}

impl Default for RunConfig {
    fn default() -> Self {
        let m = ModelConfig::default();
        let t = TrainConfig::default();
        RunConfig {
            corpus: None,
            dataset: None,
            dict: None,
            vocab: None,
            checkpoint: None,
            out_dir: PathBuf::from("out"),
            feature: FeatureMode::Explicit,
            model: ModelKind::CnnLstm2,
            min_count: 1,
            seq_len: 0,
            max_seq_len: 100,
            embed_dim: m.embed_dim,
            conv_out: m.conv_out,
            lstm_hidden: m.lstm_hidden,
            stack_dim: m.stack_dim,
            window: m.window,
            dropout_rate: m.dropout_rate,
            activation: m.activation,
            mean_by: m.mean_by,
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.adam.learning_rate,
            beta1: t.adam.beta1,
            beta2: t.adam.beta2,
            adam_epsilon: t.adam.epsilon,
            seed: t.seed,
            eval_every: t.eval_every,
            shuffle: t.shuffle,
            patience: t.patience,
            target_accuracy: t.target_accuracy,
            checkpoint_dtype: Dtype::F64,
            eval_split: sentcorr_core::features::Split::Test,
            binarize: Binarize::TopK,
            theta: 0.5,
            top_k: 3,
            include_diagonal: false,
            quorum: None,
            gradcheck_seed: 0,
            gradcheck_eps: sentcorr_core::model::MODEL_GRAD_CHECK_EPS,
            gradcheck_tolerance: 1e-4,
        }
    }
}

fn parse<T: FromStr>(value: &str) -> Result<T, String>
where
    T::Err: Display,
{
    value.parse::<T>().map_err(|e| e.to_string())
}

fn parse_bool(value: &str) -> Result<bool, String> {
    match value {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(format!("expected true or false, got {value:?}")),
    }
}

fn is_none(value: &str) -> bool {
    matches!(value, "" | "none" | "off")
}

fn parse_opt<T: FromStr>(value: &str) -> Result<Option<T>, String>
where
    T::Err: Display,
{
    if is_none(value) {
        Ok(None)
    } else {
        parse(value).map(Some)
    }
}

fn parse_path(value: &str) -> Option<PathBuf> {
    (!is_none(value)).then(|| PathBuf::from(value))
}

fn show_opt<T: Display>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "none".to_string(), |v| v.to_string())
}

fn show_path(v: &Option<PathBuf>) -> String {
    v.as_ref()
        .map_or_else(|| "none".to_string(), |p| p.display().to_string())
}

impl RunConfig {
    /// Every key in snapshot order.
    pub const KEYS: &'static [&'static str] = &[
        "corpus",
        "dataset",
        "dict",
        "vocab",
        "checkpoint",
        "out_dir",
        "feature",
        "model",
        "min_count",
        "seq_len",
        "max_seq_len",
        "embed_dim",
        "conv_out",
        "lstm_hidden",
        "stack_dim",
        "window",
        "dropout_rate",
        "activation",
        "mean_by",
        "epochs",
        "batch_size",
        "learning_rate",
        "beta1",
        "beta2",
        "adam_epsilon",
        "seed",
        "eval_every",
        "shuffle",
        "patience",
        "target_accuracy",
        "checkpoint_dtype",
        "eval_split",
        "binarize",
        "theta",
        "top_k",
        "include_diagonal",
        "quorum",
        "gradcheck_seed",
        "gradcheck_eps",
        "gradcheck_tolerance",
    ];

    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let v = value.trim();
        match key {
            "corpus" => self.corpus = parse_path(v),
            "dataset" => self.dataset = (!is_none(v)).then(|| v.to_string()),
            "dict" => self.dict = parse_path(v),
            "vocab" => self.vocab = parse_path(v),
            "checkpoint" => self.checkpoint = parse_path(v),
            "out_dir" => {
                self.out_dir = parse_path(v).ok_or("out_dir cannot be empty")?;
            }
            "feature" => self.feature = parse(v)?,
            "model" => self.model = parse(v)?,
            "min_count" => self.min_count = parse(v)?,
            "seq_len" => self.seq_len = parse(v)?,
            "max_seq_len" => self.max_seq_len = parse(v)?,
            "embed_dim" => self.embed_dim = parse(v)?,
            "conv_out" => self.conv_out = parse(v)?,
            "lstm_hidden" => self.lstm_hidden = parse(v)?,
            "stack_dim" => self.stack_dim = parse(v)?,
            "window" => self.window = parse(v)?,
            "dropout_rate" => self.dropout_rate = parse(v)?,
            "activation" => self.activation = parse(v)?,
            "mean_by" => self.mean_by = parse(v)?,
            "epochs" => self.epochs = parse(v)?,
            "batch_size" => self.batch_size = parse(v)?,
            "learning_rate" => self.learning_rate = parse(v)?,
            "beta1" => self.beta1 = parse(v)?,
            "beta2" => self.beta2 = parse(v)?,
            "adam_epsilon" => self.adam_epsilon = parse(v)?,
            "seed" => self.seed = parse(v)?,
            "eval_every" => self.eval_every = parse(v)?,
            "shuffle" => self.shuffle = parse_bool(v)?,
            "patience" => self.patience = parse_opt(v)?,
            "target_accuracy" => self.target_accuracy = parse_opt(v)?,
            "checkpoint_dtype" => {
                self.checkpoint_dtype = match v {
                    "f64" => Dtype::F64,
                    "f32" => Dtype::F32,
                    _ => return Err(format!("expected f64 or f32, got {v:?}")),
                }
            }
            "eval_split" => {
                self.eval_split = match v {
                    "train" => sentcorr_core::features::Split::Train,
                    "test" => sentcorr_core::features::Split::Test,
                    _ => return Err(format!("expected train or test, got {v:?}")),
                }
            }
            "binarize" => {
                self.binarize = match v {
                    "topk" => Binarize::TopK,
                    "fixed" => Binarize::Fixed,
                    _ => return Err(format!("expected topk or fixed, got {v:?}")),
                }
            }
            "theta" => self.theta = parse(v)?,
            "top_k" => self.top_k = parse(v)?,
            "include_diagonal" => self.include_diagonal = parse_bool(v)?,
            "quorum" => self.quorum = if v == "all" { None } else { Some(parse(v)?) },
            "gradcheck_seed" => self.gradcheck_seed = parse(v)?,
            "gradcheck_eps" => self.gradcheck_eps = parse(v)?,
            "gradcheck_tolerance" => self.gradcheck_tolerance = parse(v)?,
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "corpus" => show_path(&self.corpus),
            "dataset" => show_opt(&self.dataset),
            "dict" => show_path(&self.dict),
            "vocab" => show_path(&self.vocab),
            "checkpoint" => show_path(&self.checkpoint),
            "out_dir" => self.out_dir.display().to_string(),
            "feature" => self.feature.to_string(),
            "model" => self.model.to_string(),
            "min_count" => self.min_count.to_string(),
            "seq_len" => self.seq_len.to_string(),
            "max_seq_len" => self.max_seq_len.to_string(),
            "embed_dim" => self.embed_dim.to_string(),
            "conv_out" => self.conv_out.to_string(),
            "lstm_hidden" => self.lstm_hidden.to_string(),
            "stack_dim" => self.stack_dim.to_string(),
            "window" => self.window.to_string(),
            "dropout_rate" => self.dropout_rate.to_string(),
            "activation" => self.activation.to_string(),
            "mean_by" => self.mean_by.to_string(),
            "epochs" => self.epochs.to_string(),
            "batch_size" => self.batch_size.to_string(),
            "learning_rate" => self.learning_rate.to_string(),
            "beta1" => self.beta1.to_string(),
            "beta2" => self.beta2.to_string(),
            "adam_epsilon" => self.adam_epsilon.to_string(),
            "seed" => self.seed.to_string(),
            "eval_every" => self.eval_every.to_string(),
            "shuffle" => self.shuffle.to_string(),
            "patience" => show_opt(&self.patience),
            "target_accuracy" => show_opt(&self.target_accuracy),
            "checkpoint_dtype" => match self.checkpoint_dtype {
                Dtype::F64 => "f64".into(),
                Dtype::F32 => "f32".into(),
            },
            "eval_split" => self.eval_split.to_string(),
            "binarize" => match self.binarize {
                Binarize::TopK => "topk".into(),
                Binarize::Fixed => "fixed".into(),
            },
            "theta" => self.theta.to_string(),
            "top_k" => self.top_k.to_string(),
            "include_diagonal" => self.include_diagonal.to_string(),
            "quorum" => self.quorum.map_or_else(|| "all".to_string(), |q| q.to_string()),
            "gradcheck_seed" => self.gradcheck_seed.to_string(),
            "gradcheck_eps" => self.gradcheck_eps.to_string(),
            "gradcheck_tolerance" => self.gradcheck_tolerance.to_string(),
            _ => return None,
        })
    }

    /// Applies `key = value` lines. `#` starts a comment.
    pub fn apply_file_text(&mut self, text: &str, origin: &Path) -> Result<(), CliError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = |m: String| CliError::Usage(format!("{}:{}: {m}", origin.display(), i + 1));
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| at(format!("expected `key = value`, got {line:?}")))?;
            self.set(key.trim(), value).map_err(at)?;
        }
        Ok(())
    }

    /// Applies `key=value` overrides from the command line.
    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<(), CliError> {
        for o in overrides {
            let (key, value) = o
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("--set expects key=value, got {o:?}")))?;
            self.set(key.trim(), value)
                .map_err(|m| CliError::Usage(format!("--set {o}: {m}")))?;
        }
        Ok(())
    }

    /// Defaults, then `file`, then `overrides`.
    pub fn resolve(file: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut cfg = RunConfig::default();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Core(sentcorr_core::Error::Io {
                    path: path.to_path_buf(),
                    source: e,
                })
            })?;
            cfg.apply_file_text(&text, path)?;
        }
        cfg.apply_overrides(overrides)?;
        Ok(cfg)
    }

    /// Snapshot text that resolves back to `self`.
    pub fn to_snapshot(&self) -> String {
        let mut out = String::from("# resolved configuration\n");
        for key in Self::KEYS {
            out.push_str(&format!("{key} = {}\n", self.get(key).expect("listed key")));
        }
        out
    }

    pub fn model_config(&self, seq_len: usize) -> ModelConfig {
        ModelConfig {
            embed_dim: self.embed_dim,
            conv_out: self.conv_out,
            lstm_hidden: self.lstm_hidden,
            stack_dim: self.stack_dim,
            window: self.window,
            dropout_rate: self.dropout_rate,
            seq_len,
            activation: self.activation,
            mean_by: self.mean_by,
            ..ModelConfig::default()
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            adam: AdamConfig {
                learning_rate: self.learning_rate,
                beta1: self.beta1,
                beta2: self.beta2,
                epsilon: self.adam_epsilon,
            },
            seed: self.seed,
            eval_every: self.eval_every,
            shuffle: self.shuffle,
            patience: self.patience,
            target_accuracy: self.target_accuracy,
        }
    }

    pub fn binarize_rule(&self) -> BinarizeRule {
        match self.binarize {
            Binarize::Fixed => BinarizeRule::Fixed { theta: self.theta },
            Binarize::TopK => BinarizeRule::TopK {
                k: self.top_k,
                include_diagonal: self.include_diagonal,
            },
        }
    }
}
