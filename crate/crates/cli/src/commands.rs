//! Subcommand bodies. Every file is written via temp-then-rename.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use sentcorr_core::correlation::{
    confusion, correlation_report, group_by_combo, read_prediction_log, vote, write_prediction_log, Grid,
};
use sentcorr_core::features::{load_corpus, load_synonym_dict, EncodeStats, FeaturePipeline};
use sentcorr_core::fsutil::write_atomic;
use sentcorr_core::model::{model_grad_check, model_grad_check_config, predict as predict_one};
use sentcorr_core::training::{self, load_checkpoint, render_report, save_checkpoint, write_history, StopReason};
use sentcorr_core::{
    Checkpoint, ComboKey, Corpus, EncodedSample, Error, MetricsFile, ModelConfig, ModelKind, PredictionRecord,
    SentimentLabel, Split, Vocabulary,
};

use crate::config::{RunConfig, SNAPSHOT_FILE};
use crate::exit::CliError;

type Out<'a> = &'a mut dyn Write;

/// Vocabulary size used by `gradcheck`.
pub const GRADCHECK_VOCAB: usize = 20;

fn stdout_err(e: std::io::Error) -> CliError {
    CliError::Core(Error::Io {
        path: PathBuf::from("<stdout>"),
        source: e,
    })
}

macro_rules! say {
    ($out:expr, $($arg:tt)*) => {
        writeln!($out, $($arg)*).map_err(stdout_err)
    };
}

fn require<'a, T>(value: &'a Option<T>, key: &str) -> Result<&'a T, CliError> {
    value
        .as_ref()
        .ok_or_else(|| CliError::Usage(format!("`{key}` is not set (use --set {key}=... or a config file)")))
}

pub fn write_snapshot(cfg: &RunConfig) -> Result<(), CliError> {
    write_atomic(&cfg.out_dir.join(SNAPSHOT_FILE), cfg.to_snapshot().as_bytes())?;
    Ok(())
}

pub fn vocab_path(cfg: &RunConfig) -> PathBuf {
    cfg.vocab.clone().unwrap_or_else(|| cfg.out_dir.join("vocab.tsv"))
}

pub fn checkpoint_path(cfg: &RunConfig) -> PathBuf {
    cfg.checkpoint.clone().unwrap_or_else(|| cfg.out_dir.join("model.ckpt"))
}

fn pipeline(cfg: &RunConfig) -> Result<FeaturePipeline, CliError> {
    let dict = cfg.dict.as_ref().map(load_synonym_dict).transpose()?;
    Ok(FeaturePipeline::new(cfg.feature, dict)?)
}

fn corpus(cfg: &RunConfig) -> Result<Corpus, CliError> {
    Ok(load_corpus(require(&cfg.corpus, "corpus")?, cfg.dataset.as_deref())?)
}

fn encode(
    pipe: &FeaturePipeline,
    corpus: &Corpus,
    split: Split,
    vocab: &Vocabulary,
    seq_len: usize,
) -> Vec<EncodedSample> {
    let mut stats = EncodeStats::default();
    let samples = pipe.encode_split(corpus, split, vocab, seq_len, &mut stats);
    log::info!(
        "{split}: {} samples, {} truncated, {} unknown tokens",
        stats.samples,
        stats.truncated,
        stats.unknown_tokens
    );
    samples
}

pub fn vocab(cfg: &RunConfig, out: Out) -> Result<(), CliError> {
    let pipe = pipeline(cfg)?;
    let corpus = corpus(cfg)?;
    let vocab = pipe.build_vocab(&corpus, cfg.min_count)?;
    let path = vocab_path(cfg);
    vocab.save(&path)?;
    say!(
        out,
        "vocabulary: {} entries, digest {} -> {}",
        vocab.len(),
        vocab.digest(),
        path.display()
    )
}

pub fn train(cfg: &RunConfig, out: Out) -> Result<(), CliError> {
    let pipe = pipeline(cfg)?;
    let corpus = corpus(cfg)?;
    let vocab = match &cfg.vocab {
        Some(path) => Vocabulary::load(path, cfg.feature)?,
        None => {
            let v = pipe.build_vocab(&corpus, cfg.min_count)?;
            v.save(vocab_path(cfg))?;
            v
        }
    };
    let seq_len = if cfg.seq_len == 0 {
        pipe.auto_seq_len(&corpus, cfg.max_seq_len)
    } else {
        cfg.seq_len
    };
    let model_config = cfg.model_config(seq_len);
    let train_set = encode(&pipe, &corpus, Split::Train, &vocab, seq_len);
    let test_set = encode(&pipe, &corpus, Split::Test, &vocab, seq_len);

    let outcome = training::train(
        &cfg.train_config(),
        &model_config,
        cfg.model,
        vocab.len(),
        &train_set,
        &test_set,
    )?;
    let history_path = cfg.out_dir.join("history.csv");
    write_history(&history_path, &outcome.history)?;
    if let StopReason::Diverged(why) = &outcome.stop {
        return Err(CliError::Numerical(format!(
            "training diverged ({why}); partial history in {}",
            history_path.display()
        )));
    }

    let ckpt = Checkpoint {
        config: model_config,
        vocab_digest: vocab.digest(),
        epoch: outcome.epochs_completed,
        seed: cfg.seed,
        params: outcome.params,
    };
    let ckpt_path = checkpoint_path(cfg);
    save_checkpoint(&ckpt, &ckpt_path, cfg.checkpoint_dtype)?;

    say!(
        out,
        "stopped: {:?} after {} epochs",
        outcome.stop,
        outcome.epochs_completed
    )?;
    for split in [Split::Train, Split::Test] {
        if let Some(m) = outcome.history.iter().rev().find(|m| m.split == split) {
            say!(out, "{split}: loss {:.4} accuracy {:.4}", m.loss, m.accuracy)?;
        }
    }
    say!(out, "checkpoint -> {}", ckpt_path.display())?;
    say!(out, "history -> {}", history_path.display())
}

/// Loads the vocabulary and a checkpoint trained on it.
fn load_model(cfg: &RunConfig) -> Result<(Vocabulary, Checkpoint), CliError> {
    let vocab = Vocabulary::load(vocab_path(cfg), cfg.feature)?;
    let ckpt = load_checkpoint(checkpoint_path(cfg), Some(&vocab.digest()))?;
    if ckpt.kind() != cfg.model {
        log::warn!("checkpoint holds {}, ignoring model = {}", ckpt.kind(), cfg.model);
    }
    Ok((vocab, ckpt))
}

pub fn eval(cfg: &RunConfig, out: Out) -> Result<(), CliError> {
    let pipe = pipeline(cfg)?;
    let corpus = corpus(cfg)?;
    let (vocab, ckpt) = load_model(cfg)?;
    let samples = encode(&pipe, &corpus, cfg.eval_split, &vocab, ckpt.config.seq_len);
    let evaluation = training::evaluate(&ckpt.params, &ckpt.config, &samples, ckpt.epoch, cfg.eval_split)?;

    let combo = ComboKey::new(corpus.dataset_key.as_str(), cfg.feature.as_str(), ckpt.kind().as_str());
    let metrics_path = cfg.out_dir.join(format!("metrics_{}.json", combo.file_stem()));
    let log_path = cfg.out_dir.join(format!("predictions_{}.csv", combo.file_stem()));
    let records: Vec<PredictionRecord> = evaluation
        .predictions
        .iter()
        .map(|p| PredictionRecord {
            sample_id: p.sample_id.clone(),
            gold: p.gold,
            predicted: p.predicted,
            combo: combo.clone(),
        })
        .collect();
    let file = MetricsFile {
        dataset: combo.dataset.clone(),
        feature: combo.feature.clone(),
        model: combo.model.clone(),
        metrics: evaluation.metrics,
    };
    file.save(&metrics_path)?;
    write_prediction_log(&log_path, &records)?;

    say!(
        out,
        "{combo} {}: loss {:.4} accuracy {:.4}",
        cfg.eval_split,
        file.metrics.loss,
        file.metrics.accuracy
    )?;
    say!(out, "metrics -> {}", metrics_path.display())?;
    say!(out, "predictions -> {}", log_path.display())
}

/// One output line per input line: tag, then the six class probabilities
/// in tag order.
pub fn predict(cfg: &RunConfig, input: &mut dyn BufRead, out: Out) -> Result<(), CliError> {
    let pipe = pipeline(cfg)?;
    let (vocab, ckpt) = load_model(cfg)?;
    let mut stats = EncodeStats::default();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| {
            CliError::Core(Error::Io {
                path: PathBuf::from("<stdin>"),
                source: e,
            })
        })?;
        // The label is a placeholder; prediction never reads it.
        let sample = pipe.encode_text(
            &format!("stdin-{}", i + 1),
            &line,
            SentimentLabel::Love,
            "stdin",
            &vocab,
            ckpt.config.seq_len,
            &mut stats,
        );
        let p = predict_one(&ckpt.params, &ckpt.config, &sample)?;
        let probs: Vec<String> = p.probs.iter().map(|q| format!("{q:.6}")).collect();
        say!(out, "{}\t{}", p.label.tag(), probs.join("\t"))?;
    }
    Ok(())
}

fn grid_csv<T: std::fmt::Display>(grid: &Grid<T>) -> String {
    let tags: Vec<&str> = SentimentLabel::ALL.iter().map(|l| l.tag()).collect();
    let mut s = format!("predicted\\gold,{}\n", tags.join(","));
    for (a, row) in grid.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        s.push_str(&format!("{},{}\n", tags[a], cells.join(",")));
    }
    s
}

pub fn correlate(cfg: &RunConfig, logs: &[PathBuf], out: Out) -> Result<(), CliError> {
    let mut records = Vec::new();
    for path in logs {
        records.extend(read_prediction_log(path)?);
    }
    let groups = group_by_combo(records);
    if groups.is_empty() {
        return Err(CliError::Core(Error::Input("prediction logs hold no records".into())));
    }
    let rule = cfg.binarize_rule();
    let mut matrices = Vec::with_capacity(groups.len());
    let mut binaries = Vec::with_capacity(groups.len());
    for recs in groups.values() {
        let m = confusion(recs)?;
        binaries.push(rule.apply(&m)?);
        matrices.push(m);
    }
    let result = vote(&binaries, cfg.quorum)?;
    let report = correlation_report(&matrices, &binaries, &result);

    let dir = cfg.out_dir.join("matrices");
    for (combo, csv) in &report.matrix_csv {
        write_atomic(&dir.join(format!("{}.csv", combo.file_stem())), csv.as_bytes())?;
    }
    let vote_path = cfg.out_dir.join("vote.csv");
    write_atomic(&vote_path, grid_csv(&result.t).as_bytes())?;
    let report_path = cfg.out_dir.join("correlation.md");
    write_atomic(&report_path, report.text.as_bytes())?;

    say!(
        out,
        "{} combinations, rule {rule}, quorum {}",
        matrices.len(),
        result.quorum
    )?;
    for p in &report.ranked {
        say!(
            out,
            "{} -> {}  {}/{}  mean C {:.3}",
            p.gold.tag(),
            p.predicted.tag(),
            p.support,
            matrices.len(),
            p.mean_c
        )?;
    }
    say!(out, "matrices -> {}", dir.display())?;
    say!(out, "vote -> {}", vote_path.display())?;
    say!(out, "report -> {}", report_path.display())
}

/// Both model kinds at [`ModelConfig::tiny`] with [`GRADCHECK_VOCAB`]
/// tokens; fails when the worst error exceeds `gradcheck_tolerance`.
pub fn gradcheck(cfg: &RunConfig, out: Out) -> Result<(), CliError> {
    let check = sentcorr_core::nn::GradCheckConfig {
        eps: cfg.gradcheck_eps,
        ..model_grad_check_config(cfg.gradcheck_seed)
    };
    let config = ModelConfig::tiny();
    let mut worst = 0.0f64;
    for kind in ModelKind::ALL {
        let r = model_grad_check(kind, &config, GRADCHECK_VOCAB, &check)?;
        let at = r
            .worst
            .as_ref()
            .map(|w| format!(" at {}[{}]", w.tensor, w.index))
            .unwrap_or_default();
        say!(
            out,
            "{kind}: {} entries, max relative error {:.3e}{at}",
            r.entries_checked,
            r.max_rel_error
        )?;
        if !r.max_rel_error.is_finite() {
            return Err(CliError::Numerical(format!(
                "{kind}: non-finite gradient check error{at}"
            )));
        }
        worst = worst.max(r.max_rel_error);
    }
    say!(out, "max relative error: {worst:.3e}")?;
    if worst >= cfg.gradcheck_tolerance {
        return Err(CliError::Numerical(format!(
            "max relative error {worst:.3e} is not below {:.1e}",
            cfg.gradcheck_tolerance
        )));
    }
    Ok(())
}

pub fn report(cfg: &RunConfig, metrics: &[PathBuf], out: Out) -> Result<(), CliError> {
    let files = metrics.iter().map(MetricsFile::load).collect::<Result<Vec<_>, _>>()?;
    let text = render_report(&files);
    let path: &Path = &cfg.out_dir.join("report.md");
    write_atomic(path, text.as_bytes())?;
    write!(out, "{text}").map_err(stdout_err)
}
