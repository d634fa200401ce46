use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use sentcorr_cli::{run_with, ExitStatus};
use sentcorr_core::correlation::{write_prediction_log, ComboKey, PredictionRecord};
use sentcorr_core::synthetic::{keyword_corpus, keyword_dictionary, SyntheticConfig};
use sentcorr_core::training::{MetricsFile, MetricsRecord};
use sentcorr_core::{SentimentLabel, Split};

fn sentcorr(args: &[&str], stdin: &str) -> (ExitStatus, String) {
    let mut input = stdin.as_bytes();
    let mut output = Vec::new();
    let argv = std::iter::once("sentcorr").chain(args.iter().copied());
    let status = run_with(argv, &mut input, &mut output);
    (status, String::from_utf8(output).unwrap())
}

fn set(key: &str, value: impl AsRef<Path>) -> String {
    format!("{key}={}", value.as_ref().display())
}

fn synthetic_corpus(dir: &Path) -> PathBuf {
    let path = dir.join("synthetic.jsonl");
    fs::write(&path, keyword_corpus(&SyntheticConfig::default()).unwrap().to_jsonl()).unwrap();
    path
}

/// Small model settings so training runs in well under a second per epoch.
const SMALL: [&str; 6] = [
    "embed_dim=8",
    "conv_out=8",
    "lstm_hidden=8",
    "stack_dim=8",
    "epochs=2",
    "dropout_rate=0.2",
];

fn with_sets<'a>(cmd: &'a str, sets: &'a [String]) -> Vec<&'a str> {
    let mut v = vec![cmd];
    for s in sets {
        v.push("--set");
        v.push(s);
    }
    v
}

#[test]
fn unknown_key_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = set("out_dir", dir.path());
    let (status, _) = sentcorr(&["vocab", "--set", &out, "--set", "windw=5"], "");
    assert_eq!(status, ExitStatus::Usage);

    let conf = dir.path().join("run.conf");
    fs::write(&conf, "# settings\nepochs = 3\nwindw = 5\n").unwrap();
    let (status, _) = sentcorr(&["vocab", "--config", conf.to_str().unwrap(), "--set", &out], "");
    assert_eq!(status, ExitStatus::Usage);

    assert_eq!(sentcorr(&["frobnicate"], "").0, ExitStatus::Usage);
    assert_eq!(sentcorr(&["correlate", "--set", &out], "").0, ExitStatus::Usage);
}

#[test]
fn snapshot_holds_resolved_values() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    fs::write(&conf, "epochs = 5\n").unwrap();
    let out = set("out_dir", dir.path().join("o"));
    // Fails for lack of a corpus, after the snapshot is written.
    let (status, _) = sentcorr(
        &[
            "train",
            "--config",
            conf.to_str().unwrap(),
            "--set",
            &out,
            "--set",
            "epochs=9",
        ],
        "",
    );
    assert_eq!(status, ExitStatus::Usage);
    let snap = fs::read_to_string(dir.path().join("o/config.resolved")).unwrap();
    for line in [
        "epochs = 9",
        "embed_dim = 100",
        "lstm_hidden = 128",
        "window = 5",
        "batch_size = 32",
    ] {
        assert!(snap.lines().any(|l| l == line), "{line} missing from\n{snap}");
    }
}

#[test]
fn train_eval_predict_on_keyword_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synthetic_corpus(dir.path());
    let out_dir = dir.path().join("run");
    let sets = [
        set("corpus", &corpus),
        set("out_dir", &out_dir),
        "epochs=50".into(),
        "target_accuracy=0.99".into(),
    ];

    let (status, text) = sentcorr(&with_sets("train", &sets), "");
    assert_eq!(status, ExitStatus::Success, "{text}");
    for f in ["model.ckpt", "vocab.tsv", "history.csv", "config.resolved"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }

    let (status, text) = sentcorr(&with_sets("eval", &sets), "");
    assert_eq!(status, ExitStatus::Success, "{text}");
    let m = MetricsFile::load(out_dir.join("metrics_synthetic_explicit_cnn-lstm2.json")).unwrap();
    assert_eq!(m.metrics.split, Split::Test);
    assert!(m.metrics.accuracy >= 0.95, "test accuracy {}", m.metrics.accuracy);
    let log = fs::read_to_string(out_dir.join("predictions_synthetic_explicit_cnn-lstm2.csv")).unwrap();
    assert_eq!(log.lines().count(), 121);

    let (status, text) = sentcorr(&with_sets("predict", &sets), "");
    assert_eq!(status, ExitStatus::Success);
    assert!(text.is_empty());

    let (status, text) = sentcorr(
        &with_sets("predict", &sets),
        "w001 gdkw0 gdkw1 gdkw2 w002\nfnkw2 w010 fnkw0 fnkw1\n",
    );
    assert_eq!(status, ExitStatus::Success);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    for (line, tag) in lines.iter().zip(["gd", "fn"]) {
        let fields: Vec<&str> = line.split('\t').collect();
        assert_eq!(fields.len(), 7);
        assert_eq!(fields[0], tag);
        let total: f64 = fields[1..].iter().map(|f| f.parse::<f64>().unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-5);
    }
}

#[test]
fn rerun_from_snapshot_is_bitwise_identical() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synthetic_corpus(dir.path());
    let first = dir.path().join("a");
    let mut sets: Vec<String> = SMALL.iter().map(|s| s.to_string()).collect();
    sets.extend([
        set("corpus", &corpus),
        set("out_dir", &first),
        "model=cnn_lstm2_stack".into(),
    ]);
    assert_eq!(sentcorr(&with_sets("train", &sets), "").0, ExitStatus::Success);

    let second = dir.path().join("b");
    let snap = first.join("config.resolved");
    let out = set("out_dir", &second);
    let (status, _) = sentcorr(&["train", "--config", snap.to_str().unwrap(), "--set", &out], "");
    assert_eq!(status, ExitStatus::Success);
    for f in ["model.ckpt", "history.csv", "vocab.tsv"] {
        assert_eq!(
            fs::read(first.join(f)).unwrap(),
            fs::read(second.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn implicit_mode_uses_dictionary() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synthetic_corpus(dir.path());
    let dict_path = dir.path().join("dict.tsv");
    let cfg = SyntheticConfig::default();
    let mut text = String::new();
    for label in SentimentLabel::ALL {
        for j in 0..cfg.signals_per_class {
            text.push_str(&format!(
                "syn_{}\t{}\n",
                label.tag(),
                sentcorr_core::synthetic::signal_token(label, j)
            ));
        }
    }
    fs::write(&dict_path, &text).unwrap();
    assert_eq!(keyword_dictionary(&cfg).len(), 18);

    let out_dir = dir.path().join("o");
    let base = [
        set("corpus", &corpus),
        set("out_dir", &out_dir),
        "feature=implicit".into(),
    ];
    assert_eq!(sentcorr(&with_sets("vocab", &base), "").0, ExitStatus::Usage);

    let mut sets = base.to_vec();
    sets.push(set("dict", &dict_path));
    let (status, text) = sentcorr(&with_sets("vocab", &sets), "");
    assert_eq!(status, ExitStatus::Success, "{text}");
    let vocab = fs::read_to_string(out_dir.join("vocab.tsv")).unwrap();
    assert!(vocab.contains("syn_gd"));
    assert!(!vocab.contains("gdkw0"));
}

fn write_logs(dir: &Path) -> Vec<PathBuf> {
    let mut paths = Vec::new();
    for dataset in ["news", "titles", "comments"] {
        for feature in ["explicit", "implicit", "character"] {
            for model in ["cnn_lstm2", "cnn_lstm2_stack"] {
                let combo = ComboKey::new(dataset, feature, model);
                let mut records = Vec::new();
                for i in 0..60 {
                    let gold = SentimentLabel::from_index(i % 6).unwrap();
                    // Every combination confuses some surprise with joy.
                    let predicted = if gold == SentimentLabel::Surprise && i % 4 == 0 {
                        SentimentLabel::Joy
                    } else {
                        gold
                    };
                    records.push(PredictionRecord {
                        sample_id: i.to_string(),
                        gold,
                        predicted,
                        combo: combo.clone(),
                    });
                }
                let path = dir.join(format!("{}.csv", combo.file_stem()));
                write_prediction_log(&path, &records).unwrap();
                paths.push(path);
            }
        }
    }
    paths
}

#[test]
fn correlate_over_eighteen_logs() {
    let dir = tempfile::tempdir().unwrap();
    let logs = write_logs(dir.path());
    assert_eq!(logs.len(), 18);
    let out_dir = dir.path().join("corr");
    let out = set("out_dir", &out_dir);
    let mut args = vec![
        "correlate",
        "--set",
        &out,
        "--set",
        "binarize=fixed",
        "--set",
        "theta=0.2",
    ];
    let log_args: Vec<String> = logs.iter().map(|p| p.display().to_string()).collect();
    args.extend(log_args.iter().map(String::as_str));
    let (status, text) = sentcorr(&args, "");
    assert_eq!(status, ExitStatus::Success, "{text}");

    assert_eq!(fs::read_dir(out_dir.join("matrices")).unwrap().count(), 18);
    let report = fs::read_to_string(out_dir.join("correlation.md")).unwrap();
    assert!(report.contains("| 1 | xq (surprise) | gx (joy) | 18/18 |"), "{report}");
    let vote = fs::read_to_string(out_dir.join("vote.csv")).unwrap();
    let gx_row: Vec<&str> = vote.lines().nth(3).unwrap().split(',').collect();
    assert_eq!(gx_row, ["gx", "0", "0", "1", "0", "1", "0"]);
}

#[test]
fn report_reproduces_summary_row() {
    let dir = tempfile::tempdir().unwrap();
    let record = MetricsRecord::from_pairs(1, Split::Test, 0.0, [(SentimentLabel::Love, SentimentLabel::Love)]);
    let mut record = record;
    for (c, f1) in record
        .classes
        .iter_mut()
        .zip([0.804, 0.796, 0.926, 0.622, 0.928, 0.869])
    {
        c.f1 = f1;
    }
    record.accuracy = 0.850;
    let path = dir.path().join("m.json");
    MetricsFile {
        dataset: "comments".into(),
        feature: "explicit".into(),
        model: "cnn_lstm2".into(),
        metrics: record,
    }
    .save(&path)
    .unwrap();
    let out = set("out_dir", dir.path());
    let (status, text) = sentcorr(&["report", "--set", &out, path.to_str().unwrap()], "");
    assert_eq!(status, ExitStatus::Success);
    assert!(
        text.contains("| exp M1 | 0.804 | 0.796 | 0.926 | 0.622 | 0.928 | 0.869 | 0.850 |"),
        "{text}"
    );
    assert_eq!(fs::read_to_string(dir.path().join("report.md")).unwrap(), text);
}

#[test]
fn gradcheck_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = set("out_dir", dir.path());
    let (status, text) = sentcorr(&["gradcheck", "--set", &out], "");
    assert_eq!(status, ExitStatus::Success, "{text}");
    assert!(text.contains("max relative error"));
    let (status, _) = sentcorr(&["gradcheck", "--set", &out, "--set", "gradcheck_tolerance=1e-30"], "");
    assert_eq!(status, ExitStatus::Numerical);
}

#[test]
fn error_classes_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("o");
    let out = set("out_dir", &out_dir);

    let missing = set("corpus", dir.path().join("absent.jsonl"));
    assert_eq!(
        sentcorr(&["vocab", "--set", &out, "--set", &missing], "").0,
        ExitStatus::Io
    );

    let bad = dir.path().join("bad.jsonl");
    fs::write(&bad, "{\"id\": \"a\", \"text\": \"x\"}\n").unwrap();
    assert_eq!(
        sentcorr(&["vocab", "--set", &out, "--set", &set("corpus", &bad)], "").0,
        ExitStatus::InputFormat
    );

    let not_ckpt = dir.path().join("junk.ckpt");
    fs::write(&not_ckpt, b"not a checkpoint").unwrap();
    let corpus = synthetic_corpus(dir.path());
    assert_eq!(
        sentcorr(&["vocab", "--set", &out, "--set", &set("corpus", &corpus)], "").0,
        ExitStatus::Success
    );
    let args = [
        "eval",
        "--set",
        &out,
        "--set",
        &set("corpus", &corpus),
        "--set",
        &set("checkpoint", &not_ckpt),
    ];
    assert_eq!(sentcorr(&args, "").0, ExitStatus::InputFormat);
    assert!(!out_dir.join("metrics_synthetic_explicit_cnn-lstm2.json").exists());
}

#[test]
fn divergence_keeps_partial_history() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synthetic_corpus(dir.path());
    let out_dir = dir.path().join("o");
    let mut sets: Vec<String> = SMALL.iter().map(|s| s.to_string()).collect();
    sets.extend([
        set("corpus", &corpus),
        set("out_dir", &out_dir),
        "learning_rate=1e308".into(),
    ]);
    let (status, _) = sentcorr(&with_sets("train", &sets), "");
    assert_eq!(status, ExitStatus::Numerical);
    assert!(out_dir.join("history.csv").exists());
    assert!(!out_dir.join("model.ckpt").exists());
}

#[test]
fn binary_reports_exit_codes() {
    let exe = env!("CARGO_BIN_EXE_sentcorr");
    let dir = tempfile::tempdir().unwrap();
    let out = set("out_dir", dir.path());
    let status = Command::new(exe)
        .args(["predict", "--set", &out, "--set", "nope=1"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
    let status = Command::new(exe)
        .args(["report", "--set", &out, "/nonexistent/m.json"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(4));
    let status = Command::new(exe).arg("--help").status().unwrap();
    assert_eq!(status.code(), Some(0));
}
