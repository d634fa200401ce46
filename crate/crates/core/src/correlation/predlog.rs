use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::label::SentimentLabel;

/// The (dataset, feature, model) combination a prediction came from.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ComboKey {
    pub dataset: String,
    pub feature: String,
    pub model: String,
}

impl ComboKey {
    pub fn new(dataset: impl Into<String>, feature: impl Into<String>, model: impl Into<String>) -> Self {
        ComboKey {
            dataset: dataset.into(),
            feature: feature.into(),
            model: model.into(),
        }
    }

    /// `dataset_feature_model` with anything outside `[A-Za-z0-9.-]`
    /// replaced by `-`.
    pub fn file_stem(&self) -> String {
        let clean = |s: &str| {
            s.chars()
                .map(|c| {
                    if c.is_ascii_alphanumeric() || c == '.' || c == '-' {
                        c
                    } else {
                        '-'
                    }
                })
                .collect::<String>()
        };
        format!(
            "{}_{}_{}",
            clean(&self.dataset),
            clean(&self.feature),
            clean(&self.model)
        )
    }
}

impl fmt::Display for ComboKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.dataset, self.feature, self.model)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictionRecord {
    pub sample_id: String,
    pub gold: SentimentLabel,
    pub predicted: SentimentLabel,
    pub combo: ComboKey,
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    sample_id: String,
    gold: SentimentLabel,
    predicted: SentimentLabel,
    dataset: String,
    feature: String,
    model: String,
}

pub const PREDICTION_LOG_HEADER: [&str; 6] = ["sample_id", "gold", "predicted", "dataset", "feature", "model"];

pub fn prediction_log_csv(records: &[PredictionRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    if records.is_empty() {
        w.write_record(PREDICTION_LOG_HEADER).expect("in-memory write");
    }
    for r in records {
        w.serialize(Row {
            sample_id: r.sample_id.clone(),
            gold: r.gold,
            predicted: r.predicted,
            dataset: r.combo.dataset.clone(),
            feature: r.combo.feature.clone(),
            model: r.combo.model.clone(),
        })
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

pub fn write_prediction_log(path: impl AsRef<Path>, records: &[PredictionRecord]) -> Result<()> {
    write_atomic(path.as_ref(), prediction_log_csv(records).as_bytes())
}

/// Parses a prediction log. The header must match exactly; errors carry
/// the 1-based file line.
pub fn parse_prediction_log(text: &str, origin: impl AsRef<Path>) -> Result<Vec<PredictionRecord>> {
    let origin = origin.as_ref();
    let mut r = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let headers = r
        .headers()
        .map_err(|e| Error::format(origin, 1, e.to_string()))?
        .clone();
    if headers.iter().ne(PREDICTION_LOG_HEADER) {
        return Err(Error::format(
            origin,
            1,
            format!(
                "expected header {:?}, found {:?}",
                PREDICTION_LOG_HEADER.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    let mut out = Vec::new();
    for row in r.deserialize::<Row>() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::format(origin, line, e.to_string())
        })?;
        out.push(PredictionRecord {
            sample_id: row.sample_id,
            gold: row.gold,
            predicted: row.predicted,
            combo: ComboKey::new(row.dataset, row.feature, row.model),
        });
    }
    Ok(out)
}

pub fn read_prediction_log(path: impl AsRef<Path>) -> Result<Vec<PredictionRecord>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_prediction_log(&text, path)
}

/// Splits records by combination, keeping file order within each group.
pub fn group_by_combo(records: Vec<PredictionRecord>) -> BTreeMap<ComboKey, Vec<PredictionRecord>> {
    let mut groups: BTreeMap<ComboKey, Vec<PredictionRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(r.combo.clone()).or_default().push(r);
    }
    groups
}
