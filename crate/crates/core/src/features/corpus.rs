use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::SentimentLabel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One line of a corpus file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawRecord {
    pub id: String,
    pub text: String,
    pub label: SentimentLabel,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub dataset_key: String,
    pub records: Vec<RawRecord>,
}

impl Corpus {
    pub fn new(dataset_key: impl Into<String>, records: Vec<RawRecord>) -> Self {
        Corpus {
            dataset_key: dataset_key.into(),
            records,
        }
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &RawRecord> + '_ {
        self.records.iter().filter(move |r| r.split == split)
    }

    /// Parses JSON lines. Blank lines are skipped.
    pub fn parse(text: &str, dataset_key: impl Into<String>, origin: impl AsRef<Path>) -> Result<Self> {
        let origin = origin.as_ref();
        let mut records = Vec::new();
        for (lineno, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l)) {
            if line.trim().is_empty() {
                continue;
            }
            let record: RawRecord =
                serde_json::from_str(line).map_err(|e| Error::format(origin, lineno, e.to_string()))?;
            records.push(record);
        }
        Ok(Corpus::new(dataset_key, records))
    }

    /// One JSON object per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("records serialize"));
            out.push('\n');
        }
        out
    }
}

/// Loads a JSON-lines corpus. `dataset_key` defaults to the file stem.
pub fn load_corpus(path: impl AsRef<Path>, dataset_key: Option<&str>) -> Result<Corpus> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let key = match dataset_key {
        Some(k) if !k.is_empty() => k.to_string(),
        _ => path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "corpus".into()),
    };
    Corpus::parse(&text, key, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_records() {
        let text = r#"{"id":"a1","text":"I like small cat","label":"gd","split":"train"}

{"id":"a2","text":"so sad","label":"ng","split":"test"}
"#;
        let c = Corpus::parse(text, "d1", "c.jsonl").unwrap();
        assert_eq!(c.records.len(), 2);
        assert_eq!(c.split(Split::Train).count(), 1);
        assert_eq!(c.records[1].label, SentimentLabel::Sadness);
        let back = Corpus::parse(&c.to_jsonl(), "d1", "c").unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn bad_label_and_split_report_line() {
        let bad_label = r#"{"id":"a","text":"x","label":"zz","split":"train"}"#;
        assert!(matches!(
            Corpus::parse(bad_label, "d", "c"),
            Err(Error::Format { line: 1, .. })
        ));
        let text = format!(
            "{}\n{}",
            r#"{"id":"a","text":"x","label":"gd","split":"train"}"#,
            r#"{"id":"b","text":"x","label":"gd","split":"dev"}"#
        );
        assert!(matches!(
            Corpus::parse(&text, "d", "c"),
            Err(Error::Format { line: 2, .. })
        ));
    }

    #[test]
    fn dataset_key_defaults_to_file_stem() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("comments.jsonl");
        std::fs::write(&path, r#"{"id":"a","text":"x","label":"fn","split":"train"}"#).unwrap();
        assert_eq!(load_corpus(&path, None).unwrap().dataset_key, "comments");
        assert_eq!(load_corpus(&path, Some("D1")).unwrap().dataset_key, "D1");
    }
}
