//! Text → fixed-length masked id sequences under one of three feature modes.
//!
//! * **Explicit**: whitespace-separated word tokens as given (corpora arrive
//!   pre-segmented).
//! * **Implicit**: explicit tokens replaced by their synonym-group tag, so
//!   synonyms share one feature. Words absent from the dictionary pass
//!   through unchanged.
//! * **Character**: every non-whitespace unicode scalar value.

mod corpus;
mod dictionary;
mod vocab;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use corpus::{load_corpus, Corpus, RawRecord, Split};
pub use dictionary::{load_synonym_dict, SynonymDictionary};
pub use vocab::{auto_seq_len, encode, EncodeStats, EncodedSample, Vocabulary, NONE_ID, NONE_TOKEN, UNK_ID, UNK_TOKEN};

use crate::error::{Error, Result};
use crate::label::SentimentLabel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureMode {
    Explicit,
    Implicit,
    Character,
}

impl FeatureMode {
    pub const ALL: [FeatureMode; 3] = [FeatureMode::Explicit, FeatureMode::Implicit, FeatureMode::Character];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureMode::Explicit => "explicit",
            FeatureMode::Implicit => "implicit",
            FeatureMode::Character => "character",
        }
    }

    /// Row label used in report grids.
    pub fn short(self) -> &'static str {
        match self {
            FeatureMode::Explicit => "exp",
            FeatureMode::Implicit => "imp",
            FeatureMode::Character => "char",
        }
    }
}

impl fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s || m.short() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown feature mode {s:?} (expected explicit|implicit|character)"
                ))
            })
    }
}

/// Splits `text` into feature tokens. Implicit mode needs a dictionary.
pub fn tokenize(text: &str, mode: FeatureMode, dict: Option<&SynonymDictionary>) -> Result<Vec<String>> {
    Ok(match mode {
        FeatureMode::Explicit => text.split_whitespace().map(str::to_string).collect(),
        FeatureMode::Character => text.chars().filter(|c| !c.is_whitespace()).map(String::from).collect(),
        FeatureMode::Implicit => {
            let dict =
                dict.ok_or_else(|| Error::Config("implicit feature mode requires a synonym dictionary".into()))?;
            text.split_whitespace()
                .map(|w| dict.tag_of(w).unwrap_or(w).to_string())
                .collect()
        }
    })
}

/// Tokenizer bound to a mode and (for implicit mode) a dictionary.
#[derive(Debug, Clone)]
pub struct FeaturePipeline {
    mode: FeatureMode,
    dict: Option<SynonymDictionary>,
}

impl FeaturePipeline {
    pub fn new(mode: FeatureMode, dict: Option<SynonymDictionary>) -> Result<Self> {
        if mode == FeatureMode::Implicit && dict.is_none() {
            return Err(Error::Config(
                "implicit feature mode requires a synonym dictionary".into(),
            ));
        }
        Ok(FeaturePipeline { mode, dict })
    }

    pub fn mode(&self) -> FeatureMode {
        self.mode
    }

    pub fn tokenize(&self, text: &str) -> Vec<String> {
        tokenize(text, self.mode, self.dict.as_ref()).expect("dictionary presence checked in new")
    }

    /// Builds a vocabulary from the corpus training split.
    pub fn build_vocab(&self, corpus: &Corpus, min_count: usize) -> Result<Vocabulary> {
        let docs: Vec<Vec<String>> = corpus.split(Split::Train).map(|r| self.tokenize(&r.text)).collect();
        Vocabulary::build(&docs, self.mode, min_count)
    }

    /// Longest training document in tokens, capped.
    pub fn auto_seq_len(&self, corpus: &Corpus, cap: usize) -> usize {
        let lengths = corpus.split(Split::Train).map(|r| self.tokenize(&r.text).len());
        auto_seq_len(lengths, cap)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn encode_text(
        &self,
        id: &str,
        text: &str,
        label: SentimentLabel,
        dataset_key: &str,
        vocab: &Vocabulary,
        seq_len: usize,
        stats: &mut EncodeStats,
    ) -> EncodedSample {
        let tokens = self.tokenize(text);
        EncodedSample::new(id, label, dataset_key, encode(&tokens, vocab, seq_len, stats))
    }

    /// Encodes every record of one split.
    pub fn encode_split(
        &self,
        corpus: &Corpus,
        split: Split,
        vocab: &Vocabulary,
        seq_len: usize,
        stats: &mut EncodeStats,
    ) -> Vec<EncodedSample> {
        corpus
            .split(split)
            .map(|r| self.encode_text(&r.id, &r.text, r.label, &corpus.dataset_key, vocab, seq_len, stats))
            .collect()
    }
}
