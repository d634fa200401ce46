use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// The six sentiment classes. Discriminants are the canonical class indices
/// and never change; checkpoints and reports rely on them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum SentimentLabel {
    Love = 0,
    Fear = 1,
    Joy = 2,
    Sadness = 3,
    Surprise = 4,
    Anger = 5,
}

pub const NUM_CLASSES: usize = 6;

impl SentimentLabel {
    pub const ALL: [SentimentLabel; NUM_CLASSES] = [
        SentimentLabel::Love,
        SentimentLabel::Fear,
        SentimentLabel::Joy,
        SentimentLabel::Sadness,
        SentimentLabel::Surprise,
        SentimentLabel::Anger,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    /// Two-letter tag used in corpora, logs and report headers.
    pub fn tag(self) -> &'static str {
        match self {
            SentimentLabel::Love => "gd",
            SentimentLabel::Fear => "zj",
            SentimentLabel::Joy => "gx",
            SentimentLabel::Sadness => "ng",
            SentimentLabel::Surprise => "xq",
            SentimentLabel::Anger => "fn",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SentimentLabel::Love => "love",
            SentimentLabel::Fear => "fear",
            SentimentLabel::Joy => "joy",
            SentimentLabel::Sadness => "sadness",
            SentimentLabel::Surprise => "surprise",
            SentimentLabel::Anger => "anger",
        }
    }

    /// Index of the largest entry; the lowest index wins ties.
    pub fn argmax(probs: &[f64]) -> SentimentLabel {
        let mut best = 0;
        for (i, &p) in probs.iter().enumerate().take(NUM_CLASSES) {
            if p > probs[best] {
                best = i;
            }
        }
        Self::ALL[best]
    }
}

impl fmt::Display for SentimentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for SentimentLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|l| l.tag() == s || l.name() == s)
            .ok_or_else(|| Error::Input(format!("unknown sentiment tag {s:?}")))
    }
}

impl From<SentimentLabel> for String {
    fn from(l: SentimentLabel) -> String {
        l.tag().to_string()
    }
}

impl TryFrom<String> for SentimentLabel {
    type Error = Error;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}
