use std::collections::HashMap;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::features::FeatureMode;
use crate::fsutil::write_atomic;
use crate::label::SentimentLabel;

pub const NONE_ID: usize = 0;
pub const UNK_ID: usize = 1;
/// Padding symbol, always id 0.
pub const NONE_TOKEN: &str = "none";
pub const UNK_TOKEN: &str = "<unk>";

/// Bijection between tokens and ids `0..V`. Ids 0 and 1 are reserved for
/// the padding symbol and unknown tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    mode: FeatureMode,
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    fn from_tokens(mode: FeatureMode, tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocabulary { mode, tokens, index }
    }

    /// Tokens are ordered by descending frequency, ties broken
    /// lexicographically; tokens seen fewer than `min_count` times are dropped.
    pub fn build(docs: &[Vec<String>], mode: FeatureMode, min_count: usize) -> Result<Self> {
        if min_count == 0 {
            return Err(Error::Config("min_count must be at least 1".into()));
        }
        if docs.is_empty() {
            return Err(Error::Input(
                "cannot build a vocabulary from an empty training corpus".into(),
            ));
        }
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for tok in docs.iter().flatten() {
            *counts.entry(tok.as_str()).or_default() += 1;
        }
        let mut ranked: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|&(t, c)| c >= min_count && t != NONE_TOKEN && t != UNK_TOKEN)
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

        let mut tokens = vec![NONE_TOKEN.to_string(), UNK_TOKEN.to_string()];
        tokens.extend(ranked.into_iter().map(|(t, _)| t.to_string()));
        Ok(Vocabulary::from_tokens(mode, tokens))
    }

    pub fn mode(&self) -> FeatureMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Id of `token`, or [`UNK_ID`] when absent.
    pub fn id_of(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    /// `id<TAB>token` lines, ids ascending from 0.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (i, t) in self.tokens.iter().enumerate() {
            out.push_str(&format!("{i}\t{t}\n"));
        }
        out
    }

    /// Hex SHA-256 of the serialized vocabulary. Checkpoints store it.
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.to_tsv().as_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn parse(text: &str, mode: FeatureMode, origin: impl AsRef<Path>) -> Result<Self> {
        let origin = origin.as_ref();
        let mut tokens = Vec::new();
        for (lineno, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l)) {
            if line.is_empty() {
                continue;
            }
            let (id, token) = line
                .split_once('\t')
                .ok_or_else(|| Error::format(origin, lineno, "expected \"id<TAB>token\""))?;
            let id: usize = id
                .parse()
                .map_err(|_| Error::format(origin, lineno, format!("bad id {id:?}")))?;
            if id != tokens.len() {
                return Err(Error::format(
                    origin,
                    lineno,
                    format!(
                        "ids must ascend from 0 without gaps; expected {}, found {id}",
                        tokens.len()
                    ),
                ));
            }
            if token.is_empty() {
                return Err(Error::format(origin, lineno, "empty token"));
            }
            tokens.push(token.to_string());
        }
        if tokens.len() < 2 || tokens[NONE_ID] != NONE_TOKEN || tokens[UNK_ID] != UNK_TOKEN {
            return Err(Error::format(
                origin,
                1,
                format!("ids 0 and 1 must be {NONE_TOKEN:?} and {UNK_TOKEN:?}"),
            ));
        }
        let vocab = Vocabulary::from_tokens(mode, tokens);
        if vocab.index.len() != vocab.tokens.len() {
            return Err(Error::format(origin, 0, "duplicate token"));
        }
        Ok(vocab)
    }

    pub fn load(path: impl AsRef<Path>, mode: FeatureMode) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Vocabulary::parse(&text, mode, path)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), self.to_tsv().as_bytes())
    }
}

/// Fixed-length encoded text. Invariant: `mask` is a prefix of ones followed
/// by zeros, and every masked-out position holds [`NONE_ID`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedSample {
    pub id: String,
    pub ids: Vec<usize>,
    pub mask: Vec<u8>,
    pub label: SentimentLabel,
    pub dataset_key: String,
}

impl EncodedSample {
    pub fn new(
        id: impl Into<String>,
        label: SentimentLabel,
        dataset_key: impl Into<String>,
        (ids, mask): (Vec<usize>, Vec<u8>),
    ) -> Self {
        EncodedSample {
            id: id.into(),
            ids,
            mask,
            label,
            dataset_key: dataset_key.into(),
        }
    }

    pub fn seq_len(&self) -> usize {
        self.ids.len()
    }

    pub fn valid_len(&self) -> usize {
        self.mask.iter().filter(|&&m| m == 1).count()
    }

    pub fn mask_f64(&self) -> Vec<f64> {
        self.mask.iter().map(|&m| f64::from(m)).collect()
    }
}

/// Counters accumulated while encoding a corpus.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EncodeStats {
    pub samples: usize,
    pub truncated: usize,
    pub unknown_tokens: usize,
}

/// Maps tokens to ids, padding with [`NONE_ID`] (mask 0) or truncating to
/// the first `seq_len` tokens. Returns `(ids, mask)`.
pub fn encode(tokens: &[String], vocab: &Vocabulary, seq_len: usize, stats: &mut EncodeStats) -> (Vec<usize>, Vec<u8>) {
    assert!(seq_len >= 1, "sequence length must be positive");
    stats.samples += 1;
    if tokens.len() > seq_len {
        stats.truncated += 1;
    }
    let mut ids = vec![NONE_ID; seq_len];
    let mut mask = vec![0u8; seq_len];
    for (i, tok) in tokens.iter().take(seq_len).enumerate() {
        let id = vocab.id_of(tok);
        if id == UNK_ID {
            stats.unknown_tokens += 1;
        }
        ids[i] = id;
        mask[i] = 1;
    }
    (ids, mask)
}

/// `min(longest document, cap)`, at least 1.
pub fn auto_seq_len(lengths: impl IntoIterator<Item = usize>, cap: usize) -> usize {
    lengths.into_iter().max().unwrap_or(1).min(cap).max(1)
}
