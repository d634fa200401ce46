use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};

/// Word → synonym-group tag. Each word maps to at most one tag; the first
/// occurrence in the file wins.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SynonymDictionary {
    tags: HashMap<String, String>,
    /// `(line, word)` of entries ignored because the word was already mapped.
    duplicates: Vec<(usize, String)>,
}

impl SynonymDictionary {
    /// Parses UTF-8 `tag<TAB>word` lines. Blank lines are skipped.
    pub fn parse(text: &str, origin: impl AsRef<Path>) -> Result<Self> {
        let origin = origin.as_ref();
        let mut dict = SynonymDictionary::default();
        for (lineno, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l)) {
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            let (tag, word) = match (fields.next(), fields.next(), fields.next()) {
                (Some(tag), Some(word), None) if !tag.trim().is_empty() && !word.trim().is_empty() => {
                    (tag.trim(), word.trim())
                }
                _ => return Err(Error::format(origin, lineno, "expected \"tag<TAB>word\"")),
            };
            if dict.tags.contains_key(word) {
                log::warn!(
                    "{}:{lineno}: duplicate entry for {word:?} ignored (keeping {:?})",
                    origin.display(),
                    dict.tags[word]
                );
                dict.duplicates.push((lineno, word.to_string()));
            } else {
                dict.tags.insert(word.to_string(), tag.to_string());
            }
        }
        Ok(dict)
    }

    pub fn tag_of(&self, word: &str) -> Option<&str> {
        self.tags.get(word).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn duplicates(&self) -> &[(usize, String)] {
        &self.duplicates
    }
}

pub fn load_synonym_dict(path: impl AsRef<Path>) -> Result<SynonymDictionary> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    SynonymDictionary::parse(&text, path)
}
