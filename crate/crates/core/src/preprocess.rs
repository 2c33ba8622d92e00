//! Tokenization and cleaning of raw feedback text.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};

/// Lowercased tokens of one document.
pub type TokenSequence = Vec<String>;

/// Lowercase stopword set. Empty by default.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StopwordList(BTreeSet<String>);

impl StopwordList {
    pub fn new<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self(
            words
                .into_iter()
                .map(|w| w.as_ref().trim().to_lowercase())
                .filter(|w| !w.is_empty())
                .collect(),
        )
    }

    /// One token per line; `#` starts a comment.
    pub fn parse(content: &str) -> Self {
        Self::new(
            content
                .lines()
                .map(|l| l.split('#').next().unwrap_or("").trim())
                .filter(|l| !l.is_empty()),
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&content))
    }

    pub fn contains(&self, token: &str) -> bool {
        self.0.contains(token)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }
}

/// Whitespace split plus lowercasing. Underscore compounds stay whole.
pub fn tokenize(text: &str) -> TokenSequence {
    text.split_whitespace().map(str::to_lowercase).collect()
}

const EMOTICONS: &[&str] = &[
    ":)", ":-)", ":(", ":-(", ":d", ":-d", ":p", ":-p", ";)", ";-)", ":'(", ":o", ":-o", ":v",
    ":3", "=)", "=(", "=d", "xd", ":|", ":/", ":-/", ":*", "<3", "</3", "^^", "^_^", "^.^",
    "-_-", "-.-", "t_t", ":))", ":)))", ":((", ":(((", ">.<", "o.o", "=.=", "@@",
];

fn is_emoticon(token: &str) -> bool {
    EMOTICONS.contains(&token)
}

fn is_emoji(c: char) -> bool {
    matches!(c as u32,
        0x1F000..=0x1FAFF   // mahjong through symbols & pictographs extended-A
        | 0x2600..=0x27BF   // misc symbols, dingbats
        | 0x2300..=0x23FF   // misc technical
        | 0x2B00..=0x2BFF   // arrows, stars
        | 0xFE00..=0xFE0F   // variation selectors
        | 0x200D)           // zero-width joiner
}

/// Normalizes one lowercase token, or `None` if it should be dropped.
///
/// Drops ASCII emoticons, strips emoji and edge punctuation, then rejects
/// anything without a letter (numbers, punctuation) and stopwords.
pub fn clean_token(token: &str, stopwords: &StopwordList) -> Option<String> {
    if is_emoticon(token) {
        return None;
    }
    let without_emoji: String = token.chars().filter(|&c| !is_emoji(c)).collect();
    let trimmed = without_emoji.trim_matches(|c: char| !c.is_alphanumeric());
    if trimmed.is_empty()
        || !trimmed.chars().any(char::is_alphabetic)
        || is_emoticon(trimmed)
        || stopwords.contains(trimmed)
    {
        return None;
    }
    Some(trimmed.to_string())
}

/// Order-preserving removal of numbers, punctuation, emoticons and stopwords.
pub fn clean(tokens: &[String], stopwords: &StopwordList) -> TokenSequence {
    tokens
        .iter()
        .filter_map(|t| clean_token(t, stopwords))
        .collect()
}

pub fn preprocess_text(text: &str, stopwords: &StopwordList) -> TokenSequence {
    clean(&tokenize(text), stopwords)
}

/// Token sequences for every record, keyed by id in corpus order. Records that
/// clean down to nothing are kept as empty sequences.
pub fn preprocess_corpus(
    corpus: &Corpus,
    stopwords: &StopwordList,
) -> IndexMap<String, TokenSequence> {
    corpus
        .records()
        .iter()
        .map(|r| (r.id.clone(), preprocess_text(&r.text, stopwords)))
        .collect()
}

/// Ids whose preprocessed sequence is empty.
pub fn flagged_ids(docs: &IndexMap<String, TokenSequence>) -> Vec<&str> {
    docs.iter()
        .filter(|(_, t)| t.is_empty())
        .map(|(id, _)| id.as_str())
        .collect()
}
