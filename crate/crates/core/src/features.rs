//! Feature extraction (uni-gram, bi-gram, dependency and POS features),
//! vocabularies, sparse count vectors and chi-square feature selection.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::corpus::{Head, TokenAnnotation};
use crate::error::{Error, Result};
use crate::preprocess::{clean_token, StopwordList};

pub const VOCABULARY_VERSION: u32 = 1;

/// Separator between the two tokens of a bi-gram (U+241F SYMBOL FOR UNIT SEPARATOR).
pub const BIGRAM_SEPARATOR: char = '\u{241F}';

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Unigram,
    Bigram,
    Dep,
    Pos,
}

impl FeatureKind {
    /// Namespace prefix that keeps feature strings of different kinds apart.
    pub fn prefix(self) -> &'static str {
        match self {
            FeatureKind::Unigram => "u:",
            FeatureKind::Bigram => "b:",
            FeatureKind::Dep => "d:",
            FeatureKind::Pos => "p:",
        }
    }

    pub fn needs_annotations(self) -> bool {
        matches!(self, FeatureKind::Dep | FeatureKind::Pos)
    }

    pub fn of_feature(feature: &str) -> Option<FeatureKind> {
        [Self::Unigram, Self::Bigram, Self::Dep, Self::Pos]
            .into_iter()
            .find(|k| feature.starts_with(k.prefix()))
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_lowercase().as_str() {
            "unigram" | "uni-gram" | "uni" => Ok(Self::Unigram),
            "bigram" | "bi-gram" | "bi" => Ok(Self::Bigram),
            "dep" => Ok(Self::Dep),
            "pos" => Ok(Self::Pos),
            other => Err(Error::invalid(format!("unknown feature kind `{other}`"))),
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureKind::Unigram => "unigram",
            FeatureKind::Bigram => "bigram",
            FeatureKind::Dep => "dep",
            FeatureKind::Pos => "pos",
        })
    }
}

pub type FeatureSet = BTreeSet<FeatureKind>;

/// Parses a comma-separated feature list such as `unigram,bigram,dep`.
pub fn parse_feature_set(list: &str) -> Result<FeatureSet> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(FeatureKind::from_str)
        .collect()
}

/// Row label in the results table: "Uni-gram", "Bi-gram", "Bi-gram+DEP", ...
pub fn feature_set_label(kinds: &FeatureSet) -> String {
    let mut parts = Vec::new();
    if kinds.contains(&FeatureKind::Bigram) {
        parts.push("Bi-gram");
    } else if kinds.contains(&FeatureKind::Unigram) {
        parts.push("Uni-gram");
    }
    if kinds.contains(&FeatureKind::Dep) {
        parts.push("DEP");
    }
    if kinds.contains(&FeatureKind::Pos) {
        parts.push("POS");
    }
    parts.join("+")
}

fn annotation_form(form: &str) -> Option<String> {
    clean_token(&form.to_lowercase(), &StopwordList::default())
}

/// Namespaced feature strings of one document, with repetitions.
pub fn extract(
    tokens: &[String],
    annotations: Option<&[TokenAnnotation]>,
    kinds: &FeatureSet,
) -> Result<Vec<String>> {
    let mut out = Vec::new();
    if kinds.contains(&FeatureKind::Unigram) {
        out.extend(tokens.iter().map(|t| format!("u:{t}")));
    }
    if kinds.contains(&FeatureKind::Bigram) {
        out.extend(
            tokens
                .windows(2)
                .map(|w| format!("b:{}{BIGRAM_SEPARATOR}{}", w[0], w[1])),
        );
    }
    if kinds.iter().any(|k| k.needs_annotations()) {
        let ann = annotations.ok_or_else(|| {
            Error::invalid("dep/pos features requested for a document without annotations")
        })?;
        let forms: Vec<Option<String>> = ann.iter().map(|a| annotation_form(&a.token)).collect();
        if kinds.contains(&FeatureKind::Dep) {
            for (a, dependent) in ann.iter().zip(&forms) {
                let Head::Token(h) = a.head else { continue };
                if let (Some(dep), Some(Some(head))) = (dependent, forms.get(h)) {
                    out.push(format!("d:{}({head},{dep})", a.deprel.to_lowercase()));
                }
            }
        }
        if kinds.contains(&FeatureKind::Pos) {
            for (a, form) in ann.iter().zip(&forms) {
                if let Some(form) = form {
                    out.push(format!("p:{form}/{}", a.pos));
                }
            }
        }
    }
    Ok(out)
}

/// Dense ids for feature strings, in first-seen order, with document frequencies.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VocabularyFile", into = "VocabularyFile")]
pub struct Vocabulary {
    features: Vec<String>,
    index: HashMap<String, usize>,
    doc_freq: Vec<usize>,
}

/// On-disk form: `{version, features: {feature: id}, doc_freq}`.
#[derive(Serialize, Deserialize)]
struct VocabularyFile {
    version: u32,
    features: IndexMap<String, usize>,
    doc_freq: Vec<usize>,
}

impl From<Vocabulary> for VocabularyFile {
    fn from(v: Vocabulary) -> Self {
        let features = v.features.into_iter().enumerate().map(|(i, f)| (f, i)).collect();
        Self {
            version: VOCABULARY_VERSION,
            features,
            doc_freq: v.doc_freq,
        }
    }
}

impl TryFrom<VocabularyFile> for Vocabulary {
    type Error = Error;

    fn try_from(file: VocabularyFile) -> Result<Self> {
        if file.version != VOCABULARY_VERSION {
            return Err(Error::Incompatible(format!(
                "vocabulary version {} (expected {VOCABULARY_VERSION})",
                file.version
            )));
        }
        let n = file.features.len();
        let mut features = vec![None; n];
        for (f, id) in file.features {
            match features.get_mut(id) {
                Some(slot @ None) => *slot = Some(f),
                _ => return Err(Error::invalid(format!("vocabulary id {id} invalid or repeated"))),
            }
        }
        if file.doc_freq.len() != n {
            return Err(Error::Dimension {
                context: "vocabulary document frequencies",
                expected: n,
                actual: file.doc_freq.len(),
            });
        }
        Ok(Self::from_parts(
            features.into_iter().map(Option::unwrap).collect(),
            file.doc_freq,
        ))
    }
}

impl Vocabulary {
    fn from_parts(features: Vec<String>, doc_freq: Vec<usize>) -> Self {
        let index = features
            .iter()
            .enumerate()
            .map(|(i, f)| (f.clone(), i))
            .collect();
        Self {
            features,
            index,
            doc_freq,
        }
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn id(&self, feature: &str) -> Option<usize> {
        self.index.get(feature).copied()
    }

    pub fn feature(&self, id: usize) -> Option<&str> {
        self.features.get(id).map(String::as_str)
    }

    pub fn doc_freq(&self, id: usize) -> Option<usize> {
        self.doc_freq.get(id).copied()
    }

    pub fn features(&self) -> impl Iterator<Item = &str> {
        self.features.iter().map(String::as_str)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let file: VocabularyFile = serde_json::from_str(json)?;
        Self::try_from(file)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let json = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&json)
    }
}

/// Keeps features whose document frequency reaches `min_df`, in first-seen order.
pub fn build_vocabulary(docs: &[Vec<String>], min_df: usize) -> Result<Vocabulary> {
    if min_df == 0 {
        return Err(Error::invalid("min_df must be at least 1"));
    }
    if docs.is_empty() {
        return Err(Error::invalid("cannot build a vocabulary from no documents"));
    }
    let mut order: IndexMap<&str, usize> = IndexMap::new();
    for doc in docs {
        let unique: HashSet<&str> = doc.iter().map(String::as_str).collect();
        for f in doc {
            if unique.contains(f.as_str()) {
                order.entry(f.as_str()).or_insert(0);
            }
        }
        for f in unique {
            *order.get_mut(f).expect("inserted above") += 1;
        }
    }
    let (features, doc_freq): (Vec<String>, Vec<usize>) = order
        .into_iter()
        .filter(|&(_, df)| df >= min_df)
        .map(|(f, df)| (f.to_string(), df))
        .unzip();
    Ok(Vocabulary::from_parts(features, doc_freq))
}

/// Sorted `(feature id, count)` pairs with strictly increasing ids and counts ≥ 1.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparseVector {
    entries: Vec<(usize, u32)>,
}

impl SparseVector {
    /// Builds from arbitrary (id, count) pairs; duplicates merge, zero counts vanish.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, u32)>) -> Self {
        let mut entries: Vec<(usize, u32)> = pairs.into_iter().filter(|&(_, c)| c > 0).collect();
        entries.sort_unstable_by_key(|&(id, _)| id);
        let mut merged: Vec<(usize, u32)> = Vec::with_capacity(entries.len());
        for (id, c) in entries {
            match merged.last_mut() {
                Some((last, total)) if *last == id => *total += c,
                _ => merged.push((id, c)),
            }
        }
        Self { entries: merged }
    }

    pub fn from_ids(ids: impl IntoIterator<Item = usize>) -> Self {
        Self::from_pairs(ids.into_iter().map(|id| (id, 1)))
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.entries.iter().copied()
    }

    pub fn entries(&self) -> &[(usize, u32)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_count(&self) -> u64 {
        self.entries.iter().map(|&(_, c)| c as u64).sum()
    }

    pub fn contains(&self, id: usize) -> bool {
        self.entries.binary_search_by_key(&id, |&(i, _)| i).is_ok()
    }

    /// Largest feature id + 1, or 0 for an empty vector.
    pub fn dimension_bound(&self) -> usize {
        self.entries.last().map_or(0, |&(id, _)| id + 1)
    }
}

/// Counts of in-vocabulary features; out-of-vocabulary features are dropped.
pub fn vectorize(doc: &[String], vocab: &Vocabulary) -> SparseVector {
    SparseVector::from_ids(doc.iter().filter_map(|f| vocab.id(f)))
}

/// Per-feature chi-square score (max over classes); `None` for features
/// that occur in no training document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareScores {
    pub scores: Vec<Option<f64>>,
}

/// χ² of a 2×2 presence/class table; 0 when any margin is empty.
pub fn chi_square_2x2(a: f64, b: f64, c: f64, d: f64) -> f64 {
    let n = a + b + c + d;
    let denom = (a + c) * (b + d) * (a + b) * (c + d);
    if denom == 0.0 {
        return 0.0;
    }
    let diff = a * d - c * b;
    n * diff * diff / denom
}

pub fn chi_square_scores(
    docs: &[SparseVector],
    labels: &[usize],
    num_classes: usize,
    vocab_size: usize,
) -> Result<ChiSquareScores> {
    if docs.len() != labels.len() || docs.is_empty() {
        return Err(Error::invalid(format!(
            "chi-square needs matching non-empty docs/labels, got {} and {}",
            docs.len(),
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
        return Err(Error::invalid(format!("class id {bad} ≥ {num_classes}")));
    }
    let n = docs.len();
    let mut class_docs = vec![0usize; num_classes];
    // present[t][c] = documents of class c containing t
    let mut present = vec![vec![0usize; num_classes]; vocab_size];
    for (doc, &label) in docs.iter().zip(labels) {
        class_docs[label] += 1;
        for (id, _) in doc.iter() {
            if id >= vocab_size {
                return Err(Error::Dimension {
                    context: "chi-square feature id",
                    expected: vocab_size,
                    actual: id + 1,
                });
            }
            present[id][label] += 1;
        }
    }
    let scores = present
        .iter()
        .map(|per_class| {
            let with_t: usize = per_class.iter().sum();
            if with_t == 0 {
                return None;
            }
            let best = (0..num_classes)
                .map(|c| {
                    let a = per_class[c];
                    let b = with_t - a;
                    let cc = class_docs[c] - a;
                    let d = n - a - b - cc;
                    chi_square_2x2(a as f64, b as f64, cc as f64, d as f64)
                })
                .fold(0.0, f64::max);
            Some(best)
        })
        .collect();
    Ok(ChiSquareScores { scores })
}

/// Result of chi-square selection: the reduced vocabulary and an old → new id map.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub vocabulary: Vocabulary,
    pub scores: ChiSquareScores,
    pub mapping: Vec<Option<usize>>,
}

impl Selection {
    pub fn remap(&self, v: &SparseVector) -> SparseVector {
        SparseVector::from_pairs(
            v.iter()
                .filter_map(|(id, c)| self.mapping.get(id).copied().flatten().map(|n| (n, c))),
        )
    }
}

/// Keeps the `top_k` highest-scoring features (ties → lower id), re-indexed
/// densely in original id order. `top_k` beyond the vocabulary keeps everything.
pub fn chi_square_select(
    vocab: &Vocabulary,
    docs: &[SparseVector],
    labels: &[usize],
    num_classes: usize,
    top_k: usize,
) -> Result<Selection> {
    if top_k == 0 {
        return Err(Error::invalid("top_k must be at least 1"));
    }
    let scores = chi_square_scores(docs, labels, num_classes, vocab.len())?;
    let mut ranked: Vec<usize> = (0..vocab.len()).collect();
    ranked.sort_by(|&x, &y| {
        let sx = scores.scores[x].unwrap_or(-1.0);
        let sy = scores.scores[y].unwrap_or(-1.0);
        sy.total_cmp(&sx).then(x.cmp(&y))
    });
    ranked.truncate(top_k);
    ranked.sort_unstable();
    let mut mapping = vec![None; vocab.len()];
    let mut features = Vec::with_capacity(ranked.len());
    let mut doc_freq = Vec::with_capacity(ranked.len());
    for (new, &old) in ranked.iter().enumerate() {
        mapping[old] = Some(new);
        features.push(vocab.features[old].clone());
        doc_freq.push(vocab.doc_freq[old]);
    }
    Ok(Selection {
        vocabulary: Vocabulary::from_parts(features, doc_freq),
        scores,
        mapping,
    })
}
