//! Word2Vec skip-gram embeddings trained with negative sampling.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use indexmap::IndexMap;
use ndarray::{Array1, Array2, ArrayView1};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct W2vConfig {
    pub dim: usize,
    pub window: usize,
    pub negative: usize,
    pub epochs: usize,
    /// Initial rate, decayed linearly toward zero over training.
    pub learning_rate: f64,
    pub min_count: usize,
    pub seed: u64,
}

impl Default for W2vConfig {
    fn default() -> Self {
        Self {
            dim: 300,
            window: 5,
            negative: 5,
            epochs: 5,
            learning_rate: 0.025,
            min_count: 1,
            seed: 42,
        }
    }
}

impl W2vConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0
            || self.window == 0
            || self.negative == 0
            || self.epochs == 0
            || self.min_count == 0
            || !(self.learning_rate > 0.0)
        {
            return Err(Error::invalid(format!(
                "word2vec settings must all be positive: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Input ("word") and output ("context") vectors for every vocabulary token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct EmbeddingTable<F> {
    dim: usize,
    tokens: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
    counts: Vec<u64>,
    input: Array2<F>,
    output: Array2<F>,
}

impl<F: Scalar> EmbeddingTable<F> {
    fn from_parts(tokens: Vec<String>, counts: Vec<u64>, input: Array2<F>, output: Array2<F>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Self {
            dim: input.ncols(),
            tokens,
            index,
            counts,
            input,
            output,
        }
    }

    /// Rebuilds the token index after deserialization.
    pub fn reindex(&mut self) {
        self.index = self
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn input_vector(&self, id: usize) -> ArrayView1<'_, F> {
        self.input.row(id)
    }

    pub fn output_vector(&self, id: usize) -> ArrayView1<'_, F> {
        self.output.row(id)
    }

    pub(crate) fn input_row_mut(&mut self, id: usize) -> ndarray::ArrayViewMut1<'_, F> {
        self.input.row_mut(id)
    }

    /// Input vector of `token`, or a zero vector with the OOV flag set.
    pub fn lookup(&self, token: &str) -> (Array1<F>, bool) {
        match self.id(token) {
            Some(id) => (self.input.row(id).to_owned(), false),
            None => (Array1::zeros(self.dim), true),
        }
    }

    /// Embeds a token sequence; OOV tokens become zero vectors.
    pub fn embed(&self, tokens: &[String]) -> Vec<Array1<F>> {
        tokens.iter().map(|t| self.lookup(t).0).collect()
    }

    /// Unigram^0.75 sampling distribution over the vocabulary.
    pub fn negative_distribution(&self) -> Vec<f64> {
        let weights: Vec<f64> = self.counts.iter().map(|&c| (c as f64).powf(0.75)).collect();
        let total: f64 = weights.iter().sum();
        weights.iter().map(|w| w / total).collect()
    }

    pub fn cosine(&self, a: &str, b: &str) -> Option<F> {
        let (x, y) = (self.input.row(self.id(a)?), self.input.row(self.id(b)?));
        let denom = x.dot(&x).sqrt() * y.dot(&y).sqrt();
        Some(if denom > F::zero() { x.dot(&y) / denom } else { F::zero() })
    }

    /// Text form: a `V D` header, then `token v1 ... vD` per line. Only input vectors are written.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.len(), self.dim);
        for (i, t) in self.tokens.iter().enumerate() {
            out.push_str(t);
            for v in self.input.row(i) {
                write!(out, " {v}").expect("write to string");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| Error::Parse {
            line: 1,
            message: "empty embedding file".into(),
        })?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|s| s.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Parse {
                line: 1,
                message: format!("bad header `{header}`"),
            })?;
        let [v, d] = dims[..] else {
            return Err(Error::Parse {
                line: 1,
                message: "header must be `V D`".into(),
            });
        };
        let mut tokens = Vec::with_capacity(v);
        let mut input = Array2::zeros((v, d));
        for (row, (i, line)) in lines.enumerate() {
            if row >= v {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("more than {v} vectors"),
                });
            }
            let mut parts = line.split_whitespace();
            let token = parts.next().expect("non-blank line");
            let values: Vec<F> = parts
                .map(|s| s.parse::<f64>().map(F::of))
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Parse {
                    line: i + 1,
                    message: "non-numeric vector component".into(),
                })?;
            if values.len() != d {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("expected {d} components, found {}", values.len()),
                });
            }
            tokens.push(token.to_string());
            input.row_mut(row).assign(&Array1::from(values));
        }
        if tokens.len() != v {
            return Err(Error::Parse {
                line: 1,
                message: format!("header declares {v} vectors, found {}", tokens.len()),
            });
        }
        let table = Self::from_parts(tokens, vec![1; v], input, Array2::zeros((v, d)));
        if table.index.len() != v {
            return Err(Error::invalid("embedding file repeats a token"));
        }
        Ok(table)
    }

    pub fn save_text(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load_text(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

/// Gradients of `log σ(u⁺·v) + Σ_n log σ(−uₙ·v)` for one skip-gram pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairGradient<F> {
    pub center: Array1<F>,
    pub positive: Array1<F>,
    pub negatives: Vec<Array1<F>>,
}

pub fn sgns_pair_objective<F: Scalar>(
    center: ArrayView1<'_, F>,
    positive: ArrayView1<'_, F>,
    negatives: &[ArrayView1<'_, F>],
) -> F {
    let pos = positive.dot(&center).sigmoid().ln();
    negatives
        .iter()
        .fold(pos, |acc, n| acc + (-n.dot(&center)).sigmoid().ln())
}

pub fn sgns_pair_gradient<F: Scalar>(
    center: ArrayView1<'_, F>,
    positive: ArrayView1<'_, F>,
    negatives: &[ArrayView1<'_, F>],
) -> PairGradient<F> {
    // d/dx log σ(x) = 1 − σ(x);  d/dx log σ(−x) = −σ(x)
    let g_pos = F::one() - positive.dot(&center).sigmoid();
    let mut grad_center = &positive * g_pos;
    let grad_positive = &center * g_pos;
    let grad_negatives = negatives
        .iter()
        .map(|n| {
            let g = -n.dot(&center).sigmoid();
            grad_center.scaled_add(g, n);
            &center * g
        })
        .collect();
    PairGradient {
        center: grad_center,
        positive: grad_positive,
        negatives: grad_negatives,
    }
}

impl<F: Scalar> EmbeddingTable<F> {
    /// One ascent step on a (center, context) pair with the given negatives.
    pub fn sgns_update(&mut self, center: usize, context: usize, negatives: &[usize], lr: F) {
        let grad = {
            let negs: Vec<ArrayView1<'_, F>> =
                negatives.iter().map(|&n| self.output.row(n)).collect();
            sgns_pair_gradient(self.input.row(center), self.output.row(context), &negs)
        };
        self.output.row_mut(context).scaled_add(lr, &grad.positive);
        for (&n, g) in negatives.iter().zip(&grad.negatives) {
            self.output.row_mut(n).scaled_add(lr, g);
        }
        self.input.row_mut(center).scaled_add(lr, &grad.center);
    }
}

/// Trains skip-gram with negative sampling. Deterministic for a given seed.
pub fn train_word2vec<F: Scalar>(
    sentences: &[Vec<String>],
    config: &W2vConfig,
) -> Result<EmbeddingTable<F>> {
    config.validate()?;
    if !sentences.iter().any(|s| s.len() >= 2) {
        return Err(Error::invalid(
            "word2vec needs at least one sentence with two or more tokens",
        ));
    }
    let mut counts: IndexMap<&str, u64> = IndexMap::new();
    for s in sentences {
        for t in s {
            *counts.entry(t.as_str()).or_insert(0) += 1;
        }
    }
    let (tokens, counts): (Vec<String>, Vec<u64>) = counts
        .into_iter()
        .filter(|&(_, c)| c as usize >= config.min_count)
        .map(|(t, c)| (t.to_string(), c))
        .unzip();
    if tokens.is_empty() {
        return Err(Error::invalid(format!(
            "no token reaches min_count {}",
            config.min_count
        )));
    }
    let v = tokens.len();
    let d = config.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let half = 0.5 / d as f64;
    let input = Array2::from_shape_fn((v, d), |_| F::of(rng.random_range(-half..half)));
    let mut table = EmbeddingTable::from_parts(tokens, counts, input, Array2::zeros((v, d)));

    let sampler = WeightedIndex::new(table.negative_distribution())
        .map_err(|e| Error::Numerical(format!("negative sampling table: {e}")))?;
    let encoded: Vec<Vec<usize>> = sentences
        .iter()
        .map(|s| s.iter().filter_map(|t| table.id(t)).collect())
        .collect();
    let total_words: usize = encoded.iter().map(Vec::len).sum();
    let total_steps = (total_words * config.epochs).max(1) as f64;
    let mut processed = 0usize;
    let mut negatives = Vec::with_capacity(config.negative);

    for _ in 0..config.epochs {
        for sentence in &encoded {
            for (i, &center) in sentence.iter().enumerate() {
                let progress = processed as f64 / total_steps;
                let lr = F::of(config.learning_rate * (1.0 - progress).max(1e-4));
                processed += 1;
                let lo = i.saturating_sub(config.window);
                let hi = (i + config.window).min(sentence.len() - 1);
                for (j, &context) in sentence.iter().enumerate().take(hi + 1).skip(lo) {
                    if j == i {
                        continue;
                    }
                    negatives.clear();
                    for _ in 0..config.negative {
                        let n = sampler.sample(&mut rng);
                        if n != context {
                            negatives.push(n);
                        }
                    }
                    table.sgns_update(center, context, &negatives, lr);
                }
            }
        }
    }
    if table.input.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("word2vec produced non-finite vectors".into()));
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn sentences(raw: &[&str]) -> Vec<Vec<String>> {
        raw.iter()
            .map(|s| s.split_whitespace().map(String::from).collect())
            .collect()
    }

    fn small_config() -> W2vConfig {
        W2vConfig {
            dim: 8,
            epochs: 3,
            ..W2vConfig::default()
        }
    }

    #[test]
    fn lookup_known_and_oov() {
        let t: EmbeddingTable<f64> =
            train_word2vec(&sentences(&["a b c", "b c d"]), &small_config()).unwrap();
        let (v, oov) = t.lookup("b");
        assert!(!oov);
        assert_eq!(v, t.input_vector(t.id("b").unwrap()).to_owned());
        let (z, oov) = t.lookup("zzz");
        assert!(oov);
        assert_eq!(z, Array1::<f64>::zeros(8));
        for tok in t.tokens() {
            assert_eq!(t.lookup(tok).0.len(), 8);
        }
    }

    #[test]
    fn same_seed_same_table() {
        let s = sentences(&["x y z x y", "z x y y"]);
        let a: EmbeddingTable<f64> = train_word2vec(&s, &small_config()).unwrap();
        let b: EmbeddingTable<f64> = train_word2vec(&s, &small_config()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_degenerate_input() {
        assert!(train_word2vec::<f64>(&sentences(&["a", "b"]), &small_config()).is_err());
        let cfg = W2vConfig {
            min_count: 10,
            ..small_config()
        };
        assert!(train_word2vec::<f64>(&sentences(&["a b"]), &cfg).is_err());
    }

    #[test]
    fn negative_distribution_normalized_and_monotone() {
        let t: EmbeddingTable<f64> =
            train_word2vec(&sentences(&["a a a a b b c", "a b"]), &small_config()).unwrap();
        let p = t.negative_distribution();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let (a, b, c) = (t.id("a").unwrap(), t.id("b").unwrap(), t.id("c").unwrap());
        assert!(p[a] > p[b] && p[b] > p[c]);
    }

    #[test]
    fn single_step_moves_center_along_positive_gradient() {
        let v = array![0.3, -0.2];
        let u = array![0.5, 0.4];
        let mut t = EmbeddingTable::from_parts(
            vec!["w".into(), "c".into()],
            vec![1, 1],
            ndarray::stack![ndarray::Axis(0), v, array![0.0, 0.0]],
            ndarray::stack![ndarray::Axis(0), array![0.0, 0.0], u],
        );
        t.sgns_update(0, 1, &[], 0.1);
        // hand evaluation: σ(u·v) = σ(0.07), step = 0.1 (1 − σ(0.07)) u
        let s = 1.0 / (1.0 + (-0.07f64).exp());
        let expected = &v + &(&u * (0.1 * (1.0 - s)));
        for (a, b) in t.input_vector(0).iter().zip(&expected) {
            assert!((a - b).abs() < 1e-15);
        }
        let moved = &t.input_vector(0) - &v;
        assert!(moved.dot(&u) > 0.0);
    }

    #[test]
    fn text_format_round_trip() {
        let t: EmbeddingTable<f64> =
            train_word2vec(&sentences(&["một hai ba", "hai ba bốn"]), &small_config()).unwrap();
        let back = EmbeddingTable::<f64>::from_text(&t.to_text()).unwrap();
        assert_eq!(back.tokens(), t.tokens());
        for i in 0..t.len() {
            assert_eq!(back.input_vector(i), t.input_vector(i));
        }
        assert!(EmbeddingTable::<f64>::from_text("2 3\na 1 2 3\n").is_err());
    }
}
