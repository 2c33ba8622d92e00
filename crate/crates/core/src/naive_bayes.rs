//! Multinomial Naive Bayes with additive smoothing, evaluated in log space.
//!
//! The decision rule is `argmax_c P(c) · Π_t P(t|c)^n_t`; the evidence term
//! `P(d)` is never formed since it does not change the argmax.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::SparseVector;
use crate::scalar::{argmax, Scalar};

pub const NB_MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct NbModel<F> {
    pub version: u32,
    pub alpha: F,
    pub num_classes: usize,
    pub vocab_size: usize,
    pub log_priors: Vec<F>,
    /// `log_likelihoods[c][t] = log P(t | c)`.
    pub log_likelihoods: Vec<Vec<F>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NbPrediction<F> {
    pub class: usize,
    /// Unnormalized log posteriors `log P(c) + Σ n_t log P(t|c)`.
    pub scores: Vec<F>,
}

pub fn train_nb<F: Scalar>(
    docs: &[SparseVector],
    labels: &[usize],
    num_classes: usize,
    vocab_size: usize,
    alpha: F,
) -> Result<NbModel<F>> {
    if !(alpha > F::zero()) || !alpha.is_finite() {
        return Err(Error::invalid(format!("smoothing alpha must be positive, got {alpha}")));
    }
    if docs.is_empty() || docs.len() != labels.len() {
        return Err(Error::invalid(format!(
            "need matching non-empty docs and labels, got {} and {}",
            docs.len(),
            labels.len()
        )));
    }
    let mut class_docs = vec![0usize; num_classes];
    let mut counts = vec![vec![0u64; vocab_size]; num_classes];
    for (doc, &label) in docs.iter().zip(labels) {
        if label >= num_classes {
            return Err(Error::invalid(format!("class id {label} ≥ {num_classes}")));
        }
        class_docs[label] += 1;
        for (id, n) in doc.iter() {
            if id >= vocab_size {
                return Err(Error::Dimension {
                    context: "naive bayes feature id",
                    expected: vocab_size,
                    actual: id + 1,
                });
            }
            counts[label][id] += n as u64;
        }
    }
    if let Some(empty) = class_docs.iter().position(|&n| n == 0) {
        return Err(Error::invalid(format!("class {empty} has no training documents")));
    }
    let total = F::of(docs.len() as f64);
    let log_priors = class_docs
        .iter()
        .map(|&n| (F::of(n as f64) / total).ln())
        .collect();
    let v = F::of(vocab_size as f64);
    let log_likelihoods = counts
        .iter()
        .map(|row| {
            let class_total = F::of(row.iter().sum::<u64>() as f64);
            let denom = (class_total + alpha * v).ln();
            row.iter()
                .map(|&c| (F::of(c as f64) + alpha).ln() - denom)
                .collect()
        })
        .collect();
    Ok(NbModel {
        version: NB_MODEL_VERSION,
        alpha,
        num_classes,
        vocab_size,
        log_priors,
        log_likelihoods,
    })
}

impl<F: Scalar> NbModel<F> {
    pub fn scores(&self, doc: &SparseVector) -> Vec<F> {
        (0..self.num_classes)
            .map(|c| {
                let row = &self.log_likelihoods[c];
                doc.iter()
                    .filter(|&(id, _)| id < self.vocab_size)
                    .fold(self.log_priors[c], |acc, (id, n)| {
                        acc + F::of(n as f64) * row[id]
                    })
            })
            .collect()
    }

    pub fn predict(&self, doc: &SparseVector) -> NbPrediction<F> {
        let scores = self.scores(doc);
        NbPrediction {
            class: argmax(&scores),
            scores,
        }
    }
}

/// Maximum a posteriori class; ties go to the lowest class id.
pub fn predict_nb<F: Scalar>(model: &NbModel<F>, doc: &SparseVector) -> NbPrediction<F> {
    model.predict(doc)
}

#[cfg(test)]
mod tests {
    use super::*;

    // vocabulary: good = 0, bad = 1
    fn toy() -> NbModel<f64> {
        let docs = vec![
            SparseVector::from_pairs([(0, 2)]),
            SparseVector::from_pairs([(0, 1)]),
            SparseVector::from_pairs([(1, 1)]),
        ];
        train_nb(&docs, &[0, 0, 1], 2, 2, 1.0).unwrap()
    }

    #[test]
    fn hand_counted_parameters() {
        let m = toy();
        let p = |x: f64| x.exp();
        assert!((p(m.log_priors[0]) - 2.0 / 3.0).abs() < 1e-12);
        assert!((p(m.log_likelihoods[0][0]) - 4.0 / 5.0).abs() < 1e-12);
        assert!((p(m.log_likelihoods[0][1]) - 1.0 / 5.0).abs() < 1e-12);
        assert!((p(m.log_likelihoods[1][0]) - 1.0 / 3.0).abs() < 1e-12);
        assert!((p(m.log_likelihoods[1][1]) - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn predicts_good_as_class_a() {
        let m = toy();
        let pred = m.predict(&SparseVector::from_ids([0]));
        assert_eq!(pred.class, 0);
        assert!((pred.scores[0] - (2.0f64 / 3.0 * 4.0 / 5.0).ln()).abs() < 1e-12);
        assert!((pred.scores[1] - (1.0f64 / 3.0 * 1.0 / 3.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn empty_doc_takes_largest_prior() {
        assert_eq!(toy().predict(&SparseVector::default()).class, 0);
    }

    #[test]
    fn single_class_prior_is_zero() {
        let m = train_nb::<f64>(&[SparseVector::from_ids([0])], &[0], 1, 3, 1.0).unwrap();
        assert_eq!(m.log_priors, vec![0.0]);
    }

    #[test]
    fn large_alpha_flattens_likelihoods() {
        let docs = vec![SparseVector::from_pairs([(0, 50)]), SparseVector::from_ids([2])];
        let m = train_nb::<f64>(&docs, &[0, 1], 2, 4, 1e12).unwrap();
        for row in &m.log_likelihoods {
            for &l in row {
                assert!((l.exp() - 0.25).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn distributions_normalize() {
        let m = toy();
        let prior: f64 = m.log_priors.iter().map(|l| l.exp()).sum();
        assert!((prior - 1.0).abs() < 1e-9);
        for row in &m.log_likelihoods {
            assert!((row.iter().map(|l| l.exp()).sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let d = vec![SparseVector::from_ids([0])];
        assert!(train_nb::<f64>(&d, &[0], 2, 1, 1.0).is_err(), "class 1 empty");
        assert!(train_nb::<f64>(&d, &[0], 1, 1, 0.0).is_err());
        assert!(train_nb::<f64>(&d, &[0], 1, 1, -1.0).is_err());
        assert!(train_nb::<f64>(&[], &[], 1, 1, 1.0).is_err());
    }

    #[test]
    fn duplicating_documents_keeps_priors() {
        let docs = vec![
            SparseVector::from_pairs([(0, 2)]),
            SparseVector::from_pairs([(0, 1)]),
            SparseVector::from_pairs([(1, 1)]),
        ];
        let twice: Vec<SparseVector> = docs.iter().chain(&docs).cloned().collect();
        let a = train_nb::<f64>(&docs, &[0, 0, 1], 2, 2, 1.0).unwrap();
        let b = train_nb::<f64>(&twice, &[0, 0, 1, 0, 0, 1], 2, 2, 1.0).unwrap();
        for (x, y) in a.log_priors.iter().zip(&b.log_priors) {
            assert!((x - y).abs() < 1e-15);
        }
        // Additive smoothing is not scale-free, so likelihoods move toward the
        // unsmoothed relative frequencies as counts grow.
        let ml = 3.0f64 / 3.0;
        assert!((b.log_likelihoods[0][0].exp() - ml).abs() < (a.log_likelihoods[0][0].exp() - ml).abs());
    }

    #[test]
    fn f32_model_agrees_with_f64() {
        let docs = vec![SparseVector::from_pairs([(0, 2)]), SparseVector::from_ids([1])];
        let a = train_nb::<f32>(&docs, &[0, 1], 2, 2, 1.0).unwrap();
        let b = train_nb::<f64>(&docs, &[0, 1], 2, 2, 1.0).unwrap();
        assert!((a.log_likelihoods[0][0] as f64 - b.log_likelihoods[0][0]).abs() < 1e-6);
    }

    #[test]
    fn model_json_round_trip() {
        let m = toy();
        let json = serde_json::to_string(&m).unwrap();
        let back: NbModel<f64> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
    }
}
