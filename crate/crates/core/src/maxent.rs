//! Maximum-entropy (multinomial log-linear) classifier.
//!
//! One weight per (class, feature) pair. Features fire with their document
//! count, so `P(c|d) ∝ exp(Σ_t n_t(d) λ(c,t))`. Training maximizes the
//! conditional log-likelihood minus a quadratic penalty `Σ λ² / 2σ²` with
//! full-batch gradient ascent and step halving.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::SparseVector;
use crate::scalar::{argmax, softmax_in_place, Scalar};

pub const MAXENT_MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct MaxentModel<F> {
    pub version: u32,
    pub num_classes: usize,
    pub vocab_size: usize,
    pub sigma2: F,
    /// Row-major by class: `weights[c * vocab_size + t]`.
    pub weights: Vec<F>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct TrainConfig<F> {
    pub learning_rate: F,
    pub epochs: usize,
    pub sigma2: F,
    /// Stop once the objective moves by less than `tolerance · max(1, |L|)`.
    pub tolerance: F,
    pub seed: u64,
    /// Start from small seeded random weights instead of zero.
    pub random_init: bool,
}

impl<F: Scalar> Default for TrainConfig<F> {
    fn default() -> Self {
        Self {
            learning_rate: F::one(),
            epochs: 300,
            sigma2: F::of(10.0),
            tolerance: F::of(1e-10),
            seed: 42,
            random_init: false,
        }
    }
}

/// Trained model plus the objective after every accepted step.
#[derive(Debug, Clone)]
pub struct MaxentFit<F> {
    pub model: MaxentModel<F>,
    pub objectives: Vec<F>,
    pub converged: bool,
}

impl<F: Scalar> MaxentModel<F> {
    pub fn zeros(num_classes: usize, vocab_size: usize, sigma2: F) -> Self {
        Self {
            version: MAXENT_MODEL_VERSION,
            num_classes,
            vocab_size,
            sigma2,
            weights: vec![F::zero(); num_classes * vocab_size],
        }
    }

    #[inline]
    pub fn weight(&self, class: usize, feature: usize) -> F {
        self.weights[class * self.vocab_size + feature]
    }

    #[inline]
    pub fn weight_mut(&mut self, class: usize, feature: usize) -> &mut F {
        &mut self.weights[class * self.vocab_size + feature]
    }

    /// Class scores `s(c) = Σ_t n_t λ(c,t)`; ids outside the vocabulary are ignored.
    pub fn scores(&self, doc: &SparseVector) -> Vec<F> {
        (0..self.num_classes)
            .map(|c| {
                let row = &self.weights[c * self.vocab_size..(c + 1) * self.vocab_size];
                doc.iter()
                    .filter(|&(id, _)| id < self.vocab_size)
                    .fold(F::zero(), |acc, (id, n)| acc + F::of(n as f64) * row[id])
            })
            .collect()
    }

    pub fn probabilities(&self, doc: &SparseVector) -> Vec<F> {
        let mut s = self.scores(doc);
        softmax_in_place(&mut s);
        s
    }

    pub fn predict(&self, doc: &SparseVector) -> usize {
        argmax(&self.probabilities(doc))
    }
}

pub fn maxent_prob<F: Scalar>(model: &MaxentModel<F>, doc: &SparseVector) -> Vec<F> {
    model.probabilities(doc)
}

/// Argmax of [`maxent_prob`]; ties go to the lowest class id.
pub fn predict_maxent<F: Scalar>(model: &MaxentModel<F>, doc: &SparseVector) -> usize {
    model.predict(doc)
}

fn check_data(docs: &[SparseVector], labels: &[usize], num_classes: usize) -> Result<()> {
    if docs.is_empty() || docs.len() != labels.len() {
        return Err(Error::invalid(format!(
            "need matching non-empty docs and labels, got {} and {}",
            docs.len(),
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
        return Err(Error::invalid(format!("class id {bad} ≥ {num_classes}")));
    }
    Ok(())
}

fn penalized_log_likelihood<F: Scalar>(
    model: &MaxentModel<F>,
    docs: &[SparseVector],
    labels: &[usize],
) -> F {
    let two_sigma2 = F::of(2.0) * model.sigma2;
    let penalty = model
        .weights
        .iter()
        .fold(F::zero(), |acc, &w| acc + w * w)
        / two_sigma2;
    let mut ll = F::zero();
    for (doc, &label) in docs.iter().zip(labels) {
        let mut s = model.scores(doc);
        let gold = s[label];
        let log_z = softmax_in_place(&mut s);
        ll = ll + gold - log_z;
    }
    ll - penalty
}

/// Penalized conditional log-likelihood and its gradient (same layout as the weights):
/// `∂L/∂λ(c,t) = Σ_d n_t(d) (1[c_d = c] − P(c|d)) − λ(c,t)/σ²`.
pub fn objective_and_gradient<F: Scalar>(
    model: &MaxentModel<F>,
    docs: &[SparseVector],
    labels: &[usize],
) -> Result<(F, Vec<F>)> {
    check_data(docs, labels, model.num_classes)?;
    let v = model.vocab_size;
    let mut grad: Vec<F> = model.weights.iter().map(|&w| -w / model.sigma2).collect();
    let two_sigma2 = F::of(2.0) * model.sigma2;
    let mut objective = -model
        .weights
        .iter()
        .fold(F::zero(), |acc, &w| acc + w * w)
        / two_sigma2;
    for (doc, &label) in docs.iter().zip(labels) {
        let mut p = model.scores(doc);
        let gold = p[label];
        let log_z = softmax_in_place(&mut p);
        objective = objective + gold - log_z;
        for (c, &pc) in p.iter().enumerate() {
            let residual = if c == label { F::one() - pc } else { -pc };
            let row = &mut grad[c * v..(c + 1) * v];
            for (id, n) in doc.iter().filter(|&(id, _)| id < v) {
                row[id] = row[id] + F::of(n as f64) * residual;
            }
        }
    }
    Ok((objective, grad))
}

/// Full-batch gradient ascent on the mean penalized objective. A step that
/// lowers the objective is retried with half the learning rate, at most 20
/// times; the reduced rate is kept for later steps.
pub fn train_maxent<F: Scalar>(
    docs: &[SparseVector],
    labels: &[usize],
    num_classes: usize,
    vocab_size: usize,
    config: &TrainConfig<F>,
) -> Result<MaxentFit<F>> {
    const MAX_HALVINGS: usize = 20;

    check_data(docs, labels, num_classes)?;
    if !(config.learning_rate > F::zero() && config.sigma2 > F::zero()) || config.epochs == 0 {
        return Err(Error::invalid(
            "maxent learning rate, sigma2 and epochs must be positive",
        ));
    }
    let mut seen = vec![false; num_classes];
    for &l in labels {
        seen[l] = true;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::invalid(format!("class {missing} has no training documents")));
    }
    if let Some(bad) = docs.iter().find(|d| d.dimension_bound() > vocab_size) {
        return Err(Error::Dimension {
            context: "maxent feature id",
            expected: vocab_size,
            actual: bad.dimension_bound(),
        });
    }

    let mut model = MaxentModel::zeros(num_classes, vocab_size, config.sigma2);
    if config.random_init {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        for w in &mut model.weights {
            *w = F::of(rng.random_range(-0.01..0.01));
        }
    }
    let scale = F::one() / F::of(docs.len() as f64);
    let (mut objective, mut grad) = objective_and_gradient(&model, docs, labels)?;
    if !objective.is_finite() {
        return Err(Error::Numerical("maxent objective is not finite at start".into()));
    }
    let mut lr = config.learning_rate;
    let mut objectives = vec![objective];
    let mut converged = false;

    'epochs: for epoch in 0..config.epochs {
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let mut candidate = model.clone();
            for (w, g) in candidate.weights.iter_mut().zip(&grad) {
                *w = *w + lr * scale * *g;
            }
            let value = penalized_log_likelihood(&candidate, docs, labels);
            if value.is_nan() {
                return Err(Error::Numerical(format!(
                    "maxent objective became NaN at epoch {epoch}"
                )));
            }
            if value >= objective {
                accepted = Some(candidate);
                break;
            }
            lr = lr / F::of(2.0);
        }
        let Some(next) = accepted else {
            // no ascent direction left at floating-point resolution
            converged = true;
            break 'epochs;
        };
        let (value, next_grad) = objective_and_gradient(&next, docs, labels)?;
        let delta = value - objective;
        model = next;
        grad = next_grad;
        objective = value;
        objectives.push(value);
        if delta <= config.tolerance * objective.abs().max(F::one()) {
            converged = true;
            break;
        }
    }
    Ok(MaxentFit {
        model,
        objectives,
        converged,
    })
}
