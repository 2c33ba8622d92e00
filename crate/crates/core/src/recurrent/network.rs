//! Stacked LSTM and Bi-LSTM sequence classifiers trained by per-example SGD
//! with full backpropagation through time.
//!
//! A bidirectional network is two independent stacks: one reads the sequence
//! left to right, the other right to left, and neither feeds the other. The
//! document vector is the forward stack's last state concatenated with the
//! backward stack's state at the first position, followed by a softmax head.

use ndarray::{concatenate, s, Array1, Array2, ArrayViewD, ArrayViewMutD, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cell::{LstmParams, LstmState, StepCache};
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::scalar::{argmax, softmax_in_place, Scalar};

pub const NETWORK_MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Bidirectional,
}

impl Direction {
    fn stacks(self) -> usize {
        match self {
            Direction::Forward => 1,
            Direction::Bidirectional => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub layers: usize,
    pub hidden: usize,
    pub embedding_dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Drop probability for layer outputs during training.
    pub dropout: f64,
    pub seed: u64,
    pub clip_norm: Option<f64>,
    pub peephole: bool,
    pub init_scale: f64,
    pub fine_tune_embeddings: bool,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            layers: 2,
            hidden: 128,
            embedding_dim: 300,
            epochs: 10,
            learning_rate: 0.02,
            dropout: 0.4,
            seed: 42,
            clip_norm: Some(5.0),
            peephole: true,
            init_scale: 0.08,
            fine_tune_embeddings: false,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = self.layers > 0
            && self.hidden > 0
            && self.embedding_dim > 0
            && self.epochs > 0
            && self.learning_rate > 0.0
            && self.init_scale > 0.0
            && self.clip_norm.is_none_or(|c| c > 0.0);
        if !positive || !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid(format!("invalid network configuration: {self:?}")));
        }
        Ok(())
    }
}

/// All trainable tensors. Also used as the gradient container.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct NetworkParams<F> {
    pub forward: Vec<LstmParams<F>>,
    /// Empty for forward-only networks.
    pub backward: Vec<LstmParams<F>>,
    /// K × (H or 2H).
    pub head_w: Array2<F>,
    pub head_b: Array1<F>,
}

impl<F: Scalar> NetworkParams<F> {
    pub fn zeros_like(&self) -> Self {
        Self {
            forward: self.forward.iter().map(LstmParams::zeros_like).collect(),
            backward: self.backward.iter().map(LstmParams::zeros_like).collect(),
            head_w: Array2::zeros(self.head_w.raw_dim()),
            head_b: Array1::zeros(self.head_b.len()),
        }
    }

    pub fn tensors_mut(&mut self) -> Vec<ArrayViewMutD<'_, F>> {
        let mut out: Vec<ArrayViewMutD<'_, F>> = Vec::new();
        for layer in self.forward.iter_mut().chain(self.backward.iter_mut()) {
            out.extend(layer.tensors_mut());
        }
        out.push(self.head_w.view_mut().into_dyn());
        out.push(self.head_b.view_mut().into_dyn());
        out
    }

    pub fn tensors(&self) -> Vec<ArrayViewD<'_, F>> {
        let mut out: Vec<ArrayViewD<'_, F>> = Vec::new();
        for layer in self.forward.iter().chain(&self.backward) {
            for gate in [&layer.forget, &layer.input, &layer.candidate, &layer.output] {
                out.push(gate.w.view().into_dyn());
                out.push(gate.u.view().into_dyn());
                out.push(gate.b.view().into_dyn());
            }
            if layer.use_peephole {
                out.push(layer.peephole.view().into_dyn());
            }
        }
        out.push(self.head_w.view().into_dyn());
        out.push(self.head_b.view().into_dyn());
        out
    }

    /// Human-readable tensor names in [`tensors`](Self::tensors) order.
    pub fn tensor_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (dir, stack) in [("fwd", &self.forward), ("bwd", &self.backward)] {
            for (l, layer) in stack.iter().enumerate() {
                out.extend(layer.tensor_names().into_iter().map(|n| format!("{dir}{l}.{n}")));
            }
        }
        out.push("head.W".into());
        out.push("head.b".into());
        out
    }

    pub fn norm(&self) -> F {
        self.tensors()
            .iter()
            .flat_map(|t| t.iter())
            .fold(F::zero(), |acc, &x| acc + x * x)
            .sqrt()
    }

    fn scale(&mut self, factor: F) {
        for mut t in self.tensors_mut() {
            t.mapv_inplace(|x| x * factor);
        }
    }

    fn scaled_add(&mut self, alpha: F, other: &NetworkParams<F>) {
        for (mut t, g) in self.tensors_mut().into_iter().zip(other.tensors()) {
            t.scaled_add(alpha, &g);
        }
    }

    fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct SequenceClassifier<F> {
    pub version: u32,
    pub direction: Direction,
    pub num_classes: usize,
    pub config: NetworkConfig,
    pub params: NetworkParams<F>,
}

/// Per-layer activations of one directional stack.
#[derive(Debug, Clone)]
struct LayerRun<F> {
    steps: Vec<StepCache<F>>,
    /// Inverted-dropout masks (already scaled by 1/(1-p)), one per step.
    masks: Option<Vec<Array1<F>>>,
    outputs: Vec<Array1<F>>,
}

/// Everything the backward pass needs from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<F> {
    forward: Vec<LayerRun<F>>,
    backward: Vec<LayerRun<F>>,
    len: usize,
    /// Head input: `[h_forward ; h_backward]`.
    pub representation: Array1<F>,
    pub probabilities: Vec<F>,
}

impl<F: Scalar> ForwardCache<F> {
    pub fn forward_vector(&self) -> Array1<F> {
        self.forward.last().expect("non-empty stack").outputs[self.len - 1].clone()
    }

    /// State of the backward stack at the first position; `None` for forward-only networks.
    pub fn backward_vector(&self) -> Option<Array1<F>> {
        self.backward
            .last()
            .map(|run| run.outputs[self.len - 1].clone())
    }
}

#[derive(Debug, Clone)]
pub struct Gradients<F> {
    pub params: NetworkParams<F>,
    /// Gradient with respect to each input vector, in sequence order.
    pub inputs: Vec<Array1<F>>,
    pub loss: F,
    /// Global parameter-gradient norm before clipping.
    pub norm: F,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequencePrediction<F> {
    pub class: usize,
    pub probabilities: Vec<F>,
    /// The sequence was empty, so `class` is the fallback class 0.
    pub empty_fallback: bool,
}

fn run_stack<F: Scalar, R: Rng>(
    stack: &[LstmParams<F>],
    inputs: &[Array1<F>],
    dropout: f64,
    mut rng: Option<&mut R>,
) -> Vec<LayerRun<F>> {
    let mut runs: Vec<LayerRun<F>> = Vec::with_capacity(stack.len());
    for layer in stack {
        let source: &[Array1<F>] = match runs.last() {
            Some(prev) => &prev.outputs,
            None => inputs,
        };
        let mut state = LstmState::zeros(layer.hidden_size);
        let mut steps = Vec::with_capacity(source.len());
        for x in source {
            let cache = layer.step_cached(x.view(), &state);
            state = LstmState {
                h: cache.h.clone(),
                c: cache.c.clone(),
            };
            steps.push(cache);
        }
        let masks = match rng.as_deref_mut() {
            Some(rng) if dropout > 0.0 => {
                let keep = F::of(1.0 / (1.0 - dropout));
                Some(
                    (0..steps.len())
                        .map(|_| {
                            Array1::from_shape_fn(layer.hidden_size, |_| {
                                if rng.random::<f64>() < dropout {
                                    F::zero()
                                } else {
                                    keep
                                }
                            })
                        })
                        .collect::<Vec<_>>(),
                )
            }
            _ => None,
        };
        let outputs = match &masks {
            Some(m) => steps.iter().zip(m).map(|(s, m)| &s.h * m).collect(),
            None => steps.iter().map(|s| s.h.clone()).collect(),
        };
        runs.push(LayerRun {
            steps,
            masks,
            outputs,
        });
    }
    runs
}

/// BPTT through a stack. `top_grad` is the gradient on the top layer's final
/// output. Returns the gradient for each input in the stack's reading order.
fn backprop_stack<F: Scalar>(
    stack: &[LstmParams<F>],
    runs: &[LayerRun<F>],
    top_grad: Array1<F>,
    grads: &mut [LstmParams<F>],
) -> Vec<Array1<F>> {
    let len = runs[0].steps.len();
    let top_h = stack.last().expect("non-empty stack").hidden_size;
    let mut d_out: Vec<Array1<F>> = vec![Array1::zeros(top_h); len];
    d_out[len - 1] = top_grad;
    for l in (0..stack.len()).rev() {
        let run = &runs[l];
        let layer = &stack[l];
        if let Some(masks) = &run.masks {
            for (d, m) in d_out.iter_mut().zip(masks) {
                *d *= m;
            }
        }
        let mut dh_next = Array1::zeros(layer.hidden_size);
        let mut dc_next = Array1::zeros(layer.hidden_size);
        let mut dx = vec![Array1::zeros(layer.input_size); len];
        for t in (0..len).rev() {
            let dh = &d_out[t] + &dh_next;
            let (dxt, dhp, dcp) = layer.step_backward(&run.steps[t], &dh, &dc_next, &mut grads[l]);
            dx[t] = dxt;
            dh_next = dhp;
            dc_next = dcp;
        }
        d_out = dx;
    }
    d_out
}

impl<F: Scalar> SequenceClassifier<F> {
    pub fn zeros(direction: Direction, num_classes: usize, config: NetworkConfig) -> Result<Self> {
        config.validate()?;
        if num_classes < 2 {
            return Err(Error::invalid("a classifier needs at least two classes"));
        }
        let stack = || {
            (0..config.layers)
                .map(|l| {
                    let input = if l == 0 {
                        config.embedding_dim
                    } else {
                        config.hidden
                    };
                    LstmParams::zeros(input, config.hidden, config.peephole)
                })
                .collect::<Vec<_>>()
        };
        let backward = match direction {
            Direction::Forward => Vec::new(),
            Direction::Bidirectional => stack(),
        };
        Ok(Self {
            version: NETWORK_MODEL_VERSION,
            direction,
            num_classes,
            params: NetworkParams {
                forward: stack(),
                backward,
                head_w: Array2::zeros((num_classes, config.hidden * direction.stacks())),
                head_b: Array1::zeros(num_classes),
            },
            config,
        })
    }

    /// Uniform initialization in `[-init_scale, init_scale]`.
    pub fn random<R: Rng>(
        direction: Direction,
        num_classes: usize,
        config: NetworkConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let mut net = Self::zeros(direction, num_classes, config)?;
        let scale = net.config.init_scale;
        for mut t in net.params.tensors_mut() {
            t.mapv_inplace(|_| F::of(rng.random_range(-scale..=scale)));
        }
        Ok(net)
    }

    pub fn representation_dim(&self) -> usize {
        self.config.hidden * self.direction.stacks()
    }

    fn check_sequence(&self, sequence: &[Array1<F>]) -> Result<()> {
        if sequence.is_empty() {
            return Err(Error::invalid("cannot run a recurrent network on an empty sequence"));
        }
        if let Some(bad) = sequence.iter().find(|x| x.len() != self.config.embedding_dim) {
            return Err(Error::Dimension {
                context: "sequence element",
                expected: self.config.embedding_dim,
                actual: bad.len(),
            });
        }
        Ok(())
    }

    /// Forward pass. Passing an RNG enables dropout.
    pub fn forward<R: Rng>(
        &self,
        sequence: &[Array1<F>],
        mut dropout_rng: Option<&mut R>,
    ) -> Result<ForwardCache<F>> {
        self.check_sequence(sequence)?;
        let len = sequence.len();
        let p = self.config.dropout;
        let forward = run_stack(&self.params.forward, sequence, p, dropout_rng.as_deref_mut());
        let mut rep = forward.last().expect("layers > 0").outputs[len - 1].clone();
        let mut backward = Vec::new();
        if self.direction == Direction::Bidirectional {
            let reversed: Vec<Array1<F>> = sequence.iter().rev().cloned().collect();
            backward = run_stack(&self.params.backward, &reversed, p, dropout_rng);
            let back_rep = &backward.last().expect("layers > 0").outputs[len - 1];
            rep = concatenate(Axis(0), &[rep.view(), back_rep.view()])
                .expect("1-d concatenation");
        }
        let mut probabilities = (self.params.head_w.dot(&rep) + &self.params.head_b).to_vec();
        softmax_in_place(&mut probabilities);
        Ok(ForwardCache {
            forward,
            backward,
            len,
            representation: rep,
            probabilities,
        })
    }

    /// Cross-entropy gradients of one example; clipped to `config.clip_norm`.
    pub fn backward(&self, cache: &ForwardCache<F>, gold: usize) -> Gradients<F> {
        let mut grads = self.params.zeros_like();
        let mut d_logits = Array1::from(cache.probabilities.clone());
        d_logits[gold] = d_logits[gold] - F::one();
        let loss = -cache.probabilities[gold].max(F::min_positive_value()).ln();

        for (mut row, &d) in grads.params_head_rows().zip(&d_logits) {
            row.scaled_add(d, &cache.representation);
        }
        grads.head_b.assign(&d_logits);
        let d_rep = self.params.head_w.t().dot(&d_logits);

        let h = self.config.hidden;
        let mut inputs = backprop_stack(
            &self.params.forward,
            &cache.forward,
            d_rep.slice(s![..h]).to_owned(),
            &mut grads.forward,
        );
        if self.direction == Direction::Bidirectional {
            let back = backprop_stack(
                &self.params.backward,
                &cache.backward,
                d_rep.slice(s![h..]).to_owned(),
                &mut grads.backward,
            );
            for (d, b) in inputs.iter_mut().zip(back.iter().rev()) {
                *d += b;
            }
        }

        let norm = grads.norm();
        if let Some(clip) = self.config.clip_norm {
            let clip = F::of(clip);
            if norm > clip {
                let factor = clip / norm;
                grads.scale(factor);
                for d in &mut inputs {
                    d.mapv_inplace(|x| x * factor);
                }
            }
        }
        Gradients {
            params: grads,
            inputs,
            loss,
            norm,
        }
    }

    pub fn probabilities(&self, sequence: &[Array1<F>]) -> Result<Vec<F>> {
        Ok(self.forward::<ChaCha8Rng>(sequence, None)?.probabilities)
    }

    /// Cross-entropy of one example with dropout off.
    pub fn loss(&self, sequence: &[Array1<F>], gold: usize) -> Result<F> {
        let p = self.probabilities(sequence)?;
        Ok(-p[gold].ln())
    }

    /// Argmax with dropout off; an empty sequence falls back to class 0.
    pub fn predict(&self, sequence: &[Array1<F>]) -> Result<SequencePrediction<F>> {
        if sequence.is_empty() {
            let uniform = F::one() / F::of(self.num_classes as f64);
            return Ok(SequencePrediction {
                class: 0,
                probabilities: vec![uniform; self.num_classes],
                empty_fallback: true,
            });
        }
        let probabilities = self.probabilities(sequence)?;
        Ok(SequencePrediction {
            class: argmax(&probabilities),
            probabilities,
            empty_fallback: false,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let net: Self = serde_json::from_str(json)?;
        if net.version != NETWORK_MODEL_VERSION {
            return Err(Error::Incompatible(format!(
                "network model version {} (expected {NETWORK_MODEL_VERSION})",
                net.version
            )));
        }
        Ok(net)
    }
}

impl<F: Scalar> NetworkParams<F> {
    fn params_head_rows(&mut self) -> impl Iterator<Item = ndarray::ArrayViewMut1<'_, F>> {
        self.head_w.rows_mut().into_iter()
    }
}

/// Forward pass with optional dropout driven by `dropout_seed`.
pub fn forward_sequence<F: Scalar>(
    classifier: &SequenceClassifier<F>,
    sequence: &[Array1<F>],
    dropout_seed: Option<u64>,
) -> Result<ForwardCache<F>> {
    let mut rng = dropout_seed.map(ChaCha8Rng::seed_from_u64);
    classifier.forward(sequence, rng.as_mut())
}

pub fn backward_sequence<F: Scalar>(
    classifier: &SequenceClassifier<F>,
    cache: &ForwardCache<F>,
    gold: usize,
) -> Gradients<F> {
    classifier.backward(cache, gold)
}

pub fn predict_sequence<F: Scalar>(
    classifier: &SequenceClassifier<F>,
    sequence: &[Array1<F>],
) -> Result<SequencePrediction<F>> {
    classifier.predict(sequence)
}

#[derive(Debug, Clone)]
pub struct TrainedNetwork<F> {
    pub classifier: SequenceClassifier<F>,
    /// Mean training loss of each epoch.
    pub loss_trace: Vec<F>,
}

/// Source of training examples; fine-tuning sources also receive input gradients.
trait ExampleSource<F> {
    fn len(&self) -> usize;
    fn label(&self, i: usize) -> usize;
    fn embed(&self, i: usize) -> Vec<Array1<F>>;
    fn apply_input_gradient(&mut self, _i: usize, _grads: &[Array1<F>], _lr: F) {}
}

struct Frozen<'a, F>(&'a [(Vec<Array1<F>>, usize)]);

impl<F: Scalar> ExampleSource<F> for Frozen<'_, F> {
    fn len(&self) -> usize {
        self.0.len()
    }
    fn label(&self, i: usize) -> usize {
        self.0[i].1
    }
    fn embed(&self, i: usize) -> Vec<Array1<F>> {
        self.0[i].0.clone()
    }
}

struct FineTuned<'a, F> {
    docs: &'a [(Vec<String>, usize)],
    table: &'a mut EmbeddingTable<F>,
}

impl<F: Scalar> ExampleSource<F> for FineTuned<'_, F> {
    fn len(&self) -> usize {
        self.docs.len()
    }
    fn label(&self, i: usize) -> usize {
        self.docs[i].1
    }
    fn embed(&self, i: usize) -> Vec<Array1<F>> {
        self.table.embed(&self.docs[i].0)
    }
    fn apply_input_gradient(&mut self, i: usize, grads: &[Array1<F>], lr: F) {
        for (token, g) in self.docs[i].0.iter().zip(grads) {
            if let Some(id) = self.table.id(token) {
                self.table.input_row_mut(id).scaled_add(-lr, g);
            }
        }
    }
}

fn train_loop<F: Scalar, S: ExampleSource<F>>(
    source: &mut S,
    num_classes: usize,
    config: &NetworkConfig,
    direction: Direction,
) -> Result<TrainedNetwork<F>> {
    config.validate()?;
    if source.len() == 0 {
        return Err(Error::invalid("empty training set"));
    }
    let mut seen = vec![false; num_classes];
    for i in 0..source.len() {
        let label = source.label(i);
        if label >= num_classes {
            return Err(Error::invalid(format!("class id {label} ≥ {num_classes}")));
        }
        seen[label] = true;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::invalid(format!("class {missing} has no training sequences")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut classifier = SequenceClassifier::random(direction, num_classes, config.clone(), &mut rng)?;
    let lr = F::of(config.learning_rate);
    let mut order: Vec<usize> = (0..source.len()).collect();
    let mut loss_trace = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = F::zero();
        for &i in &order {
            let sequence = source.embed(i);
            let cache = classifier.forward(&sequence, Some(&mut rng))?;
            let grads = classifier.backward(&cache, source.label(i));
            if !grads.loss.is_finite() || !grads.norm.is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite loss at epoch {epoch}, example {i}"
                )));
            }
            total = total + grads.loss;
            classifier.params.scaled_add(-lr, &grads.params);
            if config.fine_tune_embeddings {
                source.apply_input_gradient(i, &grads.inputs, lr);
            }
        }
        if !classifier.params.all_finite() {
            return Err(Error::Numerical(format!("parameters diverged in epoch {epoch}")));
        }
        let mean = total / F::of(source.len() as f64);
        log::debug!("epoch {epoch}: mean loss {mean}");
        loss_trace.push(mean);
    }
    Ok(TrainedNetwork {
        classifier,
        loss_trace,
    })
}

/// Per-example SGD on frozen input vectors, reshuffled each epoch under `config.seed`.
pub fn train_network<F: Scalar>(
    data: &[(Vec<Array1<F>>, usize)],
    num_classes: usize,
    config: &NetworkConfig,
    direction: Direction,
) -> Result<TrainedNetwork<F>> {
    if let Some((seq, _)) = data.iter().find(|(s, _)| s.is_empty()) {
        debug_assert!(seq.is_empty());
        return Err(Error::invalid("training set contains an empty sequence"));
    }
    let mut source = Frozen(data);
    let mut cfg = config.clone();
    cfg.fine_tune_embeddings = false;
    train_loop(&mut source, num_classes, &cfg, direction)
}

/// Like [`train_network`] but reads tokens through `table` and, when
/// `config.fine_tune_embeddings` is set, updates the table's input vectors too.
pub fn train_network_on_tokens<F: Scalar>(
    docs: &[(Vec<String>, usize)],
    table: &mut EmbeddingTable<F>,
    num_classes: usize,
    config: &NetworkConfig,
    direction: Direction,
) -> Result<TrainedNetwork<F>> {
    if docs.iter().any(|(s, _)| s.is_empty()) {
        return Err(Error::invalid("training set contains an empty sequence"));
    }
    if table.dim() != config.embedding_dim {
        return Err(Error::Dimension {
            context: "embedding dimension",
            expected: config.embedding_dim,
            actual: table.dim(),
        });
    }
    let mut source = FineTuned { docs, table };
    train_loop(&mut source, num_classes, config, direction)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn tiny_config(layers: usize) -> NetworkConfig {
        NetworkConfig {
            layers,
            hidden: 3,
            embedding_dim: 2,
            epochs: 1,
            learning_rate: 0.1,
            dropout: 0.0,
            seed: 7,
            clip_norm: None,
            peephole: true,
            init_scale: 0.5,
            fine_tune_embeddings: false,
        }
    }

    fn sequence(rng: &mut ChaCha8Rng, len: usize, dim: usize) -> Vec<Array1<f64>> {
        (0..len)
            .map(|_| Array1::from_shape_fn(dim, |_| rng.random_range(-1.0..1.0)))
            .collect()
    }

    fn finite_difference_check(direction: Direction, layers: usize) {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let net = SequenceClassifier::<f64>::random(direction, 3, tiny_config(layers), &mut rng).unwrap();
        let seq = sequence(&mut rng, 4, 2);
        let gold = 1;
        let grads = backward_sequence(&net, &forward_sequence(&net, &seq, None).unwrap(), gold);
        let eps = 1e-4;

        let analytic: Vec<f64> = grads.params.tensors().iter().flat_map(|t| t.iter().copied().collect::<Vec<_>>()).collect();
        let mut probe = net.clone();
        let count = analytic.len();
        let mut worst: f64 = 0.0;
        for k in 0..count {
            let nudge = |p: &mut SequenceClassifier<f64>, delta: f64| {
                let mut seen = 0;
                for mut t in p.params.tensors_mut() {
                    if k < seen + t.len() {
                        let slot = t.iter_mut().nth(k - seen).unwrap();
                        *slot += delta;
                        return;
                    }
                    seen += t.len();
                }
            };
            nudge(&mut probe, eps);
            let up = probe.loss(&seq, gold).unwrap();
            nudge(&mut probe, -2.0 * eps);
            let down = probe.loss(&seq, gold).unwrap();
            nudge(&mut probe, eps);
            let numeric = (up - down) / (2.0 * eps);
            let scale = analytic[k].abs().max(numeric.abs()).max(1e-6);
            worst = worst.max((analytic[k] - numeric).abs() / scale.max(1e-3));
        }
        assert!(worst < 1e-3, "worst relative error {worst}");

        for (t, g) in grads.inputs.iter().enumerate() {
            for d in 0..2 {
                let mut plus = seq.clone();
                plus[t][d] += eps;
                let mut minus = seq.clone();
                minus[t][d] -= eps;
                let numeric = (net.loss(&plus, gold).unwrap() - net.loss(&minus, gold).unwrap()) / (2.0 * eps);
                assert_abs_diff_eq!(g[d], numeric, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences_forward() {
        finite_difference_check(Direction::Forward, 1);
        finite_difference_check(Direction::Forward, 2);
    }

    #[test]
    fn gradients_match_finite_differences_bidirectional() {
        finite_difference_check(Direction::Bidirectional, 2);
    }

    #[test]
    fn palindrome_gives_equal_halves_when_stacks_match() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut net = SequenceClassifier::<f64>::random(Direction::Bidirectional, 3, tiny_config(2), &mut rng).unwrap();
        net.params.backward = net.params.forward.clone();
        let half = sequence(&mut rng, 3, 2);
        let mut pal = half.clone();
        pal.extend(half.iter().rev().cloned());
        let cache = forward_sequence(&net, &pal, None).unwrap();
        let fwd = cache.forward_vector();
        let bwd = cache.backward_vector().unwrap();
        for (a, b) in fwd.iter().zip(&bwd) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn zeroed_backward_half_matches_forward_only() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cfg = tiny_config(2);
        let uni = SequenceClassifier::<f64>::random(Direction::Forward, 3, cfg.clone(), &mut rng).unwrap();
        let mut bi = SequenceClassifier::<f64>::random(Direction::Bidirectional, 3, cfg, &mut rng).unwrap();
        bi.params.forward = uni.params.forward.clone();
        bi.params.head_b = uni.params.head_b.clone();
        bi.params.head_w.fill(0.0);
        bi.params.head_w.slice_mut(s![.., ..3]).assign(&uni.params.head_w);
        let seq = sequence(&mut rng, 5, 2);
        let a = uni.probabilities(&seq).unwrap();
        let b = bi.probabilities(&seq).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn reversal_with_swapped_stacks_is_equivalent() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let net = SequenceClassifier::<f64>::random(Direction::Bidirectional, 3, tiny_config(2), &mut rng).unwrap();
        let mut swapped = net.clone();
        std::mem::swap(&mut swapped.params.forward, &mut swapped.params.backward);
        swapped.params.head_w.slice_mut(s![.., ..3]).assign(&net.params.head_w.slice(s![.., 3..]));
        swapped.params.head_w.slice_mut(s![.., 3..]).assign(&net.params.head_w.slice(s![.., ..3]));
        let seq = sequence(&mut rng, 6, 2);
        let rev: Vec<_> = seq.iter().rev().cloned().collect();
        let a = net.probabilities(&seq).unwrap();
        let b = swapped.probabilities(&rev).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn clipping_bounds_the_global_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut cfg = tiny_config(2);
        cfg.init_scale = 3.0;
        cfg.clip_norm = Some(0.01);
        let net = SequenceClassifier::<f64>::random(Direction::Bidirectional, 3, cfg, &mut rng).unwrap();
        let seq = sequence(&mut rng, 5, 2);
        let grads = backward_sequence(&net, &forward_sequence(&net, &seq, None).unwrap(), 0);
        assert!(grads.norm > 0.01);
        assert!(grads.params.norm() <= 0.01 * (1.0 + 1e-9));
    }

    #[test]
    fn empty_sequences() {
        let net = SequenceClassifier::<f64>::zeros(Direction::Forward, 3, tiny_config(1)).unwrap();
        assert!(forward_sequence(&net, &[], None).is_err());
        let p = predict_sequence(&net, &[]).unwrap();
        assert!(p.empty_fallback);
        assert_eq!(p.class, 0);
        assert!(net.probabilities(&[Array1::zeros(5)]).is_err());
    }

    fn toy_data(n: usize, seed: u64) -> Vec<(Vec<Array1<f64>>, usize)> {
        // Class is carried by the sign of the first component of a random position.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let label = i % 2;
                let len = rng.random_range(2..6);
                let mut seq = sequence(&mut rng, len, 2);
                for x in &mut seq {
                    x[0] = x[0].abs() * 0.2;
                }
                let pos = rng.random_range(0..len);
                seq[pos][0] = if label == 0 { -1.0 } else { 1.0 };
                (seq, label)
            })
            .collect()
    }

    #[test]
    fn overfits_a_small_training_set() {
        let data = toy_data(20, 2);
        let mut cfg = tiny_config(1);
        cfg.hidden = 8;
        cfg.epochs = 200;
        cfg.clip_norm = Some(5.0);
        for direction in [Direction::Forward, Direction::Bidirectional] {
            let fit = train_network(&data, 2, &cfg, direction).unwrap();
            let correct = data
                .iter()
                .filter(|(s, y)| fit.classifier.predict(s).unwrap().class == *y)
                .count();
            assert_eq!(correct, 20, "{direction:?}");
            assert!(fit.loss_trace.last().unwrap() < &0.1);
        }
    }

    #[test]
    fn early_loss_does_not_increase() {
        let data = toy_data(20, 2);
        let mut cfg = tiny_config(1);
        cfg.hidden = 8;
        cfg.epochs = 5;
        cfg.clip_norm = Some(5.0);
        for direction in [Direction::Forward, Direction::Bidirectional] {
            let fit = train_network(&data, 2, &cfg, direction).unwrap();
            for w in fit.loss_trace.windows(2) {
                assert!(w[1] <= w[0], "{direction:?} {:?}", fit.loss_trace);
            }
        }
    }

    #[test]
    fn confident_correct_prediction_has_vanishing_gradient() {
        let mut net = SequenceClassifier::<f64>::zeros(Direction::Forward, 3, tiny_config(1)).unwrap();
        net.params.head_b[2] = 60.0;
        let seq = vec![Array1::from(vec![0.3, -0.2])];
        let grads = backward_sequence(&net, &forward_sequence(&net, &seq, None).unwrap(), 2);
        assert!(grads.params.norm() < 1e-20);
        assert!(grads.loss < 1e-20);
    }

    #[test]
    fn training_is_deterministic_and_round_trips() {
        let data = toy_data(10, 6);
        let mut cfg = tiny_config(2);
        cfg.epochs = 3;
        cfg.dropout = 0.3;
        let a = train_network(&data, 2, &cfg, Direction::Bidirectional).unwrap();
        let b = train_network(&data, 2, &cfg, Direction::Bidirectional).unwrap();
        assert_eq!(a.classifier, b.classifier);
        assert_eq!(a.loss_trace, b.loss_trace);
        let back = SequenceClassifier::<f64>::from_json(&a.classifier.to_json().unwrap()).unwrap();
        assert_eq!(back, a.classifier);
    }

    #[test]
    fn rejects_bad_training_sets() {
        let cfg = tiny_config(1);
        assert!(train_network::<f64>(&[], 2, &cfg, Direction::Forward).is_err());
        let one_class = vec![(vec![Array1::zeros(2)], 0usize)];
        assert!(train_network::<f64>(&one_class, 2, &cfg, Direction::Forward).is_err());
        let empty = vec![(vec![], 0usize), (vec![Array1::zeros(2)], 1)];
        assert!(train_network::<f64>(&empty, 2, &cfg, Direction::Forward).is_err());
    }

    #[test]
    fn fine_tuning_moves_embeddings() {
        let cfg0 = crate::embeddings::W2vConfig { dim: 2, epochs: 1, ..Default::default() };
        let docs: Vec<Vec<String>> = vec![vec!["tốt".into(), "lắm".into()], vec!["tệ".into(), "lắm".into()]];
        let mut table = crate::embeddings::train_word2vec::<f64>(&docs, &cfg0).unwrap();
        let before = table.clone();
        let labeled: Vec<_> = docs.iter().cloned().zip([0usize, 1]).collect();
        let mut cfg = tiny_config(1);
        cfg.fine_tune_embeddings = true;
        cfg.epochs = 3;
        train_network_on_tokens(&labeled, &mut table, 2, &cfg, Direction::Forward).unwrap();
        assert_ne!(before.input_vector(table.id("tốt").unwrap()), table.input_vector(table.id("tốt").unwrap()));
    }
}
