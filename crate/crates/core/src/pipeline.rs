//! Experiment runner: preprocess, split, featurize, train, evaluate. Also the
//! versioned container that bundles a trained classifier with everything
//! needed to apply it to raw text.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{split_train_test, Corpus, FeedbackRecord, Task, TokenAnnotation};
use crate::embeddings::{train_word2vec, EmbeddingTable, W2vConfig};
use crate::error::{Error, Result};
use crate::eval::{confusion, format_row, metrics, Averaging, MetricsReport};
use crate::features::{
    build_vocabulary, chi_square_select, extract, feature_set_label, vectorize, FeatureKind,
    FeatureSet, SparseVector, Vocabulary,
};
use crate::maxent::{train_maxent, MaxentModel, TrainConfig};
use crate::naive_bayes::{train_nb, NbModel};
use crate::preprocess::{preprocess_text, StopwordList, TokenSequence};
use crate::recurrent::{train_network_on_tokens, Direction, NetworkConfig, SequenceClassifier};
use crate::scalar::Scalar;

pub const TRAINED_MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Nb,
    Maxent,
    Lstm,
    Bilstm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Nb, ModelKind::Maxent, ModelKind::Lstm, ModelKind::Bilstm];

    pub fn is_recurrent(self) -> bool {
        matches!(self, ModelKind::Lstm | ModelKind::Bilstm)
    }

    /// Name used in result tables.
    pub fn display_name(self) -> &'static str {
        match self {
            ModelKind::Nb => "NB",
            ModelKind::Maxent => "Maxent",
            ModelKind::Lstm => "LSTM",
            ModelKind::Bilstm => "Bi-LSTM",
        }
    }

    fn direction(self) -> Option<Direction> {
        match self {
            ModelKind::Lstm => Some(Direction::Forward),
            ModelKind::Bilstm => Some(Direction::Bidirectional),
            _ => None,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Nb => "nb",
            ModelKind::Maxent => "maxent",
            ModelKind::Lstm => "lstm",
            ModelKind::Bilstm => "bilstm",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "").as_str() {
            "nb" => Ok(ModelKind::Nb),
            "maxent" => Ok(ModelKind::Maxent),
            "lstm" => Ok(ModelKind::Lstm),
            "bilstm" => Ok(ModelKind::Bilstm),
            other => Err(Error::invalid(format!("unknown model `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EmbeddingSource {
    /// word2vec text file.
    File(PathBuf),
    /// Train word2vec on the training split's token sequences.
    TrainOnSplit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub task: Task,
    pub model: ModelKind,
    /// n-gram models only.
    pub features: FeatureSet,
    /// Chi-square cutoff; `None` keeps every feature.
    pub top_k: Option<usize>,
    pub min_df: usize,
    /// Recurrent models only.
    pub embeddings: Option<EmbeddingSource>,
    pub split_ratio: f64,
    /// Drives the split and every model's randomness; overrides the seeds in the sub-configs.
    pub seed: u64,
    pub nb_alpha: f64,
    pub maxent: TrainConfig<f64>,
    pub network: NetworkConfig,
    pub word2vec: W2vConfig,
    /// Averaging used for the one-line table row.
    pub averaging: Averaging,
}

impl ExperimentSpec {
    pub fn new(task: Task, model: ModelKind) -> Self {
        Self {
            task,
            model,
            features: FeatureSet::new(),
            top_k: None,
            min_df: 1,
            embeddings: None,
            split_ratio: 0.8,
            seed: 42,
            nb_alpha: 1.0,
            maxent: TrainConfig::default(),
            network: NetworkConfig::default(),
            word2vec: W2vConfig::default(),
            averaging: Averaging::Weighted,
        }
    }

    /// Checks flag combinations; touches no files.
    pub fn validate(&self) -> Result<()> {
        if self.model.is_recurrent() {
            if self.embeddings.is_none() {
                return Err(Error::invalid(format!("{} needs word embeddings", self.model.display_name())));
            }
            if !self.features.is_empty() {
                return Err(Error::invalid(format!(
                    "{} uses embeddings, not n-gram features",
                    self.model.display_name()
                )));
            }
            self.network.validate()?;
            if self.embeddings == Some(EmbeddingSource::TrainOnSplit) {
                self.word2vec.validate()?;
            }
        } else {
            if self.features.is_empty() {
                return Err(Error::invalid(format!(
                    "{} needs at least one feature kind",
                    self.model.display_name()
                )));
            }
            if self.embeddings.is_some() {
                return Err(Error::invalid("embeddings apply to lstm/bilstm only"));
            }
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(Error::invalid(format!("split ratio must be in (0, 1), got {}", self.split_ratio)));
        }
        if !(self.nb_alpha > 0.0) {
            return Err(Error::invalid("nb alpha must be positive"));
        }
        if self.min_df == 0 || self.top_k == Some(0) {
            return Err(Error::invalid("min_df and top_k must be at least 1"));
        }
        Ok(())
    }

    /// Features column of the results table.
    pub fn features_label(&self) -> String {
        if self.model.is_recurrent() {
            "Word2Vec".to_string()
        } else {
            feature_set_label(&self.features)
        }
    }

    pub fn needs_annotations(&self) -> bool {
        self.features.iter().any(|k| k.needs_annotations())
    }
}

/// The ten rows of the ablation table for one task, sharing `base` settings.
pub fn grid_specs(base: &ExperimentSpec, task: Task) -> Vec<ExperimentSpec> {
    use FeatureKind::*;
    let sets: [&[FeatureKind]; 4] = [&[Unigram], &[Unigram, Bigram], &[Unigram, Bigram, Dep], &[Unigram, Bigram, Dep, Pos]];
    let mut out = Vec::with_capacity(10);
    for model in [ModelKind::Nb, ModelKind::Maxent] {
        for set in sets {
            out.push(ExperimentSpec {
                task,
                model,
                features: set.iter().copied().collect(),
                embeddings: None,
                ..base.clone()
            });
        }
    }
    for model in [ModelKind::Lstm, ModelKind::Bilstm] {
        out.push(ExperimentSpec {
            task,
            model,
            features: FeatureSet::new(),
            embeddings: Some(base.embeddings.clone().unwrap_or(EmbeddingSource::TrainOnSplit)),
            top_k: None,
            ..base.clone()
        });
    }
    out
}

/// Trained classifier plus featurization state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", bound = "F: Scalar")]
pub enum Classifier<F> {
    Nb {
        features: FeatureSet,
        vocabulary: Vocabulary,
        model: NbModel<F>,
    },
    Maxent {
        features: FeatureSet,
        vocabulary: Vocabulary,
        model: MaxentModel<F>,
    },
    Recurrent {
        embeddings: EmbeddingTable<F>,
        network: SequenceClassifier<F>,
    },
}

/// Self-contained model file: raw text in, label out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct TrainedModel<F> {
    pub version: u32,
    pub task: Task,
    pub model: ModelKind,
    pub stopwords: StopwordList,
    pub classifier: Classifier<F>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub class: usize,
    pub label: String,
    /// Nothing survived preprocessing. n-gram models then predict from
    /// their priors alone; recurrent models fall back to class 0.
    pub flagged: bool,
}

impl<F: Scalar> TrainedModel<F> {
    pub fn needs_annotations(&self) -> bool {
        match &self.classifier {
            Classifier::Nb { features, .. } | Classifier::Maxent { features, .. } => {
                features.iter().any(|k| k.needs_annotations())
            }
            Classifier::Recurrent { .. } => false,
        }
    }

    pub fn predict_tokens(
        &self,
        tokens: &[String],
        annotation: Option<&[TokenAnnotation]>,
    ) -> Result<Prediction> {
        let names = self.task.class_names();
        let flagged = tokens.is_empty();
        if flagged && matches!(self.classifier, Classifier::Recurrent { .. }) {
            return Ok(Prediction {
                class: 0,
                label: names[0].to_string(),
                flagged,
            });
        }
        let class = match &self.classifier {
            Classifier::Nb {
                features,
                vocabulary,
                model,
            } => model.predict(&vectorize(&extract(tokens, annotation, features)?, vocabulary)).class,
            Classifier::Maxent {
                features,
                vocabulary,
                model,
            } => model.predict(&vectorize(&extract(tokens, annotation, features)?, vocabulary)),
            Classifier::Recurrent {
                embeddings,
                network,
            } => network.predict(&embeddings.embed(tokens))?.class,
        };
        Ok(Prediction {
            class,
            label: names[class].to_string(),
            flagged,
        })
    }

    pub fn predict_text(&self, text: &str, annotation: Option<&[TokenAnnotation]>) -> Result<Prediction> {
        self.predict_tokens(&preprocess_text(text, &self.stopwords), annotation)
    }

    /// Predicts `record`, looking its annotation up in `corpus`.
    pub fn predict_record(&self, corpus: &Corpus, record: &FeedbackRecord) -> Result<Prediction> {
        let annotation = corpus.annotation(&record.id);
        if self.needs_annotations() && annotation.is_none() {
            return Err(Error::invalid(format!(
                "model uses dep/pos features but record {} has no annotation",
                record.id
            )));
        }
        self.predict_text(&record.text, annotation)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(json)?;
        match value.get("version").and_then(serde_json::Value::as_u64) {
            Some(v) if v == u64::from(TRAINED_MODEL_VERSION) => {}
            other => {
                return Err(Error::Incompatible(format!(
                    "model file version {other:?}, this build reads version {TRAINED_MODEL_VERSION}"
                )))
            }
        }
        let mut model: Self = serde_json::from_value(value)?;
        if let Classifier::Recurrent { embeddings, network } = &mut model.classifier {
            embeddings.reindex();
            if network.version != crate::recurrent::NETWORK_MODEL_VERSION {
                return Err(Error::Incompatible(format!("network version {}", network.version)));
            }
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let json = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&json)
    }

    /// Fails unless the model was trained for `task`.
    pub fn expect_task(&self, task: Task) -> Result<()> {
        if self.task != task {
            return Err(Error::Incompatible(format!(
                "expected a {task} model, found a {} model",
                self.task
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub task: Task,
    pub model: String,
    pub features: String,
    pub seed: u64,
    pub train_size: usize,
    pub test_size: usize,
    /// Test records that were empty after preprocessing.
    pub flagged: usize,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub summary: ExperimentSummary,
    pub model: TrainedModel<f64>,
    /// `Model | Features | P R F1`.
    pub row: String,
    /// Maxent objective trace or recurrent per-epoch loss.
    pub trace: Vec<f64>,
}

impl ExperimentOutcome {
    pub fn metrics_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.summary)?)
    }
}

fn featurize(
    corpus: &Corpus,
    docs: &[(&FeedbackRecord, TokenSequence)],
    kinds: &FeatureSet,
) -> Result<Vec<Vec<String>>> {
    docs.iter()
        .map(|(r, tokens)| {
            let ann = corpus.annotation(&r.id);
            if kinds.iter().any(|k| k.needs_annotations()) && ann.is_none() {
                return Err(Error::invalid(format!("record {} has no annotation", r.id)));
            }
            extract(tokens, ann, kinds)
        })
        .collect()
}

/// Trains `spec.model` on every record of `train` labeled for `spec.task`.
/// Returns the model and its training trace (maxent objectives or recurrent epoch losses).
pub fn train_model(spec: &ExperimentSpec, train: &Corpus, stopwords: &StopwordList) -> Result<(TrainedModel<f64>, Vec<f64>)> {
    spec.validate()?;
    if spec.needs_annotations() && train.annotations().is_none() {
        return Err(Error::invalid("dep/pos features need an annotation file"));
    }
    let task = spec.task;
    let k = task.num_classes();
    let train = &train.labeled_for(task);
    let tokenized = |c: &Corpus| -> Vec<(FeedbackRecord, TokenSequence)> {
        c.records()
            .iter()
            .map(|r| (r.clone(), preprocess_text(&r.text, stopwords)))
            .collect()
    };
    let train_docs = tokenized(&train);
    let train_labels: Vec<usize> = train_docs
        .iter()
        .map(|(r, _)| task.label_of(r).expect("labeled subset"))
        .collect();
    let train_refs: Vec<(&FeedbackRecord, TokenSequence)> = train_docs.iter().map(|(r, t)| (r, t.clone())).collect();

    let mut trace = Vec::new();
    let classifier = match spec.model {
        ModelKind::Nb | ModelKind::Maxent => {
            let feats = featurize(train, &train_refs, &spec.features)?;
            let mut vocabulary = build_vocabulary(&feats, spec.min_df)?;
            let mut vectors: Vec<SparseVector> = feats.iter().map(|f| vectorize(f, &vocabulary)).collect();
            if let Some(top_k) = spec.top_k {
                let selection = chi_square_select(&vocabulary, &vectors, &train_labels, k, top_k)?;
                vectors = vectors.iter().map(|v| selection.remap(v)).collect();
                vocabulary = selection.vocabulary;
            }
            let features = spec.features.clone();
            if spec.model == ModelKind::Nb {
                let model = train_nb(&vectors, &train_labels, k, vocabulary.len(), spec.nb_alpha)?;
                Classifier::Nb { features, vocabulary, model }
            } else {
                let config = TrainConfig { seed: spec.seed, ..spec.maxent.clone() };
                let fit = train_maxent(&vectors, &train_labels, k, vocabulary.len(), &config)?;
                trace = fit.objectives;
                Classifier::Maxent { features, vocabulary, model: fit.model }
            }
        }
        ModelKind::Lstm | ModelKind::Bilstm => {
            let mut embeddings: EmbeddingTable<f64> = match spec.embeddings.as_ref().expect("validated") {
                EmbeddingSource::File(path) => EmbeddingTable::load_text(path)?,
                EmbeddingSource::TrainOnSplit => {
                    let sentences: Vec<Vec<String>> = train_docs.iter().map(|(_, t)| t.clone()).collect();
                    let config = W2vConfig {
                        seed: spec.seed,
                        dim: spec.network.embedding_dim,
                        ..spec.word2vec.clone()
                    };
                    train_word2vec(&sentences, &config)?
                }
            };
            let config = NetworkConfig {
                seed: spec.seed,
                embedding_dim: embeddings.dim(),
                ..spec.network.clone()
            };
            let data: Vec<(Vec<String>, usize)> = train_docs
                .iter()
                .zip(&train_labels)
                .filter(|((_, t), _)| !t.is_empty())
                .map(|((_, t), &y)| (t.clone(), y))
                .collect();
            let direction = spec.model.direction().expect("recurrent");
            let fit = train_network_on_tokens(&data, &mut embeddings, k, &config, direction)?;
            trace = fit.loss_trace;
            Classifier::Recurrent {
                embeddings,
                network: fit.classifier,
            }
        }
    };
    let model = TrainedModel {
        version: TRAINED_MODEL_VERSION,
        task,
        model: spec.model,
        stopwords: stopwords.clone(),
        classifier,
    };

    Ok((model, trace))
}

/// Runs one experiment end to end. Deterministic given `spec.seed`.
pub fn run_experiment(spec: &ExperimentSpec, corpus: &Corpus, stopwords: &StopwordList) -> Result<ExperimentOutcome> {
    spec.validate()?;
    if spec.needs_annotations() && corpus.annotations().is_none() {
        return Err(Error::invalid("dep/pos features need an annotation file"));
    }
    let task = spec.task;
    let k = task.num_classes();
    let labeled = corpus.labeled_for(task);
    if labeled.len() < 2 {
        return Err(Error::invalid(format!("fewer than two records labeled for {task}")));
    }
    let (train, test) = split_train_test(&labeled, spec.split_ratio, spec.seed)?;
    let (model, trace) = train_model(spec, &train, stopwords)?;

    let mut gold = Vec::with_capacity(test.len());
    let mut predicted = Vec::with_capacity(test.len());
    let mut flagged = 0;
    for r in test.records() {
        let p = model.predict_record(&test, r)?;
        flagged += usize::from(p.flagged);
        gold.push(task.label_of(r).expect("labeled subset"));
        predicted.push(p.class);
    }
    let report = metrics(&confusion(&gold, &predicted, k)?, &task.class_names())?;
    let row = format_row(spec.model.display_name(), &spec.features_label(), &report.averaged(spec.averaging));
    Ok(ExperimentOutcome {
        summary: ExperimentSummary {
            task,
            model: spec.model.display_name().to_string(),
            features: spec.features_label(),
            seed: spec.seed,
            train_size: train.len(),
            test_size: test.len(),
            flagged,
            metrics: report,
        },
        model,
        row,
        trace,
    })
}
