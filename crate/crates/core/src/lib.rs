//! Sentiment and topic classification of student feedback: corpus handling,
//! preprocessing, n-gram features, Naive Bayes, maximum entropy, word2vec,
//! LSTM / Bi-LSTM classifiers, evaluation and semester reports.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the common `f64` instantiations.

pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod features;
pub mod maxent;
pub mod naive_bayes;
pub mod pipeline;
pub mod preprocess;
pub mod recurrent;
pub mod report;
pub mod scalar;
pub mod synth;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type NbModel64 = naive_bayes::NbModel<f64>;
pub type NbModel32 = naive_bayes::NbModel<f32>;
pub type MaxentModel64 = maxent::MaxentModel<f64>;
pub type MaxentModel32 = maxent::MaxentModel<f32>;
pub type EmbeddingTable64 = embeddings::EmbeddingTable<f64>;
pub type EmbeddingTable32 = embeddings::EmbeddingTable<f32>;
pub type SequenceClassifier64 = recurrent::SequenceClassifier<f64>;
pub type SequenceClassifier32 = recurrent::SequenceClassifier<f32>;
pub type TrainedModel64 = pipeline::TrainedModel<f64>;
