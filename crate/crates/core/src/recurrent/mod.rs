//! LSTM and Bi-LSTM sequence classification.

mod cell;
mod network;

pub use cell::{lstm_step, GateParams, LstmParams, LstmState};
pub use network::{
    backward_sequence, forward_sequence, predict_sequence, train_network,
    train_network_on_tokens, Direction, ForwardCache, Gradients, NetworkConfig, NetworkParams,
    SequenceClassifier, SequencePrediction, TrainedNetwork, NETWORK_MODEL_VERSION,
};
