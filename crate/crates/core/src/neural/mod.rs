//! A small recurrent-network engine written against plain `f64` buffers.
//!
//! Both models here ([`RnnLM`] and [`Seq2Seq`]) use two stacked LSTM layers
//! and train by cross-entropy with manual backpropagation through time, the
//! adaptive-moment optimizer in [`optim`], and global gradient-norm clipping.
//! Analytic gradients are checked against finite differences in
//! [`gradcheck`]. Models serialize to a self-describing binary format in
//! [`checkpoint`].

pub mod checkpoint;
pub mod gradcheck;
pub mod layers;
pub mod lm;
pub mod matrix;
pub mod optim;
pub mod sample;
pub mod seq2seq;

use thiserror::Error;

pub use checkpoint::{load_checkpoint, load_lm, load_seq2seq, save_checkpoint, Checkpoint, CheckpointError};
pub use lm::{lm_forward, lm_train, RnnLM};
pub use matrix::Matrix;
pub use sample::sample_categorical;
pub use seq2seq::{seq2seq_train, Seq2Seq};

pub const DEFAULT_HIDDEN: usize = 256;
pub const NUM_LAYERS: usize = 2;

#[derive(Debug, Error, PartialEq)]
pub enum NeuralError {
    #[error("token id {id} out of range for vocabulary of {vocab}")]
    TokenOutOfRange { id: usize, vocab: usize },
    #[error("training set is empty")]
    EmptyCorpus,
    #[error("sequence {index} has length {len}, need at least 2")]
    ShortSequence { index: usize, len: usize },
    #[error("distribution sums to {0}, expected 1")]
    NotNormalized(f64),
    #[error("temperature must be positive, got {0}")]
    Temperature(f64),
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Access to a model's parameter tensors in a fixed order.
///
/// Gradients are stored in a value of the same type (see
/// [`Parameters::zeros_like`]), so optimizer state and gradients line up
/// with parameters by position.
pub trait Parameters {
    fn named_tensors(&self) -> Vec<(String, &Matrix)>;
    fn tensors_mut(&mut self) -> Vec<&mut Matrix>;
    fn zeros_like(&self) -> Self;

    fn tensors(&self) -> Vec<&Matrix> {
        self.named_tensors().into_iter().map(|(_, t)| t).collect()
    }

    fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.data().len()).sum()
    }
}

/// Optimizer and schedule settings shared by both models.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Truncation window for backpropagation through time (language model only).
    pub bptt_window: usize,
    pub epochs: usize,
    pub gradient_clip_norm: f64,
    pub rng_seed: u64,
}

impl TrainConfig {
    pub fn new(rng_seed: u64) -> Self {
        TrainConfig {
            learning_rate: 2e-3,
            batch_size: 8,
            bptt_window: 64,
            epochs: 50,
            gradient_clip_norm: 5.0,
            rng_seed,
        }
    }

    pub fn validate(&self) -> Result<(), NeuralError> {
        let bad = |what: &str| Err(NeuralError::Config(format!("{what} must be positive")));
        if self.learning_rate < 0.0 || !self.learning_rate.is_finite() {
            return bad("learning_rate");
        }
        if self.batch_size == 0 {
            return bad("batch_size");
        }
        if self.bptt_window == 0 {
            return bad("bptt_window");
        }
        if self.gradient_clip_norm <= 0.0 {
            return bad("gradient_clip_norm");
        }
        Ok(())
    }
}

/// Mean cross-entropy (nats per predicted token) for each epoch.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingLog {
    pub epoch_losses: Vec<f64>,
}

impl TrainingLog {
    pub fn final_loss(&self) -> Option<f64> {
        self.epoch_losses.last().copied()
    }
}
