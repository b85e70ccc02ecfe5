//! Two-layer LSTM language model over integer tokens.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layers::{Embedding, Linear, LstmStack, StackState};
use super::matrix::{softmax, Matrix};
use super::optim::{clip_global_norm, scale_all, Adam};
use super::{NeuralError, Parameters, TrainConfig, TrainingLog, NUM_LAYERS};

#[derive(Clone, Debug, PartialEq)]
pub struct RnnLM {
    pub embed: Embedding,
    pub stack: LstmStack,
    pub proj: Linear,
    pub temperature: f64,
}

impl RnnLM {
    /// Randomly initialized model; the embedding width equals `hidden_dim`.
    pub fn new(vocab_size: usize, hidden_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        RnnLM {
            embed: Embedding::new(vocab_size, hidden_dim, &mut rng),
            stack: LstmStack::new(hidden_dim, hidden_dim, NUM_LAYERS, &mut rng),
            proj: Linear::new(hidden_dim, vocab_size, &mut rng),
            temperature: 1.0,
        }
    }

    pub fn zeros(vocab_size: usize, hidden_dim: usize) -> Self {
        let stack = LstmStack::new(hidden_dim, hidden_dim, NUM_LAYERS, &mut ChaCha8Rng::seed_from_u64(0));
        RnnLM {
            embed: Embedding::zeros(vocab_size, hidden_dim),
            stack: stack.zeros_like(),
            proj: Linear::zeros(hidden_dim, vocab_size),
            temperature: 1.0,
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.embed.vocab()
    }

    pub fn hidden_dim(&self) -> usize {
        self.stack.hidden_dim()
    }

    pub fn zero_state(&self) -> StackState {
        self.stack.zero_state()
    }

    fn check_token(&self, id: usize) -> Result<(), NeuralError> {
        if id >= self.vocab_size() {
            return Err(NeuralError::TokenOutOfRange { id, vocab: self.vocab_size() });
        }
        Ok(())
    }

    /// Feeds one token and returns the next-token distribution.
    pub fn step(&self, token: usize, state: &mut StackState) -> Result<Vec<f64>, NeuralError> {
        self.check_token(token)?;
        let h = self.stack.step(&self.embed.forward(token), state);
        Ok(softmax(&self.proj.forward(&h)))
    }

    /// Summed cross-entropy of predicting `seq[1..]` from `seq[..n-1]`, with
    /// gradients accumulated into `grads`. Backpropagation is truncated every
    /// `window` steps; the state still flows forward across windows.
    pub fn loss_and_grad(&self, seq: &[usize], window: usize, grads: &mut RnnLM) -> f64 {
        let inputs = &seq[..seq.len() - 1];
        let targets = &seq[1..];
        let mut state = self.zero_state();
        let mut loss = 0.0;
        for start in (0..inputs.len()).step_by(window.max(1)) {
            let end = (start + window).min(inputs.len());
            let xs: Vec<Vec<f64>> = inputs[start..end].iter().map(|&t| self.embed.forward(t)).collect();
            let tape = self.stack.forward_seq(&xs, &mut state, 0.0, None);
            let mut d_outputs = Vec::with_capacity(xs.len());
            for (t, &target) in targets[start..end].iter().enumerate() {
                let h = tape.output(t);
                let mut probs = softmax(&self.proj.forward(h));
                loss -= probs[target].max(f64::MIN_POSITIVE).ln();
                probs[target] -= 1.0;
                d_outputs.push(self.proj.backward(h, &probs, &mut grads.proj));
            }
            let d_final = self.zero_state();
            let (d_inputs, _) = self.stack.backward_seq(&tape, &d_outputs, d_final, &mut grads.stack);
            for (&token, d) in inputs[start..end].iter().zip(&d_inputs) {
                self.embed.backward(token, d, &mut grads.embed);
            }
        }
        loss
    }

    /// Summed cross-entropy without gradients.
    pub fn sequence_loss(&self, seq: &[usize]) -> Result<f64, NeuralError> {
        let mut state = self.zero_state();
        let mut loss = 0.0;
        for w in seq.windows(2) {
            let probs = self.step(w[0], &mut state)?;
            self.check_token(w[1])?;
            loss -= probs[w[1]].max(f64::MIN_POSITIVE).ln();
        }
        Ok(loss)
    }
}

impl Parameters for RnnLM {
    fn named_tensors(&self) -> Vec<(String, &Matrix)> {
        let mut out = vec![("embed.weight".to_string(), &self.embed.weight)];
        for (l, layer) in self.stack.layers.iter().enumerate() {
            out.push((format!("layer{l}.weight"), &layer.weight));
            out.push((format!("layer{l}.bias"), &layer.bias));
        }
        out.push(("proj.weight".into(), &self.proj.weight));
        out.push(("proj.bias".into(), &self.proj.bias));
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out = vec![&mut self.embed.weight];
        for layer in &mut self.stack.layers {
            out.push(&mut layer.weight);
            out.push(&mut layer.bias);
        }
        out.push(&mut self.proj.weight);
        out.push(&mut self.proj.bias);
        out
    }

    fn zeros_like(&self) -> Self {
        RnnLM {
            embed: Embedding::zeros(self.vocab_size(), self.embed.dim()),
            stack: self.stack.zeros_like(),
            proj: Linear::zeros(self.proj.input_dim(), self.proj.output_dim()),
            temperature: self.temperature,
        }
    }
}

/// Per-step next-token distributions for `token_ids`, starting from `initial_state`
/// (zero state when `None`), plus the final state.
pub fn lm_forward(
    model: &RnnLM,
    token_ids: &[usize],
    initial_state: Option<StackState>,
) -> Result<(Vec<Vec<f64>>, StackState), NeuralError> {
    let mut state = initial_state.unwrap_or_else(|| model.zero_state());
    let mut dists = Vec::with_capacity(token_ids.len());
    for &t in token_ids {
        dists.push(model.step(t, &mut state)?);
    }
    Ok((dists, state))
}

/// Trains the model on `sequences`; returns mean cross-entropy per epoch.
///
/// Each epoch visits the sequences in a seeded random order, one optimizer
/// step per batch, with gradients averaged over the batch's tokens.
pub fn lm_train(
    model: &mut RnnLM,
    sequences: &[Vec<usize>],
    cfg: &TrainConfig,
) -> Result<TrainingLog, NeuralError> {
    lm_train_with(model, sequences, cfg, |_, _| {})
}

/// [`lm_train`] with a callback run after every epoch.
pub fn lm_train_with(
    model: &mut RnnLM,
    sequences: &[Vec<usize>],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(usize, &RnnLM),
) -> Result<TrainingLog, NeuralError> {
    cfg.validate()?;
    if sequences.is_empty() {
        return Err(NeuralError::EmptyCorpus);
    }
    for (index, seq) in sequences.iter().enumerate() {
        if seq.len() < 2 {
            return Err(NeuralError::ShortSequence { index, len: seq.len() });
        }
        for &id in seq {
            model.check_token(id)?;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut adam = Adam::new(model, cfg.learning_rate);
    let mut order: Vec<usize> = (0..sequences.len()).collect();
    let mut log = TrainingLog::default();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut epoch_tokens = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            let mut grads = model.zeros_like();
            let mut tokens = 0;
            for &i in batch {
                epoch_loss += model.loss_and_grad(&sequences[i], cfg.bptt_window, &mut grads);
                tokens += sequences[i].len() - 1;
            }
            epoch_tokens += tokens;
            scale_all(&mut grads, 1.0 / tokens as f64);
            clip_global_norm(&mut grads, cfg.gradient_clip_norm);
            adam.step(model, &grads);
        }
        log.epoch_losses.push(epoch_loss / epoch_tokens as f64);
        on_epoch(epoch, model);
    }
    Ok(log)
}
