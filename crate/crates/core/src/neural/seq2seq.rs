//! Encoder/decoder pair of two-layer LSTM stacks.
//!
//! The encoder reads the source (reversed by default) and hands its final
//! hidden and cell states to the decoder as the initial state. There is no
//! attention. Training uses teacher forcing; inference decodes greedily.

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layers::{Embedding, Linear, LstmStack, StackState};
use super::matrix::{argmax, softmax, Matrix};
use super::optim::{clip_global_norm, scale_all, Adam};
use super::{NeuralError, Parameters, TrainConfig, TrainingLog, NUM_LAYERS};

pub const ENCODER_DROPOUT: f64 = 0.5;
pub const DECODER_DROPOUT: f64 = 0.0;

#[derive(Clone, Debug, PartialEq)]
pub struct Seq2SeqConfig {
    pub source_vocab_size: usize,
    pub target_vocab_size: usize,
    pub hidden_dim: usize,
    /// Dropout on the encoder's non-recurrent connections while training.
    pub encoder_dropout_rate: f64,
    pub decoder_dropout_rate: f64,
    pub reverse_source: bool,
}

impl Seq2SeqConfig {
    pub fn new(source_vocab_size: usize, target_vocab_size: usize, hidden_dim: usize) -> Self {
        Seq2SeqConfig {
            source_vocab_size,
            target_vocab_size,
            hidden_dim,
            encoder_dropout_rate: ENCODER_DROPOUT,
            decoder_dropout_rate: DECODER_DROPOUT,
            reverse_source: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Seq2Seq {
    pub src_embed: Embedding,
    pub tgt_embed: Embedding,
    pub encoder: LstmStack,
    pub decoder: LstmStack,
    pub proj: Linear,
    pub encoder_dropout_rate: f64,
    pub decoder_dropout_rate: f64,
    pub reverse_source: bool,
}

fn check_rate(rate: f64) -> Result<(), NeuralError> {
    if (0.0..1.0).contains(&rate) {
        Ok(())
    } else {
        Err(NeuralError::Config(format!("dropout rate {rate} outside [0, 1)")))
    }
}

impl Seq2Seq {
    pub fn new(cfg: &Seq2SeqConfig, seed: u64) -> Result<Self, NeuralError> {
        check_rate(cfg.encoder_dropout_rate)?;
        check_rate(cfg.decoder_dropout_rate)?;
        if cfg.hidden_dim == 0 || cfg.source_vocab_size == 0 || cfg.target_vocab_size == 0 {
            return Err(NeuralError::Config("dimensions must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = cfg.hidden_dim;
        Ok(Seq2Seq {
            src_embed: Embedding::new(cfg.source_vocab_size, h, &mut rng),
            tgt_embed: Embedding::new(cfg.target_vocab_size, h, &mut rng),
            encoder: LstmStack::new(h, h, NUM_LAYERS, &mut rng),
            decoder: LstmStack::new(h, h, NUM_LAYERS, &mut rng),
            proj: Linear::new(h, cfg.target_vocab_size, &mut rng),
            encoder_dropout_rate: cfg.encoder_dropout_rate,
            decoder_dropout_rate: cfg.decoder_dropout_rate,
            reverse_source: cfg.reverse_source,
        })
    }

    pub fn source_vocab_size(&self) -> usize {
        self.src_embed.vocab()
    }

    pub fn target_vocab_size(&self) -> usize {
        self.tgt_embed.vocab()
    }

    pub fn hidden_dim(&self) -> usize {
        self.encoder.hidden_dim()
    }

    fn check_source(&self, src: &[usize]) -> Result<(), NeuralError> {
        let vocab = self.source_vocab_size();
        match src.iter().find(|&&id| id >= vocab) {
            Some(&id) => Err(NeuralError::TokenOutOfRange { id, vocab }),
            None => Ok(()),
        }
    }

    fn check_target(&self, tgt: &[usize]) -> Result<(), NeuralError> {
        let vocab = self.target_vocab_size();
        match tgt.iter().find(|&&id| id >= vocab) {
            Some(&id) => Err(NeuralError::TokenOutOfRange { id, vocab }),
            None => Ok(()),
        }
    }

    fn source_order(&self, src: &[usize]) -> Vec<usize> {
        let mut order = src.to_vec();
        if self.reverse_source {
            order.reverse();
        }
        order
    }

    /// Final encoder state for `src`, without dropout.
    pub fn encode(&self, src: &[usize]) -> Result<StackState, NeuralError> {
        self.check_source(src)?;
        let mut state = self.encoder.zero_state();
        for t in self.source_order(src) {
            self.encoder.step(&self.src_embed.forward(t), &mut state);
        }
        Ok(state)
    }

    /// Greedy decode from `start` until `end` or `max_len` emitted tokens.
    /// The returned sequence excludes both sentinels.
    pub fn greedy_decode(
        &self,
        src: &[usize],
        start: usize,
        end: usize,
        max_len: usize,
    ) -> Result<Vec<usize>, NeuralError> {
        self.check_target(&[start, end])?;
        let mut state = self.encode(src)?;
        let mut token = start;
        let mut out = Vec::new();
        for _ in 0..max_len {
            let h = self.decoder.step(&self.tgt_embed.forward(token), &mut state);
            token = argmax(&self.proj.forward(&h));
            if token == end {
                break;
            }
            out.push(token);
        }
        Ok(out)
    }

    /// Summed teacher-forced cross-entropy of `tgt[1..]` given `src` and
    /// `tgt[..n-1]`, accumulating gradients into `grads`. Dropout masks are
    /// drawn from `rng` when one is given; without it the pass is deterministic.
    pub fn loss_and_grad(
        &self,
        src: &[usize],
        tgt: &[usize],
        mut rng: Option<&mut dyn RngCore>,
        grads: &mut Seq2Seq,
    ) -> f64 {
        let src = self.source_order(src);
        let xs: Vec<Vec<f64>> = src.iter().map(|&t| self.src_embed.forward(t)).collect();
        let mut state = self.encoder.zero_state();
        let enc_tape = self.encoder.forward_seq(
            &xs,
            &mut state,
            self.encoder_dropout_rate,
            rng.as_mut().map(|r| &mut **r as &mut dyn RngCore),
        );

        let inputs = &tgt[..tgt.len() - 1];
        let ys: Vec<Vec<f64>> = inputs.iter().map(|&t| self.tgt_embed.forward(t)).collect();
        let dec_tape = self.decoder.forward_seq(&ys, &mut state, self.decoder_dropout_rate, rng);

        let mut loss = 0.0;
        let mut d_outputs = Vec::with_capacity(ys.len());
        for (t, &target) in tgt[1..].iter().enumerate() {
            let h = dec_tape.output(t);
            let mut probs = softmax(&self.proj.forward(h));
            loss -= probs[target].max(f64::MIN_POSITIVE).ln();
            probs[target] -= 1.0;
            d_outputs.push(self.proj.backward(h, &probs, &mut grads.proj));
        }
        let zero = self.decoder.zero_state();
        let (d_ys, d_handoff) = self.decoder.backward_seq(&dec_tape, &d_outputs, zero, &mut grads.decoder);
        for (&token, d) in inputs.iter().zip(&d_ys) {
            self.tgt_embed.backward(token, d, &mut grads.tgt_embed);
        }
        let (d_xs, _) = self.encoder.backward_seq(&enc_tape, &[], d_handoff, &mut grads.encoder);
        for (&token, d) in src.iter().zip(&d_xs) {
            self.src_embed.backward(token, d, &mut grads.src_embed);
        }
        loss
    }
}

impl Parameters for Seq2Seq {
    fn named_tensors(&self) -> Vec<(String, &Matrix)> {
        let mut out = vec![
            ("src_embed.weight".to_string(), &self.src_embed.weight),
            ("tgt_embed.weight".to_string(), &self.tgt_embed.weight),
        ];
        for (prefix, stack) in [("encoder", &self.encoder), ("decoder", &self.decoder)] {
            for (l, layer) in stack.layers.iter().enumerate() {
                out.push((format!("{prefix}.layer{l}.weight"), &layer.weight));
                out.push((format!("{prefix}.layer{l}.bias"), &layer.bias));
            }
        }
        out.push(("proj.weight".into(), &self.proj.weight));
        out.push(("proj.bias".into(), &self.proj.bias));
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out = vec![&mut self.src_embed.weight, &mut self.tgt_embed.weight];
        for layer in self.encoder.layers.iter_mut().chain(self.decoder.layers.iter_mut()) {
            out.push(&mut layer.weight);
            out.push(&mut layer.bias);
        }
        out.push(&mut self.proj.weight);
        out.push(&mut self.proj.bias);
        out
    }

    fn zeros_like(&self) -> Self {
        Seq2Seq {
            src_embed: Embedding::zeros(self.src_embed.vocab(), self.src_embed.dim()),
            tgt_embed: Embedding::zeros(self.tgt_embed.vocab(), self.tgt_embed.dim()),
            encoder: self.encoder.zeros_like(),
            decoder: self.decoder.zeros_like(),
            proj: Linear::zeros(self.proj.input_dim(), self.proj.output_dim()),
            ..*self
        }
    }
}

/// Trains on `(source, target)` pairs. Targets must already carry their
/// start and end sentinels.
pub fn seq2seq_train(
    model: &mut Seq2Seq,
    pairs: &[(Vec<usize>, Vec<usize>)],
    cfg: &TrainConfig,
) -> Result<TrainingLog, NeuralError> {
    seq2seq_train_with(model, pairs, cfg, |_, _| {})
}

/// [`seq2seq_train`] with a callback run after every epoch.
pub fn seq2seq_train_with(
    model: &mut Seq2Seq,
    pairs: &[(Vec<usize>, Vec<usize>)],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(usize, &Seq2Seq),
) -> Result<TrainingLog, NeuralError> {
    cfg.validate()?;
    if pairs.is_empty() {
        return Err(NeuralError::EmptyCorpus);
    }
    for (index, (src, tgt)) in pairs.iter().enumerate() {
        if tgt.len() < 2 {
            return Err(NeuralError::ShortSequence { index, len: tgt.len() });
        }
        model.check_source(src)?;
        model.check_target(tgt)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut adam = Adam::new(model, cfg.learning_rate);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut log = TrainingLog::default();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut epoch_tokens = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            let mut grads = model.zeros_like();
            let mut tokens = 0;
            for &i in batch {
                let (src, tgt) = &pairs[i];
                epoch_loss += model.loss_and_grad(src, tgt, Some(&mut rng), &mut grads);
                tokens += tgt.len() - 1;
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

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> Seq2Seq {
        Seq2Seq::new(&Seq2SeqConfig::new(6, 7, 12), seed).unwrap()
    }

    #[test]
    fn handoff_dimensions_match() {
        let m = small(1);
        let state = m.encode(&[1, 2, 3]).unwrap();
        assert_eq!(state.h.len(), NUM_LAYERS);
        assert_eq!(state.h[0].len(), m.decoder.hidden_dim());
    }

    #[test]
    fn rejects_full_dropout() {
        let cfg = Seq2SeqConfig { decoder_dropout_rate: 1.0, ..Seq2SeqConfig::new(4, 4, 4) };
        assert!(Seq2Seq::new(&cfg, 0).is_err());
    }

    #[test]
    fn evaluation_is_deterministic() {
        let m = small(2);
        let a = m.greedy_decode(&[1, 2, 3], 5, 6, 10).unwrap();
        let b = m.greedy_decode(&[1, 2, 3], 5, 6, 10).unwrap();
        assert_eq!(a, b);
        assert!(a.len() <= 10);
    }

    #[test]
    fn empty_pairs_rejected() {
        let mut m = small(3);
        assert_eq!(
            seq2seq_train(&mut m, &[], &TrainConfig::new(1)).unwrap_err(),
            NeuralError::EmptyCorpus
        );
    }

    #[test]
    fn memorizes_one_pair() {
        let mut m = small(4);
        let src = vec![1, 4, 2, 0];
        let tgt = vec![5, 3, 3, 1, 2, 4, 6];
        let cfg = TrainConfig { learning_rate: 1e-2, batch_size: 1, epochs: 120, ..TrainConfig::new(9) };
        seq2seq_train(&mut m, &[(src.clone(), tgt.clone())], &cfg).unwrap();
        assert_eq!(m.greedy_decode(&src, 5, 6, 20).unwrap(), &tgt[1..tgt.len() - 1]);
    }

    #[test]
    fn dropout_only_while_training() {
        let m = small(5);
        let mut g1 = m.zeros_like();
        let mut g2 = m.zeros_like();
        let mut r1 = ChaCha8Rng::seed_from_u64(1);
        let mut r2 = ChaCha8Rng::seed_from_u64(2);
        let l1 = m.loss_and_grad(&[1, 2], &[5, 1, 6], Some(&mut r1), &mut g1);
        let l2 = m.loss_and_grad(&[1, 2], &[5, 1, 6], Some(&mut r2), &mut g2);
        assert_ne!(l1, l2);
        let e1 = m.loss_and_grad(&[1, 2], &[5, 1, 6], None, &mut g1);
        let e2 = m.loss_and_grad(&[1, 2], &[5, 1, 6], None, &mut g2);
        assert_eq!(e1, e2);
    }
}
