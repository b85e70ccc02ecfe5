//! Binary checkpoint format.
//!
//! ```text
//! "SSNN"  version:u16  kind:u8  (0 = RnnLM, 1 = Seq2Seq)
//! repeated until end of input:
//!     name_len:u16  name:utf8  rank:u8  dims:u32 * rank  payload:f64 * prod(dims)
//! ```
//!
//! Integers and floats are little-endian; payloads are row-major. Weight
//! matrices are rank 2; scalar settings (temperature, dropout rates) are
//! rank-0 tensors under a `meta.` prefix.

use std::collections::BTreeMap;

use thiserror::Error;

use super::layers::{Embedding, Linear, LstmLayer, LstmStack};
use super::lm::RnnLM;
use super::matrix::Matrix;
use super::seq2seq::Seq2Seq;
use super::{Parameters, NUM_LAYERS};

pub const MAGIC: &[u8; 4] = b"SSNN";
pub const FORMAT_VERSION: u16 = 1;
pub const KIND_LM: u8 = 0;
pub const KIND_SEQ2SEQ: u8 = 1;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CheckpointError {
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported format version {0}")]
    Version(u16),
    #[error("unknown model kind {0}")]
    Kind(u8),
    #[error("checkpoint truncated at byte {0}")]
    Truncated(usize),
    #[error("tensor name is not UTF-8")]
    BadName,
    #[error("missing tensor {0}")]
    MissingTensor(String),
    #[error("unexpected tensor {0}")]
    UnexpectedTensor(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("expected a {expected} checkpoint")]
    WrongKind { expected: &'static str },
}

#[derive(Clone, Debug, PartialEq)]
pub enum Checkpoint {
    Lm(RnnLM),
    Seq2Seq(Seq2Seq),
}

struct Tensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

fn write_tensor(out: &mut Vec<u8>, name: &str, dims: &[usize], data: &[f64]) {
    out.extend_from_slice(&(name.len() as u16).to_le_bytes());
    out.extend_from_slice(name.as_bytes());
    out.push(dims.len() as u8);
    for &d in dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn write_params(out: &mut Vec<u8>, model: &impl Parameters) {
    for (name, m) in model.named_tensors() {
        write_tensor(out, &name, &[m.rows(), m.cols()], m.data());
    }
}

/// Serializes a model. `load_checkpoint(&save_checkpoint(m))` reproduces `m` bit-exactly.
pub fn save_checkpoint(model: &Checkpoint) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    match model {
        Checkpoint::Lm(lm) => {
            out.push(KIND_LM);
            write_params(&mut out, lm);
            write_tensor(&mut out, "meta.temperature", &[], &[lm.temperature]);
        }
        Checkpoint::Seq2Seq(s) => {
            out.push(KIND_SEQ2SEQ);
            write_params(&mut out, s);
            write_tensor(&mut out, "meta.encoder_dropout_rate", &[], &[s.encoder_dropout_rate]);
            write_tensor(&mut out, "meta.decoder_dropout_rate", &[], &[s.decoder_dropout_rate]);
            let reverse = if s.reverse_source { 1.0 } else { 0.0 };
            write_tensor(&mut out, "meta.reverse_source", &[], &[reverse]);
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or(CheckpointError::Truncated(self.bytes.len()))?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8, CheckpointError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, CheckpointError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn done(&self) -> bool {
        self.pos == self.bytes.len()
    }
}

fn read_tensors(r: &mut Reader<'_>) -> Result<BTreeMap<String, Tensor>, CheckpointError> {
    let mut tensors = BTreeMap::new();
    while !r.done() {
        let len = r.u16()? as usize;
        let name = std::str::from_utf8(r.take(len)?).map_err(|_| CheckpointError::BadName)?;
        let rank = r.u8()? as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(r.u32()? as usize);
        }
        let count = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
        let bytes = count
            .and_then(|c| c.checked_mul(8))
            .ok_or_else(|| CheckpointError::Dimension(format!("{name} is too large")))?;
        let payload = r.take(bytes)?;
        let data = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        if tensors.insert(name.to_string(), Tensor { dims, data }).is_some() {
            return Err(CheckpointError::Dimension(format!("duplicate tensor {name}")));
        }
    }
    Ok(tensors)
}

struct TensorSet(BTreeMap<String, Tensor>);

impl TensorSet {
    fn matrix(&mut self, name: &str) -> Result<Matrix, CheckpointError> {
        let t = self.0.remove(name).ok_or_else(|| CheckpointError::MissingTensor(name.into()))?;
        match t.dims[..] {
            [rows, cols] => Ok(Matrix::from_vec(rows, cols, t.data)),
            _ => Err(CheckpointError::Dimension(format!("{name} must be rank 2"))),
        }
    }

    fn scalar(&mut self, name: &str) -> Result<f64, CheckpointError> {
        let t = self.0.remove(name).ok_or_else(|| CheckpointError::MissingTensor(name.into()))?;
        if !t.dims.is_empty() {
            return Err(CheckpointError::Dimension(format!("{name} must be a scalar")));
        }
        Ok(t.data[0])
    }

    fn stack(&mut self, prefix: &str) -> Result<LstmStack, CheckpointError> {
        let mut layers = Vec::with_capacity(NUM_LAYERS);
        for l in 0..NUM_LAYERS {
            let name = format!("{prefix}layer{l}");
            let weight = self.matrix(&format!("{name}.weight"))?;
            let bias = self.matrix(&format!("{name}.bias"))?;
            let layer = LstmLayer::from_parts(weight, bias)
                .ok_or_else(|| CheckpointError::Dimension(format!("{name} has inconsistent shapes")))?;
            layers.push(layer);
        }
        let hidden = layers[0].hidden_dim();
        if layers[1].hidden_dim() != hidden || layers[1].input_dim() != hidden {
            return Err(CheckpointError::Dimension(format!("{prefix}layers disagree on width")));
        }
        Ok(LstmStack { layers })
    }

    fn finish(self) -> Result<(), CheckpointError> {
        match self.0.into_keys().next() {
            Some(name) => Err(CheckpointError::UnexpectedTensor(name)),
            None => Ok(()),
        }
    }
}

fn dim_check(ok: bool, what: &str) -> Result<(), CheckpointError> {
    if ok {
        Ok(())
    } else {
        Err(CheckpointError::Dimension(what.into()))
    }
}

/// Parses a checkpoint. Never returns a partially built model.
pub fn load_checkpoint(bytes: &[u8]) -> Result<Checkpoint, CheckpointError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4).map_err(|_| CheckpointError::BadMagic)? != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = r.u16()?;
    if version != FORMAT_VERSION {
        return Err(CheckpointError::Version(version));
    }
    let kind = r.u8()?;
    if kind > KIND_SEQ2SEQ {
        return Err(CheckpointError::Kind(kind));
    }
    let mut set = TensorSet(read_tensors(&mut r)?);
    let model = if kind == KIND_LM {
        let embed = Embedding { weight: set.matrix("embed.weight")? };
        let stack = set.stack("")?;
        let proj = Linear { weight: set.matrix("proj.weight")?, bias: set.matrix("proj.bias")? };
        let temperature = set.scalar("meta.temperature")?;
        let (v, h) = embed.weight.shape();
        dim_check(stack.input_dim() == h, "embedding width != layer input")?;
        dim_check(proj.weight.shape() == (v, stack.hidden_dim()), "projection shape")?;
        dim_check(proj.bias.shape() == (1, v), "projection bias shape")?;
        Checkpoint::Lm(RnnLM { embed, stack, proj, temperature })
    } else {
        let src_embed = Embedding { weight: set.matrix("src_embed.weight")? };
        let tgt_embed = Embedding { weight: set.matrix("tgt_embed.weight")? };
        let encoder = set.stack("encoder.")?;
        let decoder = set.stack("decoder.")?;
        let proj = Linear { weight: set.matrix("proj.weight")?, bias: set.matrix("proj.bias")? };
        let encoder_dropout_rate = set.scalar("meta.encoder_dropout_rate")?;
        let decoder_dropout_rate = set.scalar("meta.decoder_dropout_rate")?;
        let reverse_source = set.scalar("meta.reverse_source")? != 0.0;
        let h = encoder.hidden_dim();
        dim_check(decoder.hidden_dim() == h, "encoder/decoder width")?;
        dim_check(src_embed.dim() == encoder.input_dim(), "source embedding width")?;
        dim_check(tgt_embed.dim() == decoder.input_dim(), "target embedding width")?;
        let v = tgt_embed.vocab();
        dim_check(proj.weight.shape() == (v, h), "projection shape")?;
        dim_check(proj.bias.shape() == (1, v), "projection bias shape")?;
        Checkpoint::Seq2Seq(Seq2Seq {
            src_embed,
            tgt_embed,
            encoder,
            decoder,
            proj,
            encoder_dropout_rate,
            decoder_dropout_rate,
            reverse_source,
        })
    };
    set.finish()?;
    Ok(model)
}

/// Loads a language model whose vocabulary must have `expected_vocab` tokens.
pub fn load_lm(bytes: &[u8], expected_vocab: usize) -> Result<RnnLM, CheckpointError> {
    match load_checkpoint(bytes)? {
        Checkpoint::Lm(lm) if lm.vocab_size() == expected_vocab => Ok(lm),
        Checkpoint::Lm(lm) => Err(CheckpointError::Dimension(format!(
            "vocabulary has {} tokens, expected {expected_vocab}",
            lm.vocab_size()
        ))),
        Checkpoint::Seq2Seq(_) => Err(CheckpointError::WrongKind { expected: "language model" }),
    }
}

/// Loads a Seq2Seq model with the given (source, target) vocabulary sizes.
pub fn load_seq2seq(bytes: &[u8], expected_vocabs: (usize, usize)) -> Result<Seq2Seq, CheckpointError> {
    match load_checkpoint(bytes)? {
        Checkpoint::Seq2Seq(s) if (s.source_vocab_size(), s.target_vocab_size()) == expected_vocabs => Ok(s),
        Checkpoint::Seq2Seq(s) => Err(CheckpointError::Dimension(format!(
            "vocabularies are {}/{}, expected {}/{}",
            s.source_vocab_size(),
            s.target_vocab_size(),
            expected_vocabs.0,
            expected_vocabs.1
        ))),
        Checkpoint::Lm(_) => Err(CheckpointError::WrongKind { expected: "seq2seq" }),
    }
}
