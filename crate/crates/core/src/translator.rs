//! Path-to-object-sequence translation.
//!
//! Object bodies are lexed into PDF tokens and mapped onto a
//! frequency-capped vocabulary. A [`Seq2Seq`] model learns to map a seed's
//! compressed execution path to that token sequence; decoding a generated
//! path and reassembling the objects yields a new seed file.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use crate::neural::seq2seq::Seq2SeqConfig;
use crate::neural::{seq2seq_train, NeuralError, Seq2Seq, TrainConfig, TrainingLog};
use crate::pathcomp::{compress_single, CompressedPath, CompressionDictionary};
use crate::pathgen::{PathVocab, PATH_START};
use crate::pdf::{assemble_pdf, extract_objects, is_well_formed, lex, select_root, PdfObject};
use crate::trace::ExecutionPath;

pub const SEQ_START: usize = 0;
pub const SEQ_END: usize = 1;
pub const OBJ_SEP: usize = 2;
pub const UNK: usize = 3;
const RESERVED: usize = 4;
pub const MIN_VOCAB_BUDGET: usize = 8;

/// Source-side id for path tokens missing from the source vocabulary.
/// `PATH_START` never occurs inside a path, so its id is free for this.
pub const SOURCE_UNK: usize = PATH_START;

/// Text emitted for [`UNK`]: valid in any object position.
pub const UNK_TEXT: &[u8] = b"null";

#[derive(Debug, Error)]
pub enum TranslatorError {
    #[error("vocabulary budget {0} is below the minimum of {MIN_VOCAB_BUDGET}")]
    Budget(usize),
    #[error("token id {0} is not in the object vocabulary")]
    UnknownId(usize),
    #[error("vocabulary line {line}: {reason}")]
    VocabParse { line: usize, reason: String },
    #[error("parallel corpus is empty")]
    EmptyCorpus,
    #[error("malformed parallel corpus file {file}: {reason}")]
    CorpusParse { file: String, reason: String },
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Dense ids for object token strings, after the four reserved ids.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ObjectVocab {
    strings: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
}

impl ObjectVocab {
    /// Keeps the `budget` most frequent token strings of `bodies`; ties go
    /// to the bytewise-smaller string.
    pub fn build<B: AsRef<[u8]>>(bodies: &[B], budget: usize) -> Result<Self, TranslatorError> {
        if budget < MIN_VOCAB_BUDGET {
            return Err(TranslatorError::Budget(budget));
        }
        let mut counts: HashMap<&[u8], usize> = HashMap::new();
        for body in bodies {
            for t in lex(body.as_ref()) {
                *counts.entry(t).or_default() += 1;
            }
        }
        let mut ranked: Vec<(&[u8], usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        ranked.truncate(budget);
        Ok(Self::from_strings(ranked.into_iter().map(|(s, _)| s.to_vec()).collect()))
    }

    fn from_strings(strings: Vec<Vec<u8>>) -> Self {
        let index = strings.iter().enumerate().map(|(i, s)| (s.clone(), i + RESERVED)).collect();
        ObjectVocab { strings, index }
    }

    /// Model vocabulary size, reserved ids included.
    pub fn len(&self) -> usize {
        self.strings.len() + RESERVED
    }

    pub fn is_empty(&self) -> bool {
        self.strings.is_empty()
    }

    pub fn id(&self, token: &[u8]) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn string(&self, id: usize) -> Option<&[u8]> {
        id.checked_sub(RESERVED).and_then(|i| self.strings.get(i)).map(Vec::as_slice)
    }

    /// `SEQ_START`, the bodies' tokens separated by `OBJ_SEP`, `SEQ_END`.
    pub fn encode<B: AsRef<[u8]>>(&self, bodies: &[B]) -> Vec<usize> {
        let mut ids = vec![SEQ_START];
        for (i, body) in bodies.iter().enumerate() {
            if i > 0 {
                ids.push(OBJ_SEP);
            }
            ids.extend(lex(body.as_ref()).into_iter().map(|t| self.id(t)));
        }
        ids.push(SEQ_END);
        ids
    }

    /// One `<id>\t<escaped token>` line per non-reserved id.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, s) in self.strings.iter().enumerate() {
            let _ = writeln!(out, "{}\t{}", i + RESERVED, escape(s));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, TranslatorError> {
        let mut strings = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let err = |reason: &str| TranslatorError::VocabParse { line: n + 1, reason: reason.into() };
            let (id, tok) = line.split_once('\t').ok_or_else(|| err("expected `<id>\\t<token>`"))?;
            if id.parse::<usize>().ok() != Some(n + RESERVED) {
                return Err(err("ids must be dense and start at 4"));
            }
            strings.push(unescape(tok).ok_or_else(|| err("bad escape"))?);
        }
        let vocab = Self::from_strings(strings);
        if vocab.index.len() != vocab.strings.len() {
            return Err(TranslatorError::VocabParse { line: 0, reason: "duplicate token".into() });
        }
        Ok(vocab)
    }
}

/// Printable ASCII stays as is except `\`; everything else becomes `\xHH`.
fn escape(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(bytes.len());
    for &b in bytes {
        match b {
            b'\\' => out.push_str("\\\\"),
            0x21..=0x7e => out.push(b as char),
            _ => {
                let _ = write!(out, "\\x{b:02x}");
            }
        }
    }
    out
}

fn unescape(text: &str) -> Option<Vec<u8>> {
    let bytes = text.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] != b'\\' {
            out.push(bytes[i]);
            i += 1;
            continue;
        }
        match bytes.get(i + 1)? {
            b'\\' => {
                out.push(b'\\');
                i += 2;
            }
            b'x' => {
                let hex = std::str::from_utf8(bytes.get(i + 2..i + 4)?).ok()?;
                out.push(u8::from_str_radix(hex, 16).ok()?);
                i += 4;
            }
            _ => return None,
        }
    }
    Some(out)
}

/// Lexes and encodes `objects` with a vocabulary built from them.
pub fn tokenize_objects(
    objects: &[PdfObject],
    vocab_budget: usize,
) -> Result<(Vec<usize>, ObjectVocab), TranslatorError> {
    let bodies: Vec<&[u8]> = objects.iter().map(|o| o.body.as_slice()).collect();
    let vocab = ObjectVocab::build(&bodies, vocab_budget)?;
    Ok((vocab.encode(&bodies), vocab))
}

/// Splits on `OBJ_SEP` and joins each segment's token strings with single
/// spaces. Start and end markers are skipped; empty segments are dropped.
pub fn detokenize_objects(ids: &[usize], vocab: &ObjectVocab) -> Result<Vec<Vec<u8>>, TranslatorError> {
    let mut bodies = Vec::new();
    let mut current: Vec<u8> = Vec::new();
    let mut flush = |current: &mut Vec<u8>| {
        if !current.is_empty() {
            bodies.push(std::mem::take(current));
        }
    };
    for &id in ids {
        let text = match id {
            SEQ_START | SEQ_END => continue,
            OBJ_SEP => {
                flush(&mut current);
                continue;
            }
            UNK => UNK_TEXT,
            _ => vocab.string(id).ok_or(TranslatorError::UnknownId(id))?,
        };
        if !current.is_empty() {
            current.push(b' ');
        }
        current.extend_from_slice(text);
    }
    flush(&mut current);
    Ok(bodies)
}

/// A body's lexical tokens joined by single spaces; equality of normalized
/// bodies is equality modulo whitespace.
pub fn normalize_body(body: &[u8]) -> Vec<u8> {
    lex(body).join(&b' ')
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParallelPair {
    /// Seed file name the pair was built from.
    pub name: String,
    pub source: Vec<usize>,
    pub target: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParallelCorpus {
    pub pairs: Vec<ParallelPair>,
    pub source_vocab: PathVocab,
    pub object_vocab: ObjectVocab,
    /// Seeds dropped because no object could be extracted.
    pub dropped_empty: usize,
    /// Seeds without a recorded path.
    pub unmatched: Vec<String>,
}

impl ParallelCorpus {
    pub fn training_pairs(&self) -> Vec<(Vec<usize>, Vec<usize>)> {
        self.pairs.iter().map(|p| (p.source.clone(), p.target.clone())).collect()
    }

    /// Longest target, sentinels included.
    pub fn max_target_len(&self) -> usize {
        self.pairs.iter().map(|p| p.target.len()).max().unwrap_or(0)
    }

    /// Writes `<name>.src` / `<name>.tgt` (space-separated ids) per pair.
    pub fn save_pairs(&self, dir: &Path) -> Result<(), TranslatorError> {
        fs::create_dir_all(dir)?;
        let join = |ids: &[usize]| ids.iter().map(usize::to_string).collect::<Vec<_>>().join(" ") + "\n";
        for p in &self.pairs {
            fs::write(dir.join(format!("{}.src", p.name)), join(&p.source))?;
            fs::write(dir.join(format!("{}.tgt", p.name)), join(&p.target))?;
        }
        Ok(())
    }
}

/// Reads `.src`/`.tgt` pairs written by [`ParallelCorpus::save_pairs`],
/// sorted by name.
pub fn load_pairs(dir: &Path) -> Result<Vec<ParallelPair>, TranslatorError> {
    let mut names: Vec<String> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().to_str()?.strip_suffix(".src").map(str::to_string))
        .collect();
    names.sort();
    let parse = |file: String| -> Result<Vec<usize>, TranslatorError> {
        let text = fs::read_to_string(dir.join(&file))?;
        text.split_whitespace()
            .map(|t| t.parse().map_err(|_| TranslatorError::CorpusParse { file: file.clone(), reason: format!("bad id `{t}`") }))
            .collect()
    };
    names
        .into_iter()
        .map(|name| {
            Ok(ParallelPair {
                source: parse(format!("{name}.src"))?,
                target: parse(format!("{name}.tgt"))?,
                name,
            })
        })
        .collect()
}

/// Maps compressed-path tokens to source ids, unknown tokens to [`SOURCE_UNK`].
pub fn encode_source(path: &CompressedPath, vocab: &PathVocab) -> Vec<usize> {
    path.tokens.iter().map(|&t| vocab.id(t).unwrap_or(SOURCE_UNK)).collect()
}

/// Pairs each seed file with the path recorded for it (matched on the
/// path's `source_id`). Seeds are `(name, bytes)`.
pub fn build_parallel_corpus<N: AsRef<str>, B: AsRef<[u8]>>(
    seeds: &[(N, B)],
    paths: &[ExecutionPath],
    dict: &CompressionDictionary,
    vocab_budget: usize,
) -> Result<ParallelCorpus, TranslatorError> {
    let by_name: HashMap<&str, &ExecutionPath> =
        paths.iter().filter_map(|p| Some((p.source_id.as_deref()?, p))).collect();
    let mut unmatched = Vec::new();
    let mut dropped_empty = 0;
    let mut kept: Vec<(String, CompressedPath, Vec<Vec<u8>>)> = Vec::new();
    for (name, bytes) in seeds {
        let name = name.as_ref();
        let Some(path) = by_name.get(name) else {
            unmatched.push(name.to_string());
            continue;
        };
        let objects = extract_objects(bytes.as_ref()).objects;
        if objects.is_empty() {
            dropped_empty += 1;
            continue;
        }
        let bodies = objects.into_iter().map(|o| o.body).collect();
        kept.push((name.to_string(), compress_single(path, dict), bodies));
    }
    let all_bodies: Vec<&Vec<u8>> = kept.iter().flat_map(|(_, _, b)| b).collect();
    let object_vocab = ObjectVocab::build(&all_bodies, vocab_budget)?;
    let compressed: Vec<CompressedPath> = kept.iter().map(|(_, c, _)| c.clone()).collect();
    let source_vocab = PathVocab::build(&compressed);
    let pairs = kept
        .into_iter()
        .map(|(name, path, bodies)| ParallelPair {
            name,
            source: encode_source(&path, &source_vocab),
            target: object_vocab.encode(&bodies),
        })
        .collect();
    Ok(ParallelCorpus { pairs, source_vocab, object_vocab, dropped_empty, unmatched })
}

/// Trains a fresh translator (seeded by `cfg.rng_seed`) on the corpus.
pub fn train_translator(
    corpus: &ParallelCorpus,
    hidden_dim: usize,
    cfg: &TrainConfig,
) -> Result<(Seq2Seq, TrainingLog), TranslatorError> {
    if corpus.pairs.is_empty() {
        return Err(TranslatorError::EmptyCorpus);
    }
    let model_cfg = Seq2SeqConfig::new(corpus.source_vocab.len(), corpus.object_vocab.len(), hidden_dim);
    let mut model = Seq2Seq::new(&model_cfg, cfg.rng_seed)?;
    let log = seq2seq_train(&mut model, &corpus.training_pairs(), cfg)?;
    Ok((model, log))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TranslationResult {
    pub bodies: Vec<Vec<u8>>,
    /// Assembled file; empty when no body was decoded.
    pub seed: Vec<u8>,
    pub well_formed: bool,
    pub diagnostics: Vec<String>,
}

/// Default decode cap: four times the longest training target.
pub fn default_max_decode_len(corpus: &ParallelCorpus) -> usize {
    4 * corpus.max_target_len()
}

/// Greedy translation of one source. `max_decode_len` caps the target
/// sequence length, `SEQ_START` included, so 1 decodes nothing.
pub fn translate(
    model: &Seq2Seq,
    source: &[usize],
    max_decode_len: usize,
    vocab: &ObjectVocab,
) -> Result<TranslationResult, TranslatorError> {
    let ids = model.greedy_decode(source, SEQ_START, SEQ_END, max_decode_len.saturating_sub(1))?;
    let bodies = detokenize_objects(&ids, vocab)?;
    if bodies.is_empty() {
        return Ok(TranslationResult {
            bodies,
            seed: Vec::new(),
            well_formed: false,
            diagnostics: vec!["WF:objects:fail:nothing decoded".into()],
        });
    }
    let seed = assemble_pdf(&bodies, select_root(&bodies)).expect("bodies are non-empty");
    let report = is_well_formed(&seed);
    Ok(TranslationResult { bodies, seed, well_formed: report.ok, diagnostics: report.diagnostics })
}
