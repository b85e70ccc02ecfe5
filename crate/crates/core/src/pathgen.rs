//! Path language model training and novel-path generation.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::neural::layers::StackState;
use crate::neural::matrix::argmax;
use crate::neural::{lm_train, sample_categorical, NeuralError, RnnLM, TrainConfig, TrainingLog};
use crate::pathcomp::{compress_single, expand_tokens, CompressError, CompressedPath, CompressionDictionary, Token, DEFAULT_MAX_LEN};
use crate::trace::{BlockId, ExecutionPath, PathCorpus};

pub const PATH_START: usize = 0;
pub const PATH_END: usize = 1;
const RESERVED: usize = 2;

#[derive(Debug, Error, PartialEq)]
pub enum PathGenError {
    #[error("path corpus is empty")]
    EmptyCorpus,
    #[error("token {0} is not in the path vocabulary")]
    UnknownToken(Token),
    #[error("invalid generation config: {0}")]
    Config(String),
    #[error("vocabulary line {line}: {reason}")]
    VocabParse { line: usize, reason: String },
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Dictionary(#[from] CompressError),
}

/// Dense ids for compressed-path tokens. Ids 0 and 1 are [`PATH_START`] and
/// [`PATH_END`]; corpus tokens follow in sorted order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathVocab {
    tokens: Vec<Token>,
    index: HashMap<Token, usize>,
}

impl PathVocab {
    pub fn build(paths: &[CompressedPath]) -> Self {
        let distinct: BTreeSet<Token> = paths.iter().flat_map(|p| p.tokens.iter().copied()).collect();
        Self::from_tokens(distinct.into_iter().collect())
    }

    fn from_tokens(tokens: Vec<Token>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, &t)| (t, i + RESERVED)).collect();
        PathVocab { tokens, index }
    }

    /// Model vocabulary size, reserved ids included.
    pub fn len(&self) -> usize {
        self.tokens.len() + RESERVED
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: Token) -> Option<usize> {
        self.index.get(&token).copied()
    }

    /// `None` for reserved and out-of-range ids.
    pub fn token(&self, id: usize) -> Option<Token> {
        id.checked_sub(RESERVED).and_then(|i| self.tokens.get(i)).copied()
    }

    /// `PATH_START · tokens · PATH_END` as model ids.
    pub fn encode(&self, path: &CompressedPath) -> Result<Vec<usize>, PathGenError> {
        let mut ids = Vec::with_capacity(path.len() + 2);
        ids.push(PATH_START);
        for &t in &path.tokens {
            ids.push(self.id(t).ok_or(PathGenError::UnknownToken(t))?);
        }
        ids.push(PATH_END);
        Ok(ids)
    }

    /// One `<id>\t<token>` line per corpus token.
    pub fn to_text(&self) -> String {
        self.tokens.iter().enumerate().map(|(i, t)| format!("{}\t{t}\n", i + RESERVED)).collect()
    }

    /// Inverse of [`PathVocab::to_text`]; base-block flags come from `lookup`.
    pub fn from_text(text: &str, lookup: impl Fn(u32) -> Option<BlockId>) -> Result<Self, PathGenError> {
        let mut tokens = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let err = |reason: &str| PathGenError::VocabParse { line: n + 1, reason: reason.into() };
            let (id, tok) = line.split_once('\t').ok_or_else(|| err("expected `<id>\\t<token>`"))?;
            if id.parse::<usize>().ok() != Some(n + RESERVED) {
                return Err(err("ids must be dense and start at 2"));
            }
            tokens.push(Token::parse(tok, &lookup).ok_or_else(|| err("bad token"))?);
        }
        let vocab = Self::from_tokens(tokens);
        if vocab.index.len() != vocab.tokens.len() {
            return Err(PathGenError::VocabParse { line: 0, reason: "duplicate token".into() });
        }
        Ok(vocab)
    }
}

/// Trains a fresh `hidden_dim` model (seeded by `cfg.rng_seed`) on the
/// compressed paths.
pub fn train_path_model(
    paths: &[CompressedPath],
    hidden_dim: usize,
    cfg: &TrainConfig,
) -> Result<(RnnLM, PathVocab, TrainingLog), PathGenError> {
    if paths.is_empty() {
        return Err(PathGenError::EmptyCorpus);
    }
    let vocab = PathVocab::build(paths);
    let sequences = paths.iter().map(|p| vocab.encode(p)).collect::<Result<Vec<_>, _>>()?;
    let mut model = RnnLM::new(vocab.len(), hidden_dim, cfg.rng_seed);
    let log = lm_train(&mut model, &sequences, cfg)?;
    Ok((model, vocab, log))
}

/// Anything that yields next-token distributions one step at a time.
pub trait PathModel {
    type State;
    fn initial_state(&self) -> Self::State;
    fn next_distribution(&self, token: usize, state: &mut Self::State) -> Result<Vec<f64>, NeuralError>;
}

impl PathModel for RnnLM {
    type State = StackState;

    fn initial_state(&self) -> StackState {
        self.zero_state()
    }

    fn next_distribution(&self, token: usize, state: &mut StackState) -> Result<Vec<f64>, NeuralError> {
        self.step(token, state)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SamplingStrategy {
    /// Draw every token from the model distribution.
    Sample,
    /// Greedy, except right after a token ending in a function exit.
    SampleFunction,
}

impl SamplingStrategy {
    pub fn label(self) -> &'static str {
        match self {
            SamplingStrategy::Sample => "sample",
            SamplingStrategy::SampleFunction => "samplefunction",
        }
    }
}

impl std::str::FromStr for SamplingStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "sample" => Ok(SamplingStrategy::Sample),
            "samplefunction" | "sample-function" | "sample_function" => Ok(SamplingStrategy::SampleFunction),
            _ => Err(format!("unknown strategy `{s}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenerationConfig {
    pub strategy: SamplingStrategy,
    pub temperature: f64,
    /// Cap on emitted tokens, the initial token included.
    pub max_tokens: usize,
    pub max_attempts: usize,
    pub rng_seed: u64,
}

impl GenerationConfig {
    pub fn new(strategy: SamplingStrategy, rng_seed: u64) -> Self {
        GenerationConfig { strategy, temperature: 1.0, max_tokens: DEFAULT_MAX_LEN, max_attempts: 50, rng_seed }
    }

    pub fn validate(&self) -> Result<(), PathGenError> {
        if self.max_tokens == 0 {
            return Err(PathGenError::Config("max_tokens must be at least 1".into()));
        }
        if self.max_attempts == 0 {
            return Err(PathGenError::Config("max_attempts must be at least 1".into()));
        }
        if !(self.temperature > 0.0) {
            return Err(PathGenError::Config(format!("temperature must be positive, got {}", self.temperature)));
        }
        Ok(())
    }
}

/// Generates one path starting at `initial`, seeding the rng from the config.
pub fn generate_path<M: PathModel>(
    model: &M,
    vocab: &PathVocab,
    initial: Token,
    cfg: &GenerationConfig,
    dict: &CompressionDictionary,
) -> Result<CompressedPath, PathGenError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    generate_path_with(model, vocab, initial, cfg, dict, &mut rng)
}

/// [`generate_path`] drawing from a caller-owned rng.
pub fn generate_path_with<M: PathModel>(
    model: &M,
    vocab: &PathVocab,
    initial: Token,
    cfg: &GenerationConfig,
    dict: &CompressionDictionary,
    rng: &mut impl Rng,
) -> Result<CompressedPath, PathGenError> {
    cfg.validate()?;
    let first = vocab.id(initial).ok_or(PathGenError::UnknownToken(initial))?;
    let mut state = model.initial_state();
    model.next_distribution(PATH_START, &mut state)?;
    let mut tokens = vec![initial];
    let mut current = (first, initial);
    while tokens.len() < cfg.max_tokens {
        let mut dist = model.next_distribution(current.0, &mut state)?;
        // PATH_START never follows another token.
        dist[PATH_START] = 0.0;
        let total: f64 = dist.iter().sum();
        if total <= 0.0 {
            break;
        }
        dist.iter_mut().for_each(|p| *p /= total);

        let sample = match cfg.strategy {
            SamplingStrategy::Sample => true,
            SamplingStrategy::SampleFunction => dict.ends_function(current.1)?,
        };
        let next = if sample { sample_categorical(&dist, cfg.temperature, rng)? } else { argmax(&dist) };
        let Some(token) = vocab.token(next) else { break };
        tokens.push(token);
        current = (next, token);
    }
    Ok(CompressedPath { tokens, origin: None })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SlotReport {
    /// 1-based slot number.
    pub slot: usize,
    pub accepted: bool,
    pub attempts: usize,
}

impl fmt::Display for SlotReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let outcome = if self.accepted { "accepted" } else { "exhausted" };
        write!(f, "slot {}: {outcome} after {} attempts", self.slot, self.attempts)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct NovelPaths {
    pub paths: Vec<CompressedPath>,
    pub report: Vec<SlotReport>,
}

impl NovelPaths {
    pub fn total_attempts(&self) -> usize {
        self.report.iter().map(|r| r.attempts).sum()
    }

    pub fn report_text(&self) -> String {
        self.report.iter().map(|r| format!("{r}\n")).collect()
    }
}

/// Initial tokens of the corpus paths under `dict`, restricted to `vocab`.
pub fn initial_tokens(corpus: &PathCorpus, dict: &CompressionDictionary, vocab: &PathVocab) -> Vec<Token> {
    let set: BTreeSet<Token> = corpus
        .paths()
        .iter()
        .filter_map(|p| compress_single(p, dict).tokens.first().copied())
        .filter(|&t| vocab.id(t).is_some())
        .collect();
    set.into_iter().collect()
}

/// Fills up to `count` slots with generated paths whose decompressed form
/// is in neither `corpus` nor the paths already returned.
pub fn generate_novel_corpus<M: PathModel>(
    model: &M,
    vocab: &PathVocab,
    corpus: &PathCorpus,
    dict: &CompressionDictionary,
    cfg: &GenerationConfig,
    count: usize,
) -> Result<NovelPaths, PathGenError> {
    cfg.validate()?;
    let starts = initial_tokens(corpus, dict, vocab);
    if starts.is_empty() {
        return Err(PathGenError::EmptyCorpus);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut seen: HashSet<Vec<BlockId>> = HashSet::new();
    let mut out = NovelPaths::default();
    for slot in 1..=count {
        let mut accepted = false;
        let mut attempts = 0;
        while attempts < cfg.max_attempts && !accepted {
            attempts += 1;
            let initial = starts[rng.gen_range(0..starts.len())];
            let path = generate_path_with(model, vocab, initial, cfg, dict, &mut rng)?;
            let blocks = expand_tokens(&path.tokens, dict)?;
            if ExecutionPath::new(blocks.clone()).is_err() || corpus.contains(&blocks) {
                continue;
            }
            if seen.insert(blocks) {
                out.paths.push(path);
                accepted = true;
            }
        }
        out.report.push(SlotReport { slot, accepted, attempts });
    }
    Ok(out)
}
