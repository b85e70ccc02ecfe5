//! Flat `key = value` pipeline configuration.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::neural::{TrainConfig, DEFAULT_HIDDEN};
use crate::pathcomp::DEFAULT_MAX_LEN;
use crate::pathgen::{GenerationConfig, SamplingStrategy};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("invalid value `{value}` for `{key}`: {reason}")]
    Value { key: String, value: String, reason: String },
    #[error("{0}")]
    Invalid(String),
    #[error("cannot read config file {path}: {reason}")]
    Read { path: String, reason: String },
}

/// Where execution paths come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TargetKind {
    /// Run seeds through the built-in toy target.
    Toy,
    /// Read `<seed stem>.trace` files from `trace-dir`.
    Traces,
}

/// Every setting is a key of the config file and a `--<key>` flag.
pub const KEYS: &[&str] = &[
    "seed-dir",
    "trace-dir",
    "work-dir",
    "target",
    "seed",
    "max-len",
    "path-hidden",
    "translator-hidden",
    "path-epochs",
    "translator-epochs",
    "learning-rate",
    "batch-size",
    "bptt-window",
    "clip-norm",
    "vocab-budget",
    "strategies",
    "count",
    "temperature",
    "max-attempts",
    "max-tokens",
    "max-decode-len",
];

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub seed_dir: PathBuf,
    pub trace_dir: Option<PathBuf>,
    pub work_dir: PathBuf,
    pub target: TargetKind,
    pub seed: u64,
    pub max_len: usize,
    pub path_hidden: usize,
    pub translator_hidden: usize,
    pub path_epochs: usize,
    pub translator_epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub bptt_window: usize,
    pub clip_norm: f64,
    pub vocab_budget: usize,
    pub strategies: Vec<SamplingStrategy>,
    /// Novel paths requested per strategy.
    pub count: usize,
    pub temperature: f64,
    pub max_attempts: usize,
    /// 0 means the compression bound.
    pub max_tokens: usize,
    /// 0 means four times the longest training target.
    pub max_decode_len: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let train = TrainConfig::new(0);
        PipelineConfig {
            seed_dir: PathBuf::from("seeds"),
            trace_dir: None,
            work_dir: PathBuf::from("work"),
            target: TargetKind::Toy,
            seed: 0,
            max_len: DEFAULT_MAX_LEN,
            path_hidden: DEFAULT_HIDDEN,
            translator_hidden: DEFAULT_HIDDEN,
            path_epochs: train.epochs,
            translator_epochs: train.epochs,
            learning_rate: train.learning_rate,
            batch_size: train.batch_size,
            bptt_window: train.bptt_window,
            clip_norm: train.gradient_clip_norm,
            vocab_budget: 256,
            strategies: vec![SamplingStrategy::Sample, SamplingStrategy::SampleFunction],
            count: 10,
            temperature: 1.0,
            max_attempts: 50,
            max_tokens: 0,
            max_decode_len: 0,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::Value {
        key: key.into(),
        value: value.into(),
        reason: e.to_string(),
    })
}

impl PipelineConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "seed-dir" => self.seed_dir = PathBuf::from(value),
            "trace-dir" => {
                self.trace_dir = Some(PathBuf::from(value));
                self.target = TargetKind::Traces;
            }
            "work-dir" => self.work_dir = PathBuf::from(value),
            "target" => {
                self.target = match value {
                    "toy" => TargetKind::Toy,
                    "traces" => TargetKind::Traces,
                    _ => {
                        return Err(ConfigError::Value {
                            key: key.into(),
                            value: value.into(),
                            reason: "expected `toy` or `traces`".into(),
                        })
                    }
                }
            }
            "seed" => self.seed = parse(key, value)?,
            "max-len" => self.max_len = parse(key, value)?,
            "path-hidden" => self.path_hidden = parse(key, value)?,
            "translator-hidden" => self.translator_hidden = parse(key, value)?,
            "path-epochs" => self.path_epochs = parse(key, value)?,
            "translator-epochs" => self.translator_epochs = parse(key, value)?,
            "learning-rate" => self.learning_rate = parse(key, value)?,
            "batch-size" => self.batch_size = parse(key, value)?,
            "bptt-window" => self.bptt_window = parse(key, value)?,
            "clip-norm" => self.clip_norm = parse(key, value)?,
            "vocab-budget" => self.vocab_budget = parse(key, value)?,
            "strategies" => {
                self.strategies = value
                    .split(',')
                    .map(|s| parse::<SamplingStrategy>(key, s.trim()))
                    .collect::<Result<_, _>>()?
            }
            "count" => self.count = parse(key, value)?,
            "temperature" => self.temperature = parse(key, value)?,
            "max-attempts" => self.max_attempts = parse(key, value)?,
            "max-tokens" => self.max_tokens = parse(key, value)?,
            "max-decode-len" => self.max_decode_len = parse(key, value)?,
            _ => return Err(ConfigError::UnknownKey(key.into())),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Syntax { line: n + 1, reason: "expected `key = value`".into() });
            };
            self.set(key.trim(), value.trim()).map_err(|e| match e {
                ConfigError::UnknownKey(k) => ConfigError::Syntax { line: n + 1, reason: format!("unknown key `{k}`") },
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Read { path: path.display().to_string(), reason: e.to_string() })?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    /// Numeric sanity checks that do not touch the file system.
    pub fn validate_values(&self) -> Result<(), ConfigError> {
        let positive = [
            ("max-len", self.max_len),
            ("path-hidden", self.path_hidden),
            ("translator-hidden", self.translator_hidden),
            ("path-epochs", self.path_epochs),
            ("translator-epochs", self.translator_epochs),
            ("batch-size", self.batch_size),
            ("bptt-window", self.bptt_window),
            ("count", self.count),
            ("max-attempts", self.max_attempts),
        ];
        for (key, v) in positive {
            if v == 0 {
                return Err(ConfigError::Invalid(format!("`{key}` must be positive")));
            }
        }
        if self.max_len < 2 {
            return Err(ConfigError::Invalid("`max-len` must be at least 2".into()));
        }
        if !(self.learning_rate > 0.0) || !(self.clip_norm > 0.0) || !(self.temperature > 0.0) {
            return Err(ConfigError::Invalid("`learning-rate`, `clip-norm` and `temperature` must be positive".into()));
        }
        if self.vocab_budget < crate::translator::MIN_VOCAB_BUDGET {
            return Err(ConfigError::Invalid(format!(
                "`vocab-budget` must be at least {}",
                crate::translator::MIN_VOCAB_BUDGET
            )));
        }
        if self.strategies.is_empty() {
            return Err(ConfigError::Invalid("`strategies` is empty".into()));
        }
        Ok(())
    }

    /// Value checks plus existence of the input directories.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.validate_values()?;
        if !self.seed_dir.is_dir() {
            return Err(ConfigError::Invalid(format!("seed directory {} does not exist", self.seed_dir.display())));
        }
        if self.target == TargetKind::Traces {
            match &self.trace_dir {
                Some(dir) if dir.is_dir() => {}
                Some(dir) => {
                    return Err(ConfigError::Invalid(format!("trace directory {} does not exist", dir.display())))
                }
                None => return Err(ConfigError::Invalid("target `traces` needs `trace-dir`".into())),
            }
        }
        Ok(())
    }

    /// Training settings for one model; each model gets its own rng stream.
    pub fn train_config(&self, epochs: usize, stream: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            bptt_window: self.bptt_window,
            epochs,
            gradient_clip_norm: self.clip_norm,
            rng_seed: derive_seed(self.seed, stream),
        }
    }

    pub fn generation_config(&self, strategy: SamplingStrategy, stream: u64) -> GenerationConfig {
        GenerationConfig {
            strategy,
            temperature: self.temperature,
            max_tokens: if self.max_tokens == 0 { self.max_len } else { self.max_tokens },
            max_attempts: self.max_attempts,
            rng_seed: derive_seed(self.seed, stream),
        }
    }
}

/// SplitMix64 of `seed` offset by `stream`: independent seeds per consumer.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed.wrapping_add(stream.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
