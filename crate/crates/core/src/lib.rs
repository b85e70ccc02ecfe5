//! Learned execution-path models for growing PDF fuzzing seed corpora.
//!
//! The pipeline has three stages:
//!
//! 1. **Data preparation** ([`trace`], [`pathcomp`]): execution paths are
//!    recorded (from external trace files or the built-in [`toy`] target),
//!    deduplicated into a [`trace::PathCorpus`], and shortened with
//!    super-block rewriting rules.
//! 2. **Path generation** ([`neural`], [`pathgen`]): a two-layer LSTM
//!    language model learns the distribution of compressed paths and is
//!    sampled under the `Sample` or `SampleFunction` strategy to produce
//!    paths not present in the corpus.
//! 3. **Seed generation** ([`pdf`], [`translator`]): PDF objects are pulled
//!    out of the seed files, an encoder/decoder model learns to map paths to
//!    object sequences, and generated paths are translated into new PDF
//!    files with a rebuilt cross-reference table.
//!
//! [`pipeline`] wires the stages together and measures coverage gain.
//! The crate's `examples/` directory has one runnable program per stage.

pub mod neural;
pub mod pathcomp;
pub mod pathgen;
pub mod pdf;
pub mod pipeline;
pub mod toy;
pub mod trace;
pub mod translator;

pub use pathcomp::{CompressedPath, CompressionDictionary, Token};
pub use trace::{BlockId, ExecutionPath, PathCorpus};
