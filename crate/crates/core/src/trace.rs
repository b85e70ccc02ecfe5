//! Execution paths, the textual trace format, and the deduplicated path corpus.
//!
//! A trace file holds one basic block per line: eight lowercase hex digits
//! (the block's start address), a space, and a flag character:
//!
//! ```text
//! 0000002a E
//! 0000002b -
//! 0000002c X
//! ```
//!
//! `-` marks an ordinary block, `E` a function entry, `X` a function exit and
//! `B` a block that is both (a single-block function).

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TraceError {
    #[error("empty trace")]
    Empty,
    #[error("line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error("block {id:08x} seen with flag {old} and {new}")]
    FlagConflict { id: u32, old: char, new: char },
}

#[derive(Debug, Error)]
pub enum CorpusIoError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Trace {
        path: String,
        #[source]
        source: TraceError,
    },
}

/// A basic block, identified by its start address.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlockId {
    pub id: u32,
    pub fn_entry: bool,
    pub fn_exit: bool,
}

impl BlockId {
    pub const fn new(id: u32, fn_entry: bool, fn_exit: bool) -> Self {
        BlockId { id, fn_entry, fn_exit }
    }

    pub const fn plain(id: u32) -> Self {
        BlockId::new(id, false, false)
    }

    pub fn flag_char(&self) -> char {
        match (self.fn_entry, self.fn_exit) {
            (false, false) => '-',
            (true, false) => 'E',
            (false, true) => 'X',
            (true, true) => 'B',
        }
    }

    pub fn from_flag_char(id: u32, flag: char) -> Option<Self> {
        let (fn_entry, fn_exit) = match flag {
            '-' => (false, false),
            'E' => (true, false),
            'X' => (false, true),
            'B' => (true, true),
            _ => return None,
        };
        Some(BlockId { id, fn_entry, fn_exit })
    }

    /// Parses one trace line (`xxxxxxxx F`), without the newline.
    pub fn parse_line(line: &str) -> Result<Self, String> {
        let bytes = line.as_bytes();
        if bytes.len() != 10 || bytes[8] != b' ' {
            return Err(format!("expected `<8 hex digits> <flag>`, got {line:?}"));
        }
        let hex = &line[..8];
        if !hex.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b)) {
            return Err(format!("block id {hex:?} is not 8 lowercase hex digits"));
        }
        let id = u32::from_str_radix(hex, 16).map_err(|e| e.to_string())?;
        let flag = bytes[9] as char;
        BlockId::from_flag_char(id, flag).ok_or_else(|| format!("unknown flag {flag:?}"))
    }
}

impl fmt::Display for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:08x} {}", self.id, self.flag_char())
    }
}

/// The ordered basic blocks visited by one run of the target.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ExecutionPath {
    blocks: Vec<BlockId>,
    pub source_id: Option<String>,
}

impl ExecutionPath {
    /// Builds a path, checking that it is non-empty and starts at a function entry.
    pub fn new(blocks: Vec<BlockId>) -> Result<Self, TraceError> {
        match blocks.first() {
            None => Err(TraceError::Empty),
            Some(first) if !first.fn_entry => Err(TraceError::Format {
                line: 1,
                reason: "first block is not a function entry".into(),
            }),
            Some(_) => Ok(ExecutionPath { blocks, source_id: None }),
        }
    }

    pub fn with_source(mut self, source_id: impl Into<String>) -> Self {
        self.source_id = Some(source_id.into());
        self
    }

    pub fn blocks(&self) -> &[BlockId] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Renders the path in the trace file format.
    pub fn to_trace(&self) -> String {
        let mut out = String::with_capacity(self.blocks.len() * 11);
        for block in &self.blocks {
            out.push_str(&block.to_string());
            out.push('\n');
        }
        out
    }
}

/// Decodes a trace file into an execution path.
pub fn ingest_trace_file(bytes: &[u8]) -> Result<ExecutionPath, TraceError> {
    if bytes.is_empty() {
        return Err(TraceError::Empty);
    }
    let text = std::str::from_utf8(bytes).map_err(|e| {
        let line = bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count() + 1;
        TraceError::Format { line, reason: "invalid UTF-8".into() }
    })?;
    let body = text.strip_suffix('\n').unwrap_or(text);
    let mut blocks = Vec::new();
    for (idx, line) in body.split('\n').enumerate() {
        let block = BlockId::parse_line(line)
            .map_err(|reason| TraceError::Format { line: idx + 1, reason })?;
        blocks.push(block);
    }
    ExecutionPath::new(blocks)
}

/// Deduplicated set of execution paths plus every block they touch.
///
/// Paths keep insertion order so that everything derived from a corpus is
/// deterministic. Mutation is single-writer.
#[derive(Clone, Debug, Default)]
pub struct PathCorpus {
    paths: Vec<ExecutionPath>,
    seen: HashSet<Vec<BlockId>>,
    universe: BTreeMap<u32, BlockId>,
}

impl PathCorpus {
    pub fn new() -> Self {
        Self::default()
    }

    /// Like [`PathCorpus::add`], but rejects a path that gives a known block
    /// different boundary flags.
    pub fn try_add(&mut self, path: ExecutionPath) -> Result<bool, TraceError> {
        for block in path.blocks() {
            if let Some(known) = self.universe.get(&block.id).filter(|k| *k != block) {
                return Err(TraceError::FlagConflict { id: block.id, old: known.flag_char(), new: block.flag_char() });
            }
        }
        Ok(self.add(path))
    }

    /// Adds a path; returns false when an identical block sequence is already
    /// stored. A block's flags are taken from its first appearance.
    pub fn add(&mut self, path: ExecutionPath) -> bool {
        if self.seen.contains(path.blocks()) {
            return false;
        }
        for block in path.blocks() {
            self.universe.entry(block.id).or_insert(*block);
        }
        self.seen.insert(path.blocks().to_vec());
        self.paths.push(path);
        true
    }

    /// Registers blocks that belong to the target even if no path reaches them.
    pub fn extend_universe(&mut self, blocks: impl IntoIterator<Item = BlockId>) {
        for block in blocks {
            self.universe.entry(block.id).or_insert(block);
        }
    }

    pub fn contains(&self, blocks: &[BlockId]) -> bool {
        self.seen.contains(blocks)
    }

    pub fn paths(&self) -> &[ExecutionPath] {
        &self.paths
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn universe(&self) -> impl Iterator<Item = &BlockId> {
        self.universe.values()
    }

    pub fn universe_lookup(&self, id: u32) -> Option<BlockId> {
        self.universe.get(&id).copied()
    }

    /// Distinct blocks that appear on at least one stored path.
    pub fn covered_blocks(&self) -> HashSet<u32> {
        self.paths.iter().flat_map(|p| p.blocks().iter().map(|b| b.id)).collect()
    }

    /// Writes `*.trace` files plus `universe.txt` into `dir`.
    ///
    /// Paths with a source id are written as `<source_id>.trace`, the rest as
    /// `path-<index>.trace`.
    pub fn save_dir(&self, dir: &Path) -> Result<(), CorpusIoError> {
        let io = |p: &Path| {
            let path = p.display().to_string();
            move |source| CorpusIoError::Io { path, source }
        };
        fs::create_dir_all(dir).map_err(io(dir))?;
        for (idx, path) in self.paths.iter().enumerate() {
            let name = match &path.source_id {
                Some(id) => format!("{id}.trace"),
                None => format!("path-{idx:05}.trace"),
            };
            let file = dir.join(name);
            fs::write(&file, path.to_trace()).map_err(io(&file))?;
        }
        let mut universe = String::new();
        for block in self.universe.values() {
            universe.push_str(&block.to_string());
            universe.push('\n');
        }
        let file = dir.join("universe.txt");
        fs::write(&file, universe).map_err(io(&file))
    }

    /// Loads every `*.trace` file in `dir` (sorted by file name) and
    /// `universe.txt` when present. Each path's source id is its file stem.
    pub fn load_dir(dir: &Path) -> Result<Self, CorpusIoError> {
        let io = |p: &Path| {
            let path = p.display().to_string();
            move |source| CorpusIoError::Io { path, source }
        };
        let mut files: Vec<_> = fs::read_dir(dir)
            .map_err(io(dir))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|ext| ext == "trace"))
            .collect();
        files.sort();
        let mut corpus = PathCorpus::new();
        for file in files {
            let bytes = fs::read(&file).map_err(io(&file))?;
            let path = ingest_trace_file(&bytes).map_err(|source| CorpusIoError::Trace {
                path: file.display().to_string(),
                source,
            })?;
            let stem = file.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            corpus.add(path.with_source(stem));
        }
        let universe_file = dir.join("universe.txt");
        if universe_file.exists() {
            let text = fs::read_to_string(&universe_file).map_err(io(&universe_file))?;
            for (idx, line) in text.lines().enumerate() {
                let block = BlockId::parse_line(line).map_err(|reason| CorpusIoError::Trace {
                    path: universe_file.display().to_string(),
                    source: TraceError::Format { line: idx + 1, reason },
                })?;
                corpus.extend_universe([block]);
            }
        }
        Ok(corpus)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn path(ids: &[u32]) -> ExecutionPath {
        let mut blocks: Vec<_> = ids.iter().map(|&id| BlockId::plain(id)).collect();
        blocks[0].fn_entry = true;
        ExecutionPath::new(blocks).unwrap()
    }

    #[test]
    fn decodes_flagged_trace() {
        let p = ingest_trace_file(b"0000002a E\n0000002b -\n0000002c X\n").unwrap();
        assert_eq!(
            p.blocks(),
            &[BlockId::new(42, true, false), BlockId::plain(43), BlockId::new(44, false, true)]
        );
    }

    #[test]
    fn both_flag() {
        let p = ingest_trace_file(b"00000001 B\n").unwrap();
        assert_eq!(p.blocks(), &[BlockId::new(1, true, true)]);
    }

    #[test]
    fn empty_trace_is_rejected() {
        assert_eq!(ingest_trace_file(b""), Err(TraceError::Empty));
    }

    #[test]
    fn errors_name_the_line() {
        assert!(matches!(ingest_trace_file(b"zz -\n"), Err(TraceError::Format { line: 1, .. })));
        let bad_flag = ingest_trace_file(b"00000001 E\n00000002 Q\n");
        assert!(matches!(bad_flag, Err(TraceError::Format { line: 2, .. })));
        let upper = ingest_trace_file(b"0000000A E\n");
        assert!(matches!(upper, Err(TraceError::Format { line: 1, .. })));
        let blank = ingest_trace_file(b"00000001 E\n\n");
        assert!(matches!(blank, Err(TraceError::Format { line: 2, .. })));
    }

    #[test]
    fn first_block_must_be_entry() {
        assert!(ingest_trace_file(b"00000001 -\n").is_err());
    }

    #[test]
    fn dedup() {
        let mut corpus = PathCorpus::new();
        let p = path(&[1, 2, 3]);
        assert!(corpus.add(p.clone()));
        assert!(!corpus.add(p));
        assert_eq!(corpus.len(), 1);
        assert!(corpus.add(path(&[3, 2, 1])));
        assert_eq!(corpus.len(), 2);
        assert_eq!(corpus.universe().count(), 3);
    }

    #[test]
    fn corpus_dir_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut corpus = PathCorpus::new();
        corpus.add(path(&[1, 2, 3]).with_source("a"));
        corpus.add(path(&[1, 4]));
        corpus.extend_universe([BlockId::plain(99)]);
        corpus.save_dir(dir.path()).unwrap();
        let loaded = PathCorpus::load_dir(dir.path()).unwrap();
        assert_eq!(loaded.len(), 2);
        assert!(loaded.contains(path(&[1, 4]).blocks()));
        assert_eq!(loaded.universe().count(), 5);
        assert_eq!(loaded.paths()[0].source_id.as_deref(), Some("a"));
    }

    fn arb_path() -> impl Strategy<Value = ExecutionPath> {
        prop::collection::vec((any::<u32>(), any::<bool>(), any::<bool>()), 1..64).prop_map(|raw| {
            let mut blocks: Vec<_> =
                raw.into_iter().map(|(id, e, x)| BlockId::new(id, e, x)).collect();
            blocks[0].fn_entry = true;
            ExecutionPath::new(blocks).unwrap()
        })
    }

    proptest! {
        #[test]
        fn trace_round_trip(p in arb_path()) {
            let back = ingest_trace_file(p.to_trace().as_bytes()).unwrap();
            prop_assert_eq!(back, p);
        }

        #[test]
        fn corpus_size_counts_distinct_sequences(
            seqs in prop::collection::vec(prop::collection::vec(0u32..4, 1..4), 0..40)
        ) {
            let mut corpus = PathCorpus::new();
            for s in &seqs {
                corpus.add(path(s));
            }
            let distinct: HashSet<_> = seqs.iter().collect();
            prop_assert_eq!(corpus.len(), distinct.len());
        }
    }
}
