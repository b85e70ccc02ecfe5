//! Invertible path compression with super-blocks.
//!
//! Paths are shortened by repeatedly replacing the most frequent adjacent
//! token pair with a fresh super-block, byte-pair-encoding style. Only pairs
//! shared by at least two distinct paths are eligible at first; if some path
//! is still too long once those run out, pairs repeated within a single path
//! are admitted too. Compression stops as soon as every path is shorter than
//! `max_len` tokens.
//!
//! Rules always merge exactly two tokens and may only reference super-blocks
//! created before them, so the rule list is topologically ordered and
//! expansion terminates.

use std::collections::{HashMap, HashSet};
use std::fmt;

use thiserror::Error;

use crate::trace::{BlockId, ExecutionPath, PathCorpus};

pub const DEFAULT_MAX_LEN: usize = 300;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CompressError {
    #[error("max_len must be at least 2, got {0}")]
    MaxLen(usize),
    #[error("unknown super-block S{0}")]
    UnknownSuper(u32),
    #[error("dictionary line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("rule S{id} references S{referenced}, which is not defined before it")]
    Cyclic { id: u32, referenced: u32 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Token {
    Base(BlockId),
    Super(u32),
}

impl Token {
    /// Parses the `B%08x` / `S<id>` text form; base-block flags come from
    /// `lookup`, falling back to a plain block.
    pub fn parse(text: &str, lookup: impl Fn(u32) -> Option<BlockId>) -> Option<Token> {
        if let Some(hex) = text.strip_prefix('B') {
            if hex.len() != 8 {
                return None;
            }
            let id = u32::from_str_radix(hex, 16).ok()?;
            Some(Token::Base(lookup(id).unwrap_or(BlockId::plain(id))))
        } else {
            text.strip_prefix('S')?.parse().ok().map(Token::Super)
        }
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Base(b) => write!(f, "B{:08x}", b.id),
            Token::Super(s) => write!(f, "S{s}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SuperBlockRule {
    pub super_id: u32,
    pub expansion: (Token, Token),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompressionDictionary {
    rules: Vec<SuperBlockRule>,
    /// Last base block of each rule's full expansion.
    last_base: Vec<BlockId>,
    pub max_len: usize,
}

impl CompressionDictionary {
    pub fn new(max_len: usize) -> Result<Self, CompressError> {
        if max_len < 2 {
            return Err(CompressError::MaxLen(max_len));
        }
        Ok(CompressionDictionary { rules: Vec::new(), last_base: Vec::new(), max_len })
    }

    pub fn rules(&self) -> &[SuperBlockRule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Appends a rule for `pair`, checking acyclicity; returns the new token.
    pub fn push_rule(&mut self, pair: (Token, Token)) -> Result<Token, CompressError> {
        let id = self.rules.len() as u32;
        for t in [pair.0, pair.1] {
            if let Token::Super(s) = t {
                if s >= id {
                    return Err(CompressError::Cyclic { id, referenced: s });
                }
            }
        }
        let last = self.last_base(pair.1)?;
        self.rules.push(SuperBlockRule { super_id: id, expansion: pair });
        self.last_base.push(last);
        Ok(Token::Super(id))
    }

    /// The final base block a token expands to.
    pub fn last_base(&self, token: Token) -> Result<BlockId, CompressError> {
        match token {
            Token::Base(b) => Ok(b),
            Token::Super(s) => {
                self.last_base.get(s as usize).copied().ok_or(CompressError::UnknownSuper(s))
            }
        }
    }

    /// Whether the token's expansion ends at a function exit.
    pub fn ends_function(&self, token: Token) -> Result<bool, CompressError> {
        Ok(self.last_base(token)?.fn_exit)
    }

    /// Expands one token into base blocks, appending to `out`.
    pub fn expand_into(&self, token: Token, out: &mut Vec<BlockId>) -> Result<(), CompressError> {
        let mut stack = vec![token];
        while let Some(t) = stack.pop() {
            match t {
                Token::Base(b) => out.push(b),
                Token::Super(s) => {
                    let rule = self.rules.get(s as usize).ok_or(CompressError::UnknownSuper(s))?;
                    stack.push(rule.expansion.1);
                    stack.push(rule.expansion.0);
                }
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for rule in &self.rules {
            out.push_str(&format!("S{} {} {}\n", rule.super_id, rule.expansion.0, rule.expansion.1));
        }
        out
    }

    /// Parses the one-rule-per-line text form. Base-block flags are restored
    /// through `lookup`; unknown ids become plain blocks.
    pub fn from_text(
        text: &str,
        max_len: usize,
        lookup: impl Fn(u32) -> Option<BlockId>,
    ) -> Result<Self, CompressError> {
        let mut dict = CompressionDictionary::new(max_len)?;
        for (idx, line) in text.lines().enumerate() {
            let err = |reason: &str| CompressError::Parse { line: idx + 1, reason: reason.into() };
            let fields: Vec<&str> = line.split(' ').collect();
            let [head, lhs, rhs] = fields[..] else {
                return Err(err("expected `S<id> <lhs> <rhs>`"));
            };
            let id: u32 = head
                .strip_prefix('S')
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| err("bad rule id"))?;
            if id as usize != dict.len() {
                return Err(err("rule ids must be dense and ascending"));
            }
            let parse_token = |s: &str| Token::parse(s, &lookup).ok_or_else(|| err("bad token"));
            dict.push_rule((parse_token(lhs)?, parse_token(rhs)?))?;
        }
        Ok(dict)
    }
}

/// A path expressed in dictionary tokens.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CompressedPath {
    pub tokens: Vec<Token>,
    /// `source_id` of the path this was compressed from.
    pub origin: Option<String>,
}

impl CompressedPath {
    pub fn from_path(path: &ExecutionPath) -> Self {
        CompressedPath {
            tokens: path.blocks().iter().map(|&b| Token::Base(b)).collect(),
            origin: path.source_id.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

type Pair = (Token, Token);

/// Non-overlapping, left-to-right occurrence counts of adjacent pairs.
fn count_pairs(tokens: &[Token]) -> HashMap<Pair, usize> {
    let mut counts = HashMap::new();
    let mut i = 0;
    while i + 1 < tokens.len() {
        let pair = (tokens[i], tokens[i + 1]);
        *counts.entry(pair).or_insert(0) += 1;
        // A run like AAA holds one non-overlapping AA, not two.
        if pair.0 == pair.1 && tokens.get(i + 2) == Some(&pair.0) {
            let run = tokens[i..].iter().take_while(|&&t| t == pair.0).count();
            *counts.get_mut(&pair).unwrap() += run / 2 - 1;
            i += run - 1;
        } else {
            i += 1;
        }
    }
    counts
}

fn replace_pair(tokens: &[Token], pair: Pair, with: Token) -> Vec<Token> {
    let mut out = Vec::with_capacity(tokens.len());
    let mut i = 0;
    while i < tokens.len() {
        if i + 1 < tokens.len() && tokens[i] == pair.0 && tokens[i + 1] == pair.1 {
            out.push(with);
            i += 2;
        } else {
            out.push(tokens[i]);
            i += 1;
        }
    }
    out
}

#[derive(Default)]
struct PairStats {
    total: usize,
    paths: usize,
    max_in_one: usize,
}

/// Global pair statistics kept in sync with per-path counts.
struct PairTable {
    per_path: Vec<HashMap<Pair, usize>>,
    stats: HashMap<Pair, PairStats>,
    /// Paths containing each pair.
    holders: HashMap<Pair, HashSet<usize>>,
}

impl PairTable {
    fn new(paths: &[Vec<Token>]) -> Self {
        let mut table = PairTable {
            per_path: Vec::with_capacity(paths.len()),
            stats: HashMap::new(),
            holders: HashMap::new(),
        };
        for (idx, p) in paths.iter().enumerate() {
            let counts = count_pairs(p);
            table.add(idx, &counts);
            table.per_path.push(counts);
        }
        table
    }

    fn add(&mut self, idx: usize, counts: &HashMap<Pair, usize>) {
        for (&pair, &n) in counts {
            let s = self.stats.entry(pair).or_default();
            s.total += n;
            s.paths += 1;
            self.holders.entry(pair).or_default().insert(idx);
        }
    }

    fn remove(&mut self, idx: usize, counts: &HashMap<Pair, usize>) {
        for (pair, &n) in counts {
            let s = self.stats.get_mut(pair).expect("pair tracked");
            s.total -= n;
            s.paths -= 1;
            if s.paths == 0 {
                self.stats.remove(pair);
            }
            let h = self.holders.get_mut(pair).expect("pair tracked");
            h.remove(&idx);
            if h.is_empty() {
                self.holders.remove(pair);
            }
        }
    }

    fn refresh_max(&mut self) {
        for s in self.stats.values_mut() {
            s.max_in_one = 0;
        }
        for counts in &self.per_path {
            for (pair, &n) in counts {
                let s = self.stats.get_mut(pair).expect("pair tracked");
                s.max_in_one = s.max_in_one.max(n);
            }
        }
    }

    /// Most frequent eligible pair; ties go to the smaller pair.
    fn best(&self, allow_single_path: bool) -> Option<Pair> {
        self.stats
            .iter()
            .filter(|(_, s)| s.paths >= 2 || (allow_single_path && s.max_in_one >= 2))
            .max_by(|(pa, sa), (pb, sb)| sa.total.cmp(&sb.total).then_with(|| pb.cmp(pa)))
            .map(|(p, _)| *p)
    }
}

/// Builds a dictionary for `corpus` and compresses every path with it.
pub fn compress_corpus(
    corpus: &PathCorpus,
    max_len: usize,
) -> Result<(Vec<CompressedPath>, CompressionDictionary), CompressError> {
    compress_paths(corpus.paths(), max_len)
}

/// [`compress_corpus`] over a plain slice of (distinct) paths.
pub fn compress_paths(
    paths: &[ExecutionPath],
    max_len: usize,
) -> Result<(Vec<CompressedPath>, CompressionDictionary), CompressError> {
    let mut dict = CompressionDictionary::new(max_len)?;
    let mut tokens: Vec<Vec<Token>> =
        paths.iter().map(|p| p.blocks().iter().map(|&b| Token::Base(b)).collect()).collect();
    let mut table = PairTable::new(&tokens);
    let mut single_path_phase = false;

    while tokens.iter().any(|t| t.len() >= max_len) {
        let Some(pair) = table.best(single_path_phase) else {
            if single_path_phase {
                break;
            }
            single_path_phase = true;
            table.refresh_max();
            continue;
        };
        let fresh = dict.push_rule(pair)?;
        let holders: Vec<usize> = {
            let mut h: Vec<usize> = table.holders[&pair].iter().copied().collect();
            h.sort_unstable();
            h
        };
        for idx in holders {
            tokens[idx] = replace_pair(&tokens[idx], pair, fresh);
            let old = std::mem::take(&mut table.per_path[idx]);
            table.remove(idx, &old);
            let new = count_pairs(&tokens[idx]);
            table.add(idx, &new);
            table.per_path[idx] = new;
        }
        if single_path_phase {
            table.refresh_max();
        }
    }

    let compressed = tokens
        .into_iter()
        .zip(paths)
        .map(|(tokens, p)| CompressedPath { tokens, origin: p.source_id.clone() })
        .collect();
    Ok((compressed, dict))
}

/// Expands every super-block back into base blocks.
pub fn decompress(
    path: &CompressedPath,
    dict: &CompressionDictionary,
) -> Result<ExecutionPath, DecompressError> {
    let blocks = expand_tokens(&path.tokens, dict)?;
    let mut out = ExecutionPath::new(blocks).map_err(DecompressError::Path)?;
    out.source_id = path.origin.clone();
    Ok(out)
}

/// Expands tokens without checking the execution-path invariants.
pub fn expand_tokens(
    tokens: &[Token],
    dict: &CompressionDictionary,
) -> Result<Vec<BlockId>, CompressError> {
    let mut blocks = Vec::with_capacity(tokens.len() * 2);
    for &t in tokens {
        dict.expand_into(t, &mut blocks)?;
    }
    Ok(blocks)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DecompressError {
    #[error(transparent)]
    Dictionary(#[from] CompressError),
    #[error("expanded tokens are not a valid path: {0}")]
    Path(crate::trace::TraceError),
}

/// Compresses a new path with a fixed dictionary, applying rules in order.
pub fn compress_single(path: &ExecutionPath, dict: &CompressionDictionary) -> CompressedPath {
    let mut tokens: Vec<Token> = path.blocks().iter().map(|&b| Token::Base(b)).collect();
    loop {
        let before = tokens.len();
        for rule in dict.rules() {
            if tokens.len() < 2 {
                break;
            }
            if tokens.windows(2).any(|w| (w[0], w[1]) == rule.expansion) {
                tokens = replace_pair(&tokens, rule.expansion, Token::Super(rule.super_id));
            }
        }
        if tokens.len() == before {
            break;
        }
    }
    CompressedPath { tokens, origin: path.source_id.clone() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const A: BlockId = BlockId::new(0xa, true, false);
    const B: BlockId = BlockId::plain(0xb);
    const C: BlockId = BlockId::new(0xc, false, true);

    fn p(blocks: &[BlockId]) -> ExecutionPath {
        ExecutionPath::new(blocks.to_vec()).unwrap()
    }

    fn base(b: BlockId) -> Token {
        Token::Base(b)
    }

    #[test]
    fn shared_pair_becomes_super_block() {
        let paths = [p(&[A, B, A, B, A, B]), p(&[A, B, C])];
        let (out, dict) = compress_paths(&paths, 4).unwrap();
        assert_eq!(dict.rules(), &[SuperBlockRule { super_id: 0, expansion: (base(A), base(B)) }]);
        let s0 = Token::Super(0);
        assert_eq!(out[0].tokens, [s0, s0, s0]);
        assert_eq!(out[1].tokens, [s0, base(C)]);
    }

    #[test]
    fn lone_short_path_is_untouched() {
        let (out, dict) = compress_paths(&[p(&[A, B, C])], DEFAULT_MAX_LEN).unwrap();
        assert!(dict.is_empty());
        assert_eq!(out[0].tokens, [base(A), base(B), base(C)]);
    }

    #[test]
    fn rejects_tiny_max_len() {
        assert_eq!(compress_paths(&[], 1).unwrap_err(), CompressError::MaxLen(1));
    }

    #[test]
    fn single_path_fallback() {
        let long: Vec<BlockId> = std::iter::once(A).chain([B, C].repeat(10)).collect();
        let (out, dict) = compress_paths(&[p(&long)], 8).unwrap();
        assert!(!dict.is_empty());
        assert!(out[0].len() < 8);
        assert_eq!(decompress(&out[0], &dict).unwrap().blocks(), &long[..]);
    }

    #[test]
    fn expansions() {
        let mut dict = CompressionDictionary::new(300).unwrap();
        let s0 = dict.push_rule((base(A), base(B))).unwrap();
        let s1 = dict.push_rule((s0, base(C))).unwrap();
        let three = CompressedPath { tokens: vec![s0, s0, s0], origin: None };
        assert_eq!(decompress(&three, &dict).unwrap().blocks(), &[A, B, A, B, A, B]);
        let nested = CompressedPath { tokens: vec![s1], origin: None };
        assert_eq!(decompress(&nested, &dict).unwrap().blocks(), &[A, B, C]);
        let plain = CompressedPath { tokens: vec![base(A), base(C)], origin: None };
        assert_eq!(decompress(&plain, &dict).unwrap().blocks(), &[A, C]);
        assert!(dict.ends_function(s1).unwrap());
        assert!(!dict.ends_function(s0).unwrap());
    }

    #[test]
    fn unknown_super_is_an_error() {
        let dict = CompressionDictionary::new(300).unwrap();
        let path = CompressedPath { tokens: vec![Token::Super(3)], origin: None };
        assert_eq!(
            decompress(&path, &dict).unwrap_err(),
            DecompressError::Dictionary(CompressError::UnknownSuper(3))
        );
    }

    #[test]
    fn cyclic_rule_rejected() {
        let mut dict = CompressionDictionary::new(300).unwrap();
        assert!(dict.push_rule((Token::Super(0), base(A))).is_err());
    }

    #[test]
    fn single_with_fixed_dictionary() {
        let mut dict = CompressionDictionary::new(300).unwrap();
        dict.push_rule((base(A), base(B))).unwrap();
        assert_eq!(compress_single(&p(&[A, B, C]), &dict).tokens, [Token::Super(0), base(C)]);
        assert_eq!(compress_single(&p(&[A, C]), &dict).tokens, [base(A), base(C)]);
    }

    #[test]
    fn text_round_trip() {
        let mut dict = CompressionDictionary::new(300).unwrap();
        let s0 = dict.push_rule((base(A), base(B))).unwrap();
        dict.push_rule((s0, base(C))).unwrap();
        let text = dict.to_text();
        assert_eq!(text, "S0 B0000000a B0000000b\nS1 S0 B0000000c\n");
        let lookup = |id| [A, B, C].into_iter().find(|b| b.id == id);
        assert_eq!(CompressionDictionary::from_text(&text, 300, lookup).unwrap(), dict);
        assert!(CompressionDictionary::from_text("S1 S0 S0\n", 300, lookup).is_err());
    }

    #[test]
    fn runs_count_without_overlap() {
        let counts = count_pairs(&[base(A), base(A), base(A), base(A), base(A)]);
        assert_eq!(counts[&(base(A), base(A))], 2);
    }

    fn arb_paths() -> impl Strategy<Value = Vec<ExecutionPath>> {
        prop::collection::vec(prop::collection::vec(0u32..6, 1..60), 1..6).prop_map(|raw| {
            let mut seen = HashSet::new();
            raw.into_iter()
                .filter(|r| seen.insert(r.clone()))
                .map(|r| {
                    let mut blocks: Vec<_> =
                        r.iter().map(|&i| BlockId::new(i, i == 0, i == 5)).collect();
                    blocks.insert(0, BlockId::new(100, true, false));
                    ExecutionPath::new(blocks).unwrap()
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn corpus_round_trip(paths in arb_paths(), max_len in 2usize..40) {
            let (out, dict) = compress_paths(&paths, max_len).unwrap();
            for (c, orig) in out.iter().zip(&paths) {
                let back = decompress(c, &dict).unwrap();
                prop_assert_eq!(back.blocks(), orig.blocks());
                prop_assert!(c.len() <= orig.len());
                prop_assert_eq!(&compress_single(orig, &dict).tokens, &c.tokens);
            }
        }

        #[test]
        fn deterministic(paths in arb_paths()) {
            let a = compress_paths(&paths, 5).unwrap();
            let b = compress_paths(&paths, 5).unwrap();
            prop_assert_eq!(a.1.to_text(), b.1.to_text());
            prop_assert_eq!(a.0, b.0);
        }
    }
}
