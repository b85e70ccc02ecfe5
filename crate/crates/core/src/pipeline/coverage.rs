//! Coverage counting and the comparison table.

use std::collections::HashSet;
use std::fmt::Write as _;

use crate::trace::{BlockId, PathCorpus};

/// Distinct blocks and distinct whole paths over a set of corpora.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Coverage {
    pub basic_blocks: usize,
    pub paths: usize,
}

pub fn coverage_of<'a>(corpora: impl IntoIterator<Item = &'a PathCorpus>) -> Coverage {
    let mut blocks: HashSet<u32> = HashSet::new();
    let mut paths: HashSet<&[BlockId]> = HashSet::new();
    for corpus in corpora {
        for p in corpus.paths() {
            blocks.extend(p.blocks().iter().map(|b| b.id));
            paths.insert(p.blocks());
        }
    }
    Coverage { basic_blocks: blocks.len(), paths: paths.len() }
}

/// Coverage of `original ∪ new` for one generated corpus.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoverageRow {
    pub label: String,
    pub basic_blocks_new: usize,
    pub paths_new: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoverageReport {
    pub basic_blocks_original: usize,
    pub paths_original: usize,
    pub rows: Vec<CoverageRow>,
}

impl CoverageReport {
    pub fn new(original: Coverage) -> Self {
        CoverageReport { basic_blocks_original: original.basic_blocks, paths_original: original.paths, rows: Vec::new() }
    }

    /// Adds a row for `new`, measured as its union with `original`.
    pub fn add(&mut self, label: &str, original: &PathCorpus, new: &PathCorpus) {
        let union = coverage_of([original, new]);
        self.rows.push(CoverageRow { label: label.into(), basic_blocks_new: union.basic_blocks, paths_new: union.paths });
    }

    pub fn row(&self, label: &str) -> Option<&CoverageRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn blocks_delta(&self, row: &CoverageRow) -> usize {
        row.basic_blocks_new - self.basic_blocks_original
    }

    pub fn paths_delta(&self, row: &CoverageRow) -> usize {
        row.paths_new - self.paths_original
    }

    /// Aligned text table: one `#`/`%` column pair per row label.
    pub fn render(&self) -> String {
        let mut header1 = vec![String::new(), "Original".to_string()];
        let mut header2 = vec![String::new(), String::new()];
        let mut blocks = vec!["basic blocks".to_string(), thousands(self.basic_blocks_original)];
        let mut paths = vec!["execution paths".to_string(), thousands(self.paths_original)];
        for row in &self.rows {
            header1.extend([row.label.clone(), String::new()]);
            header2.extend(["#".to_string(), "%".to_string()]);
            let db = self.blocks_delta(row);
            let dp = self.paths_delta(row);
            blocks.extend([format!("+{db}"), percent_delta(self.basic_blocks_original, db)]);
            paths.extend([format!("+{dp}"), percent_delta(self.paths_original, dp)]);
        }
        let table = [header1, header2, blocks, paths];
        let widths: Vec<usize> = (0..table[0].len()).map(|c| table.iter().map(|r| r[c].len()).max().unwrap_or(0)).collect();
        let mut out = String::new();
        for row in &table {
            let mut line = String::new();
            for (cell, w) in row.iter().zip(&widths) {
                let _ = write!(line, "{cell:<w$}  ");
            }
            out.push_str(line.trim_end());
            out.push('\n');
        }
        out
    }
}

/// Single-row report comparing `new ∪ original` against `original`.
pub fn coverage_delta(original: &PathCorpus, new: &PathCorpus) -> CoverageReport {
    let mut report = CoverageReport::new(coverage_of([original]));
    report.add("new", original, new);
    report
}

/// `100 × delta / original`, rounded half-up to two decimals, as `+x.yy%`.
pub fn percent_delta(original: usize, delta: usize) -> String {
    if original == 0 {
        return "n/a".into();
    }
    let (num, den) = (delta as u128 * 10_000, original as u128);
    let mut hundredths = num / den;
    if 2 * (num % den) >= den {
        hundredths += 1;
    }
    format!("+{}.{:02}%", hundredths / 100, hundredths % 100)
}

fn thousands(n: usize) -> String {
    let digits = n.to_string();
    let mut out = String::new();
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(c);
    }
    out
}
