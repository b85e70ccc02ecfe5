//! Records execution paths of the toy target and round-trips them through
//! the trace file format and an on-disk corpus.

use pathseed::pipeline::fixture::toy_seed_fixture;
use pathseed::toy::{run_toy_target, ToyTarget};
use pathseed::trace::{ingest_trace_file, PathCorpus};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seeds = toy_seed_fixture(5, 0);
    let (name, pdf) = &seeds[0];
    let path = run_toy_target(pdf).with_source(name.clone());
    let text = path.to_trace();
    println!("{name} exercises {} blocks; first lines of its trace:", path.len());
    for line in text.lines().take(6) {
        println!("  {line}");
    }
    assert_eq!(ingest_trace_file(text.as_bytes())?.blocks(), path.blocks());

    let mut corpus = PathCorpus::new();
    for (name, pdf) in &seeds {
        corpus.add(run_toy_target(pdf).with_source(name.clone()));
    }
    // A duplicate input adds nothing.
    let added = corpus.add(run_toy_target(pdf));
    corpus.extend_universe(ToyTarget::new().blocks());
    println!("corpus: {} distinct paths (duplicate added: {added})", corpus.len());
    println!("universe: {} blocks, {} covered", corpus.universe().count(), corpus.covered_blocks().len());

    let dir = std::env::temp_dir().join("pathseed-trace-example");
    let _ = std::fs::remove_dir_all(&dir);
    corpus.save_dir(&dir)?;
    let back = PathCorpus::load_dir(&dir)?;
    println!("reloaded {} paths from {}", back.len(), dir.display());
    Ok(())
}
