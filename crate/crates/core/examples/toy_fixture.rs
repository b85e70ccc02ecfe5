//! Writes a deterministic set of toy-target seed PDFs and prints the path
//! each one exercises.
//!
//! ```text
//! cargo run --example toy_fixture -- [DIR] [COUNT] [SEED]
//! ```

use std::path::PathBuf;

use pathseed::pipeline::fixture::{toy_seed_fixture, write_seeds};
use pathseed::toy::{feasible_inputs, run_toy_target};

fn main() -> std::io::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "toy-seeds".into()));
    let count: usize = args.next().map_or(20, |s| s.parse().expect("COUNT"));
    let seed: u64 = args.next().map_or(0, |s| s.parse().expect("SEED"));

    let seeds = toy_seed_fixture(count, seed);
    write_seeds(&dir, &seeds)?;
    for (name, bytes) in &seeds {
        let path = run_toy_target(bytes);
        println!("{name}: {} bytes, {} blocks", bytes.len(), path.len());
    }
    println!("wrote {count} seeds to {}", dir.display());
    println!("the toy target has {} feasible paths", feasible_inputs().len());
    Ok(())
}
