//! Runs every stage on a toy seed set in a scratch work directory, then
//! prints the report and the start of the manifest.
//!
//! ```text
//! cargo run --release --example pipeline -- [RNG SEED]
//! ```

use pathseed::pipeline::fixture::{toy_seed_fixture, write_seeds};
use pathseed::pipeline::{cmd_pipeline, PipelineConfig};

fn main() {
    let seed: u64 = std::env::args().nth(1).map_or(0, |s| s.parse().expect("u64 seed"));
    let root = std::env::temp_dir().join("pathseed-pipeline-example");
    let _ = std::fs::remove_dir_all(&root);
    write_seeds(&root.join("seeds"), &toy_seed_fixture(20, 0)).expect("write seeds");

    let mut cfg = PipelineConfig { seed_dir: root.join("seeds"), work_dir: root.join("work"), ..Default::default() };
    cfg.apply_text(&format!(
        "seed = {seed}\npath-hidden = 64\ntranslator-hidden = 64\npath-epochs = 40\ntranslator-epochs = 100\ncount = 20\n"
    ))
    .expect("valid settings");

    match cmd_pipeline(&cfg) {
        Ok(outcome) => {
            print!("{}", outcome.report_text());
            println!("\nmanifest ({} files):", outcome.manifest.lines().count());
            for line in outcome.manifest.lines().take(5) {
                println!("  {line}");
            }
        }
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(e.exit_code());
        }
    }
}
