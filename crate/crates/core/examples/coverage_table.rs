//! Renders the coverage comparison table, first from fixed counts and then
//! from an evaluation of two seed directories on the toy target.

use pathseed::pipeline::coverage::{CoverageReport, CoverageRow};
use pathseed::pipeline::evaluate_toy;
use pathseed::pipeline::fixture::{toy_seed_fixture, write_seeds};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let report = CoverageReport {
        basic_blocks_original: 4548,
        paths_original: 14522,
        rows: vec![
            CoverageRow { label: "C_s".into(), basic_blocks_new: 4548 + 113, paths_new: 14522 + 1008 },
            CoverageRow { label: "C_sf".into(), basic_blocks_new: 4548 + 109, paths_new: 14522 + 3528 },
        ],
    };
    print!("{}", report.render());

    let root = std::env::temp_dir().join("pathseed-coverage-example");
    let _ = std::fs::remove_dir_all(&root);
    let all = toy_seed_fixture(30, 5);
    write_seeds(&root.join("original"), &all[..20])?;
    write_seeds(&root.join("extra"), &all[20..])?;
    let eval = evaluate_toy(&root.join("original"), &[("extra".into(), root.join("extra"))])?;
    println!();
    print!("{}", eval.render());
    Ok(())
}
