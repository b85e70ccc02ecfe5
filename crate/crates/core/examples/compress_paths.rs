//! Compresses long synthetic paths built from repeated motifs until every
//! path fits the length bound, then expands them back.

use pathseed::pathcomp::{compress_paths, decompress};
use pathseed::trace::{BlockId, ExecutionPath};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let max_len = 300;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let block = |id: u32, exit: bool| BlockId::new(0x1000 + id, false, exit);
    let motifs: Vec<Vec<BlockId>> =
        (0..4).map(|m| (0..12).map(|i| block(m * 16 + i, i == 11)).collect()).collect();

    let paths: Vec<ExecutionPath> = (0..6)
        .map(|p| {
            let mut blocks = vec![BlockId::new(0x0fff, true, false)];
            while blocks.len() < 1500 {
                if rng.gen_bool(0.8) {
                    blocks.extend(&motifs[rng.gen_range(0..motifs.len())]);
                } else {
                    blocks.push(block(64 + rng.gen_range(0..20), false));
                }
            }
            ExecutionPath::new(blocks).map(|e| e.with_source(format!("path-{p}")))
        })
        .collect::<Result<_, _>>()?;

    let (compressed, dict) = compress_paths(&paths, max_len)?;
    println!("{} super-block rules", dict.len());
    for rule in dict.rules().iter().take(5) {
        let (a, b) = rule.expansion;
        println!("  S{} -> {a} {b}", rule.super_id);
    }
    for (path, c) in paths.iter().zip(&compressed) {
        let back = decompress(c, &dict)?;
        assert_eq!(back.blocks(), path.blocks());
        println!("{}: {} blocks -> {} tokens", c.origin.as_deref().unwrap_or("?"), path.len(), c.len());
    }
    Ok(())
}
