//! Deterministic seed files for the toy target.

use std::collections::HashSet;
use std::fs;
use std::io;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::pdf::{assemble_pdf, select_root};
use crate::toy::{run_toy_target, ObjectShape, MAX_OBJECTS};
use crate::trace::BlockId;

/// `count` assembled PDF seeds named `seed-NN`, each exercising a distinct
/// toy-target path. Every seed has 1 to [`MAX_OBJECTS`] objects.
///
/// # Panics
/// If `count` exceeds the number of distinct paths reachable this way.
pub fn toy_seed_fixture(count: usize, seed: u64) -> Vec<(String, Vec<u8>)> {
    let shapes = ObjectShape::all();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen: HashSet<Vec<BlockId>> = HashSet::new();
    let mut out = Vec::with_capacity(count);
    let mut tries = 0;
    while out.len() < count {
        tries += 1;
        assert!(tries < 100 * count + 1000, "cannot find {count} distinct fixture paths");
        let n = rng.gen_range(1..=MAX_OBJECTS);
        let bodies: Vec<String> = (0..n).map(|_| shapes.choose(&mut rng).expect("shapes").body()).collect();
        let pdf = assemble_pdf(&bodies, select_root(&bodies)).expect("non-empty");
        if seen.insert(run_toy_target(&pdf).blocks().to_vec()) {
            out.push((format!("seed-{:02}", out.len()), pdf));
        }
    }
    out
}

/// Writes each seed as `<name>.pdf` into `dir`.
pub fn write_seeds(dir: &Path, seeds: &[(String, Vec<u8>)]) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    for (name, bytes) in seeds {
        fs::write(dir.join(format!("{name}.pdf")), bytes)?;
    }
    Ok(())
}
