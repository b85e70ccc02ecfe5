//! Trains the path-to-objects translator on toy seeds and translates their
//! own paths back into PDF files.

use pathseed::neural::TrainConfig;
use pathseed::pathcomp::{compress_paths, compress_single};
use pathseed::pipeline::fixture::toy_seed_fixture;
use pathseed::toy::run_toy_target;
use pathseed::translator::{build_parallel_corpus, default_max_decode_len, encode_source, train_translator, translate};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seeds = toy_seed_fixture(4, 2);
    let paths: Vec<_> = seeds.iter().map(|(name, pdf)| run_toy_target(pdf).with_source(name.clone())).collect();
    let (_, dict) = compress_paths(&paths, 300)?;
    let corpus = build_parallel_corpus(&seeds, &paths, &dict, 64)?;
    println!("{} pairs, object vocabulary of {}", corpus.pairs.len(), corpus.object_vocab.len());

    let cfg = TrainConfig { epochs: 300, batch_size: 1, ..TrainConfig::new(3) };
    let (model, log) = train_translator(&corpus, 64, &cfg)?;
    println!("final training loss {:.4}", log.final_loss().unwrap_or(f64::NAN));

    let cap = default_max_decode_len(&corpus);
    for ((name, _), path) in seeds.iter().zip(&paths) {
        let source = encode_source(&compress_single(path, &dict), &corpus.source_vocab);
        let result = translate(&model, &source, cap, &corpus.object_vocab)?;
        println!("{name}: {} objects, well-formed {}", result.bodies.len(), result.well_formed);
        for body in &result.bodies {
            println!("  {}", String::from_utf8_lossy(body));
        }
    }
    Ok(())
}
