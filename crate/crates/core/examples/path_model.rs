//! Trains the path language model on toy-target paths and generates new
//! paths with both sampling strategies.

use pathseed::neural::TrainConfig;
use pathseed::pathcomp::{compress_corpus, decompress};
use pathseed::pathgen::{generate_novel_corpus, train_path_model, GenerationConfig, SamplingStrategy};
use pathseed::pipeline::fixture::toy_seed_fixture;
use pathseed::toy::run_toy_target;
use pathseed::trace::PathCorpus;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut corpus = PathCorpus::new();
    for (name, pdf) in toy_seed_fixture(20, 0) {
        corpus.add(run_toy_target(&pdf).with_source(name));
    }
    let (compressed, dict) = compress_corpus(&corpus, 300)?;

    let train = TrainConfig { epochs: 40, ..TrainConfig::new(1) };
    let (model, vocab, log) = train_path_model(&compressed, 64, &train)?;
    for (epoch, loss) in log.epoch_losses.iter().enumerate().step_by(10) {
        println!("epoch {:>3}: {loss:.4} nats/token", epoch + 1);
    }

    for strategy in [SamplingStrategy::Sample, SamplingStrategy::SampleFunction] {
        let cfg = GenerationConfig::new(strategy, 11);
        let novel = generate_novel_corpus(&model, &vocab, &corpus, &dict, &cfg, 5)?;
        println!("{}: {} novel paths in {} attempts", strategy.label(), novel.paths.len(), novel.total_attempts());
        for path in &novel.paths {
            println!("  {} blocks", decompress(path, &dict)?.len());
        }
    }
    Ok(())
}
