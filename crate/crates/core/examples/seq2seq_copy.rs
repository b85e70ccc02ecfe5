//! Trains the encoder-decoder to copy random sequences and reports exact
//! match accuracy on training and held-out sequences.
//!
//! ```text
//! cargo run --release --example seq2seq_copy -- [EPOCHS]
//! ```

use pathseed::neural::seq2seq::{seq2seq_train_with, Seq2Seq, Seq2SeqConfig};
use pathseed::neural::TrainConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const VOCAB: usize = 16;
const START: usize = VOCAB;
const END: usize = VOCAB + 1;

fn sequences(n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    (0..n).map(|_| (0..rng.gen_range(1..=20)).map(|_| rng.gen_range(0..VOCAB)).collect()).collect()
}

fn accuracy(model: &Seq2Seq, data: &[Vec<usize>]) -> f64 {
    let hits = data.iter().filter(|s| model.greedy_decode(s, START, END, 80).unwrap() == **s).count();
    hits as f64 / data.len() as f64
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let epochs: usize = std::env::args().nth(1).map_or(Ok(60), |s| s.parse())?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let train = sequences(200, &mut rng);
    let test = sequences(200, &mut rng);
    let pairs: Vec<(Vec<usize>, Vec<usize>)> = train
        .iter()
        .map(|s| (s.clone(), [vec![START], s.clone(), vec![END]].concat()))
        .collect();

    let mut model = Seq2Seq::new(&Seq2SeqConfig::new(VOCAB, VOCAB + 2, 64), 0)?;
    let cfg = TrainConfig { epochs, ..TrainConfig::new(0) };
    seq2seq_train_with(&mut model, &pairs, &cfg, |epoch, m| {
        if (epoch + 1) % 20 == 0 {
            println!("epoch {:>4}: train {:.3} held-out {:.3}", epoch + 1, accuracy(m, &train), accuracy(m, &test));
        }
    })?;
    println!("final: train {:.3} held-out {:.3}", accuracy(&model, &train), accuracy(&model, &test));
    Ok(())
}
