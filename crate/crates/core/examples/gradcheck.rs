//! Compares analytic gradients with central finite differences on random
//! small models, and shows a single check in detail.

use pathseed::neural::gradcheck::{gradient_check, randomize, run_trials, TRIAL_SCALE};
use pathseed::neural::RnnLM;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut model = RnnLM::new(5, 8, 0);
    randomize(&mut model, TRIAL_SCALE, &mut rng);
    let seq = [0, 3, 1, 4, 2, 2];
    let report = gradient_check(&model, |m, g| m.loss_and_grad(&seq, 64, g));
    println!(
        "one language model: {} parameters checked, worst {:.2e} in {}[{}] (analytic {:.6e}, numeric {:.6e})",
        report.checked,
        report.max_relative_error,
        report.worst_tensor,
        report.worst_index,
        report.worst_pair.0,
        report.worst_pair.1
    );

    let summary = run_trials(20, 0, 1e-4);
    println!("{} trials: language model worst {:.2e}, seq2seq worst {:.2e}", summary.trials, summary.lm_worst, summary.seq2seq_worst);
    println!("failures over 1e-4: {} and {}", summary.lm_failures, summary.seq2seq_failures);
}
