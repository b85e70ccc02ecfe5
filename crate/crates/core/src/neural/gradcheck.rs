//! Finite-difference verification of analytic gradients.

use rand::Rng;

use super::Parameters;

pub const STEP: f64 = 1e-4;
/// Models with more parameters than this are too slow to check element-wise.
pub const MAX_PARAMS: usize = 10_000;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheck {
    pub max_relative_error: f64,
    pub worst_tensor: String,
    pub worst_index: usize,
    /// Analytic and numeric derivative at the worst element.
    pub worst_pair: (f64, f64),
    pub checked: usize,
}

/// `|a - n| / max(|a|, |n|, 1e-8)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Redraws every parameter uniformly from `[-scale, scale]`.
///
/// The default initialisation keeps deep-layer gradients near 1e-9, where
/// the roundoff in the loss swamps a finite difference; checks run on
/// models with larger weights.
pub fn randomize<M: Parameters>(model: &mut M, scale: f64, rng: &mut impl Rng) {
    for t in model.tensors_mut() {
        for v in t.data_mut() {
            *v = rng.gen_range(-scale..=scale);
        }
    }
}

/// Compares the gradient produced by `loss_and_grad` with central finite
/// differences of its loss, element by element.
///
/// `loss_and_grad(model, grads)` must return the loss and accumulate the
/// gradient into `grads` (which starts zeroed). It must be deterministic.
pub fn gradient_check<M, F>(model: &M, loss_and_grad: F) -> GradCheck
where
    M: Parameters + Clone,
    F: Fn(&M, &mut M) -> f64,
{
    assert!(
        model.param_count() < MAX_PARAMS,
        "{} parameters is too many for a finite-difference check",
        model.param_count()
    );
    let mut analytic = model.zeros_like();
    loss_and_grad(model, &mut analytic);

    let names: Vec<String> = model.named_tensors().into_iter().map(|(n, _)| n).collect();
    let mut probe = model.clone();
    let mut report = GradCheck {
        max_relative_error: 0.0,
        worst_tensor: String::new(),
        worst_index: 0,
        worst_pair: (0.0, 0.0),
        checked: 0,
    };
    let loss_at = |m: &M| loss_and_grad(m, &mut m.zeros_like());
    for (t, name) in names.iter().enumerate() {
        let len = analytic.tensors()[t].data().len();
        for i in 0..len {
            let original = probe.tensors_mut()[t].data()[i];
            probe.tensors_mut()[t].data_mut()[i] = original + STEP;
            let plus = loss_at(&probe);
            probe.tensors_mut()[t].data_mut()[i] = original - STEP;
            let minus = loss_at(&probe);
            probe.tensors_mut()[t].data_mut()[i] = original;

            let numeric = (plus - minus) / (2.0 * STEP);
            let a = analytic.tensors()[t].data()[i];
            let err = relative_error(a, numeric);
            if err > report.max_relative_error {
                report.max_relative_error = err;
                report.worst_pair = (a, numeric);
                report.worst_tensor.clone_from(name);
                report.worst_index = i;
            }
            report.checked += 1;
        }
    }
    report
}

/// Parameter scale of the models drawn by [`run_trials`].
pub const TRIAL_SCALE: f64 = 1.0;

/// Worst relative error per model family over a batch of random trials.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialSummary {
    pub trials: usize,
    pub lm_worst: f64,
    pub seq2seq_worst: f64,
    pub lm_failures: usize,
    pub seq2seq_failures: usize,
}

impl TrialSummary {
    pub fn passed(&self) -> bool {
        self.lm_failures == 0 && self.seq2seq_failures == 0
    }
}

/// Checks `trials` random small language models and encoder-decoders,
/// trial `t` drawing everything from rng seed `seed + t`. Seq2Seq losses
/// run without dropout so the loss is a deterministic function of the
/// parameters.
pub fn run_trials(trials: usize, seed: u64, tolerance: f64) -> TrialSummary {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::seq2seq::{Seq2Seq, Seq2SeqConfig};
    use super::RnnLM;

    let mut summary =
        TrialSummary { trials, lm_worst: 0.0, seq2seq_worst: 0.0, lm_failures: 0, seq2seq_failures: 0 };
    for t in 0..trials as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(t));

        let mut lm = RnnLM::new(5, 8, rng.gen());
        randomize(&mut lm, TRIAL_SCALE, &mut rng);
        let seq: Vec<usize> = (0..6).map(|_| rng.gen_range(0..5)).collect();
        let e = gradient_check(&lm, |m, g| m.loss_and_grad(&seq, 64, g)).max_relative_error;
        summary.lm_worst = summary.lm_worst.max(e);
        summary.lm_failures += usize::from(!(e < tolerance));

        let mut s2s = Seq2Seq::new(&Seq2SeqConfig::new(5, 5, 8), rng.gen()).expect("valid config");
        randomize(&mut s2s, TRIAL_SCALE, &mut rng);
        let src: Vec<usize> = (0..4).map(|_| rng.gen_range(0..5)).collect();
        let tgt: Vec<usize> = (0..4).map(|_| rng.gen_range(0..5)).collect();
        let e = gradient_check(&s2s, |m, g| m.loss_and_grad(&src, &tgt, None, g)).max_relative_error;
        summary.seq2seq_worst = summary.seq2seq_worst.max(e);
        summary.seq2seq_failures += usize::from(!(e < tolerance));
    }
    summary
}
