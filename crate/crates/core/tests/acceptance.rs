//! Acceptance suite: prints one PASS/FAIL line per criterion.
//!
//! This target has no test harness; it always exits successfully so that a
//! criterion known to be unattainable is reported rather than hidden. Set
//! `ACCEPTANCE_ONLY=2,5` to run a subset.

use std::collections::HashSet;
use std::panic;
use std::path::Path;
use std::time::Instant;

use pathseed::neural::gradcheck::run_trials;
use pathseed::neural::seq2seq::{seq2seq_train, Seq2Seq, Seq2SeqConfig};
use pathseed::neural::TrainConfig;
use pathseed::pathcomp::{compress_paths, compress_single, decompress, CompressedPath};
use pathseed::pathgen::{generate_path, train_path_model, GenerationConfig, SamplingStrategy};
use pathseed::pdf::{assemble_pdf, extract_objects, is_well_formed, select_root};
use pathseed::pipeline::fixture::{toy_seed_fixture, write_seeds};
use pathseed::pipeline::{cmd_pipeline, percent_delta, Evaluation, PipelineConfig};
use pathseed::toy::feasible_inputs;
use pathseed::trace::{BlockId, ExecutionPath};
use pathseed::translator::{
    build_parallel_corpus, default_max_decode_len, encode_source, normalize_body, train_translator, translate,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Gradient check: relative error bound and trials per model family.
const GRAD_TOLERANCE: f64 = 1e-4;
const GRAD_TRIALS: usize = 20;
/// Compression: corpora, length bound.
const COMPRESS_CORPORA: usize = 1000;
const MAX_LEN: usize = 300;
/// Path-model memorization loss bound (nats per predicted token).
const MEMO_LOSS: f64 = 0.1;
const MEMO_EPOCHS: usize = 1000;
/// Copy task: required held-out exact-match accuracy.
const COPY_ACCURACY: f64 = 0.95;
const COPY_EPOCHS: usize = 600;
/// Toy pipeline: runs, and how many must add a path.
const PIPELINE_RUNS: u64 = 10;
const PIPELINE_WINS: usize = 8;
const MAX_SEED_COVERAGE: f64 = 0.60;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn main() {
    let only: Option<HashSet<usize>> =
        std::env::var("ACCEPTANCE_ONLY").ok().map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let wanted = |n: usize| only.as_ref().is_none_or(|s| s.contains(&n));
    let scratch = tempfile::tempdir().expect("scratch dir");
    let mut first_manifest = None;

    for n in 1..=9 {
        if !wanted(n) {
            continue;
        }
        let start = Instant::now();
        let result = panic::catch_unwind(panic::AssertUnwindSafe(|| match n {
            1 => percentages(),
            2 => gradients(),
            3 => compression(),
            4 => path_memorization(),
            5 => copy_task(),
            6 => translator_memorization(),
            7 => pdf_round_trip(),
            8 => {
                let (o, manifest) = toy_pipeline(scratch.path());
                first_manifest = manifest;
                o
            }
            _ => determinism(scratch.path(), first_manifest.as_deref()),
        }));
        let o = result.unwrap_or_else(|_| outcome(false, "panicked"));
        println!(
            "criterion {n}: {} ({:.1}s) {}",
            if o.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            o.detail
        );
    }
}

fn percentages() -> Outcome {
    let cells = [(4548, 113, "+2.48%"), (14522, 3528, "+24.30%")];
    let got: Vec<String> = cells.iter().map(|&(o, d, _)| percent_delta(o, d)).collect();
    let pass = cells.iter().zip(&got).all(|(c, g)| c.2 == g);
    let detail = cells
        .iter()
        .zip(&got)
        .map(|(&(o, d, want), g)| format!("{o}+{d}: {g} (expected {want})"))
        .collect::<Vec<_>>()
        .join(", ");
    outcome(pass, detail)
}

fn gradients() -> Outcome {
    let s = run_trials(GRAD_TRIALS, 0, GRAD_TOLERANCE);
    outcome(
        s.passed(),
        format!(
            "lm worst {:.2e} ({} over), seq2seq worst {:.2e} ({} over), {} trials each, tolerance {GRAD_TOLERANCE:e}",
            s.lm_worst, s.lm_failures, s.seq2seq_worst, s.seq2seq_failures, s.trials
        ),
    )
}

/// A corpus of 1 to 4 paths. Motif-rich paths are at least 95% copies of a
/// few repeated motifs; the others are random blocks with motifs spliced in.
fn random_corpus(rng: &mut ChaCha8Rng) -> Vec<(ExecutionPath, bool)> {
    let alphabet = rng.gen_range(10..=200u32);
    let block = |id: u32| BlockId::new(id, id % 11 == 0, id % 7 == 0);
    let motifs: Vec<Vec<BlockId>> = (0..rng.gen_range(2..=6))
        .map(|_| (0..rng.gen_range(4..=16)).map(|_| block(rng.gen_range(0..alphabet))).collect())
        .collect();
    (0..rng.gen_range(1..=4))
        .map(|_| {
            let len = rng.gen_range(10..=2000);
            let rich = rng.gen_bool(0.5);
            let motif_rate = if rich { 1.0 } else { rng.gen_range(0.0..0.5) };
            let mut blocks = Vec::with_capacity(len + 16);
            let mut noise = 0;
            while blocks.len() < len {
                if rng.gen_bool(motif_rate) {
                    blocks.extend(motifs.choose(rng).expect("motifs"));
                } else {
                    blocks.push(block(rng.gen_range(0..alphabet)));
                    noise += 1;
                }
                if rich && rng.gen_bool(0.02) {
                    blocks.push(block(rng.gen_range(0..alphabet)));
                    noise += 1;
                }
            }
            blocks.truncate(len);
            blocks[0].fn_entry = true;
            let rich = rich && noise * 20 <= len;
            (ExecutionPath::new(blocks).expect("non-empty"), rich)
        })
        .collect()
}

fn compression() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut paths_seen, mut rich_seen, mut mismatches, mut too_long, mut worst_rich) = (0, 0, 0, 0, 0);
    for _ in 0..COMPRESS_CORPORA {
        let corpus = random_corpus(&mut rng);
        let paths: Vec<ExecutionPath> = corpus.iter().map(|(p, _)| p.clone()).collect();
        let (compressed, dict) = compress_paths(&paths, MAX_LEN).expect("compress");
        for ((path, rich), c) in corpus.iter().zip(&compressed) {
            paths_seen += 1;
            if decompress(c, &dict).map(|d| d.blocks() != path.blocks()).unwrap_or(true) {
                mismatches += 1;
            }
            if *rich {
                rich_seen += 1;
                worst_rich = worst_rich.max(c.len());
                too_long += usize::from(c.len() >= MAX_LEN);
            }
        }
    }
    outcome(
        mismatches == 0 && too_long == 0,
        format!(
            "{COMPRESS_CORPORA} corpora, {paths_seen} paths, {mismatches} round-trip mismatches; \
             {rich_seen} motif-rich paths, longest {worst_rich} tokens, {too_long} at or over {MAX_LEN}"
        ),
    )
}

/// Twenty paths of 55 to 60 blocks: a unique start block followed by a
/// seeded walk over 28 shared blocks.
fn memorization_corpus() -> Vec<ExecutionPath> {
    let shared = |k: u32| BlockId::new(0x2000 + k, k % 7 == 0, k % 7 == 6);
    (0..20u32)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + u64::from(i));
            let len = rng.gen_range(55..=60);
            let mut blocks = vec![BlockId::new(0x1000 + i, true, false)];
            blocks.extend((1..len).map(|_| shared(rng.gen_range(0..28))));
            ExecutionPath::new(blocks).expect("non-empty").with_source(format!("p{i:02}"))
        })
        .collect()
}

fn path_memorization() -> Outcome {
    let paths = memorization_corpus();
    let compressed: Vec<CompressedPath> = paths.iter().map(CompressedPath::from_path).collect();
    let cfg = TrainConfig { epochs: MEMO_EPOCHS, batch_size: 1, ..TrainConfig::new(4) };
    let (model, vocab, log) = train_path_model(&compressed, 64, &cfg).expect("train");
    let loss = log.final_loss().unwrap_or(f64::INFINITY);
    let (_, dict) = compress_paths(&paths, MAX_LEN).expect("dict");
    let gen = GenerationConfig::new(SamplingStrategy::SampleFunction, 9);
    let exact = compressed
        .iter()
        .filter(|c| generate_path(&model, &vocab, c.tokens[0], &gen, &dict).is_ok_and(|g| g.tokens == c.tokens))
        .count();
    outcome(
        loss < MEMO_LOSS && exact == paths.len(),
        format!(
            "vocab {} (incl. sentinels), final loss {loss:.4} nats/token (bound {MEMO_LOSS}), {exact}/{} reproduced",
            vocab.len(),
            paths.len()
        ),
    )
}

fn copy_task() -> Outcome {
    const VOCAB: usize = 16;
    let (start, end) = (VOCAB, VOCAB + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut sequences = |n: usize| -> Vec<Vec<usize>> {
        (0..n).map(|_| (0..rng.gen_range(1..=20)).map(|_| rng.gen_range(0..VOCAB)).collect()).collect()
    };
    let train = sequences(200);
    let held_out = sequences(200);
    let pairs: Vec<(Vec<usize>, Vec<usize>)> =
        train.iter().map(|s| (s.clone(), [vec![start], s.clone(), vec![end]].concat())).collect();
    let mut model = Seq2Seq::new(&Seq2SeqConfig::new(VOCAB, VOCAB + 2, 64), 0).expect("model");
    let cfg = TrainConfig { epochs: COPY_EPOCHS, ..TrainConfig::new(0) };
    seq2seq_train(&mut model, &pairs, &cfg).expect("train");
    let accuracy = |data: &[Vec<usize>]| {
        data.iter().filter(|s| model.greedy_decode(s, start, end, 80).is_ok_and(|d| d == **s)).count() as f64
            / data.len() as f64
    };
    let (train_acc, test_acc) = (accuracy(&train), accuracy(&held_out));
    outcome(
        test_acc >= COPY_ACCURACY,
        format!("{COPY_EPOCHS} epochs: train {train_acc:.3}, held-out {test_acc:.3} (bound {COPY_ACCURACY})"),
    )
}

fn translator_memorization() -> Outcome {
    let seeds = toy_seed_fixture(5, 2);
    let paths: Vec<ExecutionPath> =
        seeds.iter().map(|(name, pdf)| pathseed::toy::run_toy_target(pdf).with_source(name.clone())).collect();
    let (_, dict) = compress_paths(&paths, MAX_LEN).expect("dict");
    let corpus = build_parallel_corpus(&seeds, &paths, &dict, 64).expect("corpus");
    let cfg = TrainConfig { epochs: 600, batch_size: 1, ..TrainConfig::new(3) };
    let (model, log) = train_translator(&corpus, 64, &cfg).expect("train");
    let cap = default_max_decode_len(&corpus);
    let mut exact = 0;
    for ((_, pdf), path) in seeds.iter().zip(&paths) {
        let source = encode_source(&compress_single(path, &dict), &corpus.source_vocab);
        let result = translate(&model, &source, cap, &corpus.object_vocab).expect("translate");
        let want: Vec<Vec<u8>> = extract_objects(pdf).objects.iter().map(|o| normalize_body(&o.body)).collect();
        let got: Vec<Vec<u8>> = result.bodies.iter().map(|b| normalize_body(b)).collect();
        exact += usize::from(want == got && result.well_formed);
    }
    outcome(
        exact == seeds.len(),
        format!(
            "{exact}/{} pairs reproduced and well-formed, final loss {:.4}",
            seeds.len(),
            log.final_loss().unwrap_or(f64::NAN)
        ),
    )
}

fn pdf_value(rng: &mut ChaCha8Rng, depth: u32) -> String {
    let pick = if depth > 2 { rng.gen_range(0..5) } else { rng.gen_range(0..8) };
    match pick {
        0 => rng.gen_range(-500i32..5000).to_string(),
        1 => format!("{:.2}", rng.gen_range(-10.0..10.0)),
        2 => format!("/N{}", rng.gen_range(0..100)),
        3 => {
            let words = ["endobj", "obj", "(nested)", "\\)", "a b", "x", "stream", "%not a comment"];
            let inner: Vec<&str> = (0..rng.gen_range(0..4)).map(|_| *words.choose(rng).expect("words")).collect();
            format!("({})", inner.join(" "))
        }
        4 => format!("{} 0 R", rng.gen_range(1..20)),
        5 => format!("<{:x}>", rng.gen::<u32>()),
        6 => {
            let items: Vec<String> = (0..rng.gen_range(0..4)).map(|_| pdf_value(rng, depth + 1)).collect();
            format!("[{}]", items.join(" "))
        }
        _ => {
            let entries: Vec<String> = (0..rng.gen_range(0..4))
                .map(|k| format!("/K{k} {}", pdf_value(rng, depth + 1)))
                .collect();
            format!("<< {} >>", entries.join(if rng.gen_bool(0.3) { "\n" } else { " " }))
        }
    }
}

fn pdf_body(rng: &mut ChaCha8Rng) -> String {
    match rng.gen_range(0..6) {
        0 => "<< /Type /Catalog /Pages 2 0 R >>".into(),
        1 => {
            let data: Vec<u8> = (0..rng.gen_range(0..40)).map(|_| rng.gen_range(b' '..=b'~')).collect();
            let mut data = String::from_utf8(data).expect("ascii");
            if rng.gen_bool(0.5) {
                data.push_str(" endobj 9 0 obj ");
            }
            format!("<< /Length {} >>\nstream\n{data}\nendstream", data.len())
        }
        _ => pdf_value(rng, 0),
    }
}

fn pdf_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut round_trip_failures, mut invalid) = (0, 0);
    let mut samples = Vec::new();
    for _ in 0..100 {
        let bodies: Vec<String> = (0..rng.gen_range(1..=6)).map(|_| pdf_body(&mut rng)).collect();
        let pdf = assemble_pdf(&bodies, select_root(&bodies)).expect("assemble");
        let back: Vec<Vec<u8>> = extract_objects(&pdf).objects.into_iter().map(|o| o.body).collect();
        let want: Vec<&[u8]> = bodies.iter().map(|b| b.as_bytes()).collect();
        round_trip_failures += usize::from(back.iter().map(Vec::as_slice).ne(want.iter().copied()));
        invalid += usize::from(!is_well_formed(&pdf).ok);
        samples.push(pdf);
    }

    let mut panics = 0;
    let previous_hook = panic::take_hook();
    panic::set_hook(Box::new(|_| {}));
    for i in 0..10_000 {
        let blob: Vec<u8> = if i % 2 == 0 {
            (0..rng.gen_range(0..600)).map(|_| rng.gen()).collect()
        } else {
            let mut b = samples[i % samples.len()].clone();
            for _ in 0..rng.gen_range(1..8) {
                let at = rng.gen_range(0..b.len());
                match rng.gen_range(0..3) {
                    0 => b[at] = rng.gen(),
                    1 => b.truncate(at.max(1)),
                    _ => b.insert(at, *b"()<>[]/%\\\n".choose(&mut rng).expect("bytes")),
                }
            }
            b
        };
        panics += usize::from(panic::catch_unwind(|| extract_objects(&blob)).is_err());
    }
    panic::set_hook(previous_hook);

    outcome(
        round_trip_failures == 0 && invalid == 0 && panics == 0,
        format!("100 body lists: {round_trip_failures} round-trip failures, {invalid} not well-formed; 10000 blobs: {panics} panics"),
    )
}

fn pipeline_config(root: &Path, work: &str, seed: u64) -> PipelineConfig {
    let mut cfg =
        PipelineConfig { seed_dir: root.join("seeds"), work_dir: root.join(work), ..Default::default() };
    cfg.apply_text(&format!(
        "seed = {seed}\npath-hidden = 64\ntranslator-hidden = 64\npath-epochs = 40\ntranslator-epochs = 100\ncount = 20\n"
    ))
    .expect("settings");
    cfg
}

fn run_won(eval: &Evaluation) -> (bool, bool) {
    let gained = eval.report.rows.iter().any(|r| eval.report.paths_delta(r) >= 1);
    let both_novel = eval.stats.len() == 2 && eval.stats.iter().all(|s| s.novel_well_formed >= 1);
    (gained, both_novel)
}

fn toy_pipeline(scratch: &Path) -> (Outcome, Option<String>) {
    let seeds = toy_seed_fixture(20, 0);
    write_seeds(&scratch.join("seeds"), &seeds).expect("seeds");
    let feasible = feasible_inputs().len();
    let share = seeds.len() as f64 / feasible as f64;

    let mut wins = 0;
    let mut summary = Vec::new();
    let mut manifest = None;
    for seed in 0..PIPELINE_RUNS {
        let cfg = pipeline_config(scratch, &format!("run-{seed}"), seed);
        match cmd_pipeline(&cfg) {
            Ok(out) => {
                let eval = out.evaluation.expect("toy evaluation");
                let (gained, both_novel) = run_won(&eval);
                wins += usize::from(gained && both_novel);
                let deltas: Vec<String> =
                    eval.report.rows.iter().map(|r| format!("+{}", eval.report.paths_delta(r))).collect();
                summary.push(deltas.join("/"));
                if seed == 0 {
                    manifest = Some(out.manifest);
                }
            }
            Err(e) => summary.push(format!("error: {e}")),
        }
    }
    let pass = wins >= PIPELINE_WINS && share <= MAX_SEED_COVERAGE;
    let detail = format!(
        "{wins}/{PIPELINE_RUNS} runs gained paths with well-formed novel seeds from both strategies \
         (need {PIPELINE_WINS}); seeds cover {}/{feasible} feasible paths; path deltas C_s/C_sf: {}",
        seeds.len(),
        summary.join(" ")
    );
    (outcome(pass, detail), manifest)
}

fn determinism(scratch: &Path, first: Option<&str>) -> Outcome {
    if !scratch.join("seeds").is_dir() {
        write_seeds(&scratch.join("seeds"), &toy_seed_fixture(20, 0)).expect("seeds");
    }
    let run = |work: &str| cmd_pipeline(&pipeline_config(scratch, work, 0)).map(|o| o.manifest);
    let a = match first {
        Some(m) => Ok(m.to_string()),
        None => run("repeat-a"),
    };
    match (a, run("repeat-b")) {
        (Ok(a), Ok(b)) => {
            outcome(a == b && !a.is_empty(), format!("{} manifest entries, identical: {}", a.lines().count(), a == b))
        }
        (a, b) => outcome(false, format!("pipeline error: {:?} {:?}", a.err(), b.err())),
    }
}
