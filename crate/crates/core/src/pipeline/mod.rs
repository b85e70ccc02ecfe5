//! End-to-end orchestration over a work directory.
//!
//! Each [`Stage`] reads the artifacts of the stages before it from the work
//! directory and writes its own outputs there, so stages can run one at a
//! time from the command line or back to back through [`cmd_pipeline`].
//!
//! ```text
//! work/
//!   traces/<seed>.trace        one recorded path per seed
//!   corpus/                    deduplicated path corpus + universe.txt
//!   compress/                  dict.txt, paths.txt
//!   pathgen/                   model.ssnn, vocab.txt, loss.txt
//!   generated/<strategy>/      gen-NNNN.trace, compressed.txt, attempts.txt
//!   translator/                model.ssnn, source.vocab, objects.vocab, pairs/, loss.txt
//!   seeds/<strategy>/          gen-NNNN.pdf
//!   seeds/<strategy>.validation.txt
//!   report.txt, manifest.txt
//! ```

pub mod config;
pub mod coverage;
pub mod fixture;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::neural::{load_lm, load_seq2seq, save_checkpoint, Checkpoint, TrainingLog};
use crate::pathcomp::{compress_corpus, compress_single, CompressedPath, CompressionDictionary, Token};
use crate::pathgen::{generate_novel_corpus, train_path_model, PathVocab, SamplingStrategy};
use crate::pdf::is_well_formed;
use crate::toy::{run_toy_target, ToyTarget};
use crate::trace::{ingest_trace_file, ExecutionPath, PathCorpus};
use crate::translator::{
    build_parallel_corpus, encode_source, load_pairs, train_translator, translate,
    ObjectVocab,
};

pub use config::{ConfigError, PipelineConfig, TargetKind};
pub use coverage::{coverage_delta, percent_delta, CoverageReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Trace,
    Compress,
    TrainPathgen,
    GenPaths,
    TrainTranslator,
    Translate,
    Eval,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Trace,
        Stage::Compress,
        Stage::TrainPathgen,
        Stage::GenPaths,
        Stage::TrainTranslator,
        Stage::Translate,
        Stage::Eval,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Trace => "trace",
            Stage::Compress => "compress",
            Stage::TrainPathgen => "train-pathgen",
            Stage::GenPaths => "gen-paths",
            Stage::TrainTranslator => "train-translator",
            Stage::Translate => "translate",
            Stage::Eval => "eval",
        }
    }

    /// Work-directory entries this stage writes.
    fn outputs(self) -> &'static [&'static str] {
        match self {
            Stage::Trace => &["traces", "corpus"],
            Stage::Compress => &["compress"],
            Stage::TrainPathgen => &["pathgen"],
            Stage::GenPaths => &["generated"],
            Stage::TrainTranslator => &["translator"],
            Stage::Translate => &["seeds"],
            Stage::Eval => &["report.txt"],
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error("stage {stage} failed: {message}")]
    Stage { stage: Stage, message: String },
}

impl PipelineError {
    /// Process exit status: 2 for configuration errors, 1 for stage failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Stage { .. } => 1,
        }
    }
}

type StageResult<T> = Result<T, String>;

fn ctx<E: fmt::Display>(what: impl fmt::Display) -> impl FnOnce(E) -> String {
    move |e| format!("{what}: {e}")
}

/// Column label of a strategy in the coverage table.
pub fn table_label(strategy: SamplingStrategy) -> &'static str {
    match strategy {
        SamplingStrategy::Sample => "C_s",
        SamplingStrategy::SampleFunction => "C_sf",
    }
}

/// Paths of the work directory layout.
#[derive(Clone, Debug)]
pub struct Workspace {
    pub root: PathBuf,
}

impl Workspace {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Workspace { root: root.into() }
    }

    pub fn traces(&self) -> PathBuf {
        self.root.join("traces")
    }

    pub fn corpus(&self) -> PathBuf {
        self.root.join("corpus")
    }

    pub fn compress(&self) -> PathBuf {
        self.root.join("compress")
    }

    pub fn pathgen(&self) -> PathBuf {
        self.root.join("pathgen")
    }

    pub fn generated(&self, strategy: SamplingStrategy) -> PathBuf {
        self.root.join("generated").join(strategy.label())
    }

    pub fn translator(&self) -> PathBuf {
        self.root.join("translator")
    }

    pub fn seeds(&self, strategy: SamplingStrategy) -> PathBuf {
        self.root.join("seeds").join(strategy.label())
    }

    pub fn report(&self) -> PathBuf {
        self.root.join("report.txt")
    }

    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.txt")
    }

    fn fresh_dir(&self, dir: &Path) -> StageResult<()> {
        if dir.exists() {
            fs::remove_dir_all(dir).map_err(ctx(dir.display()))?;
        }
        fs::create_dir_all(dir).map_err(ctx(dir.display()))
    }

    /// Moves a failed stage's partial outputs to `failed-<stage>/`.
    fn quarantine(&self, stage: Stage, message: &str) {
        let dest = self.root.join(format!("failed-{}", stage.name()));
        let _ = fs::remove_dir_all(&dest);
        if fs::create_dir_all(&dest).is_err() {
            return;
        }
        for out in stage.outputs() {
            let src = self.root.join(out);
            if src.exists() {
                let _ = fs::rename(&src, dest.join(out));
            }
        }
        let _ = fs::write(dest.join("error.txt"), format!("{message}\n"));
    }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> StageResult<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(ctx(parent.display()))?;
    }
    fs::write(path, contents).map_err(ctx(path.display()))
}

fn read(path: &Path) -> StageResult<Vec<u8>> {
    fs::read(path).map_err(ctx(path.display()))
}

fn read_text(path: &Path) -> StageResult<String> {
    fs::read_to_string(path).map_err(ctx(path.display()))
}

/// Regular files of `dir` sorted by name, as `(stem, path)`.
fn files_in(dir: &Path, extension: Option<&str>) -> StageResult<Vec<(String, PathBuf)>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(ctx(dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .filter(|p| extension.is_none_or(|ext| p.extension().is_some_and(|e| e == ext)))
        .filter(|p| !p.file_name().is_some_and(|n| n.to_string_lossy().starts_with('.')))
        .collect();
    files.sort();
    Ok(files
        .into_iter()
        .map(|p| (p.file_stem().unwrap_or_default().to_string_lossy().into_owned(), p))
        .collect())
}

/// Seed files as `(stem, bytes)`, plus the names of unreadable files.
pub fn read_seed_dir(dir: &Path) -> Result<(Vec<(String, Vec<u8>)>, Vec<String>), String> {
    let mut seeds = Vec::new();
    let mut unreadable = Vec::new();
    for (stem, path) in files_in(dir, None)? {
        match fs::read(&path) {
            Ok(bytes) => seeds.push((stem, bytes)),
            Err(_) => unreadable.push(path.display().to_string()),
        }
    }
    Ok((seeds, unreadable))
}

/// Every `*.trace` file in `dir`, undeduplicated, with file stems as source ids.
fn load_traces(dir: &Path) -> StageResult<Vec<ExecutionPath>> {
    files_in(dir, Some("trace"))?
        .into_iter()
        .map(|(stem, path)| {
            let path_obj = ingest_trace_file(&read(&path)?).map_err(ctx(path.display()))?;
            Ok(path_obj.with_source(stem))
        })
        .collect()
}

fn load_corpus(ws: &Workspace) -> StageResult<PathCorpus> {
    PathCorpus::load_dir(&ws.corpus()).map_err(|e| e.to_string())
}

fn load_dict(ws: &Workspace, cfg: &PipelineConfig, corpus: &PathCorpus) -> StageResult<CompressionDictionary> {
    let text = read_text(&ws.compress().join("dict.txt"))?;
    CompressionDictionary::from_text(&text, cfg.max_len, |id| corpus.universe_lookup(id)).map_err(ctx("dict.txt"))
}

fn load_path_vocab(path: &Path, corpus: &PathCorpus) -> StageResult<PathVocab> {
    PathVocab::from_text(&read_text(path)?, |id| corpus.universe_lookup(id)).map_err(ctx(path.display()))
}

fn tokens_line(tokens: &[Token]) -> String {
    tokens.iter().map(Token::to_string).collect::<Vec<_>>().join(" ")
}

fn loss_text(log: &TrainingLog) -> String {
    log.epoch_losses.iter().enumerate().map(|(i, l)| format!("{}\t{l}\n", i + 1)).collect()
}

fn stage_trace(cfg: &PipelineConfig, ws: &Workspace) -> StageResult<String> {
    let (seeds, unreadable) = read_seed_dir(&cfg.seed_dir)?;
    if seeds.is_empty() {
        return Err(format!("no seed files in {}", cfg.seed_dir.display()));
    }
    ws.fresh_dir(&ws.traces())?;
    let mut missing = 0;
    let mut corpus = PathCorpus::new();
    for (name, bytes) in &seeds {
        let path = match (cfg.target, &cfg.trace_dir) {
            (TargetKind::Traces, Some(dir)) => {
                let file = dir.join(format!("{name}.trace"));
                if !file.exists() {
                    missing += 1;
                    continue;
                }
                ingest_trace_file(&read(&file)?).map_err(ctx(file.display()))?
            }
            _ => run_toy_target(bytes),
        };
        let path = path.with_source(name.clone());
        write(&ws.traces().join(format!("{name}.trace")), path.to_trace())?;
        corpus.try_add(path).map_err(ctx(name))?;
    }
    if corpus.is_empty() {
        return Err("no seed has a recorded path".into());
    }
    if cfg.target == TargetKind::Toy {
        corpus.extend_universe(ToyTarget::new().blocks());
    }
    ws.fresh_dir(&ws.corpus())?;
    corpus.save_dir(&ws.corpus()).map_err(|e| e.to_string())?;
    Ok(format!(
        "trace: {} seeds, {} distinct paths, {} unreadable, {} without trace",
        seeds.len(),
        corpus.len(),
        unreadable.len(),
        missing
    ))
}

fn stage_compress(cfg: &PipelineConfig, ws: &Workspace) -> StageResult<String> {
    let corpus = load_corpus(ws)?;
    let (compressed, dict) = compress_corpus(&corpus, cfg.max_len).map_err(|e| e.to_string())?;
    ws.fresh_dir(&ws.compress())?;
    write(&ws.compress().join("dict.txt"), dict.to_text())?;
    let lines: String = compressed
        .iter()
        .map(|c| format!("{}\t{}\n", c.origin.as_deref().unwrap_or("-"), tokens_line(&c.tokens)))
        .collect();
    write(&ws.compress().join("paths.txt"), lines)?;
    let longest = compressed.iter().map(CompressedPath::len).max().unwrap_or(0);
    Ok(format!("compress: {} rules, longest compressed path {longest} tokens", dict.len()))
}

fn compressed_corpus(corpus: &PathCorpus, dict: &CompressionDictionary) -> Vec<CompressedPath> {
    corpus.paths().iter().map(|p| compress_single(p, dict)).collect()
}

fn stage_train_pathgen(cfg: &PipelineConfig, ws: &Workspace) -> StageResult<String> {
    let corpus = load_corpus(ws)?;
    let dict = load_dict(ws, cfg, &corpus)?;
    let compressed = compressed_corpus(&corpus, &dict);
    let train = cfg.train_config(cfg.path_epochs, 1);
    let (model, vocab, log) = train_path_model(&compressed, cfg.path_hidden, &train).map_err(|e| e.to_string())?;
    ws.fresh_dir(&ws.pathgen())?;
    write(&ws.pathgen().join("model.ssnn"), save_checkpoint(&Checkpoint::Lm(model)))?;
    write(&ws.pathgen().join("vocab.txt"), vocab.to_text())?;
    write(&ws.pathgen().join("loss.txt"), loss_text(&log))?;
    Ok(format!(
        "train-pathgen: vocab {}, final loss {:.4} nats/token",
        vocab.len(),
        log.final_loss().unwrap_or(f64::NAN)
    ))
}

fn stage_gen_paths(cfg: &PipelineConfig, ws: &Workspace) -> StageResult<String> {
    let corpus = load_corpus(ws)?;
    let dict = load_dict(ws, cfg, &corpus)?;
    let vocab = load_path_vocab(&ws.pathgen().join("vocab.txt"), &corpus)?;
    let model = load_lm(&read(&ws.pathgen().join("model.ssnn"))?, vocab.len()).map_err(ctx("pathgen model"))?;
    ws.fresh_dir(&ws.root.join("generated"))?;
    let mut summary = vec!["gen-paths:".to_string()];
    for (i, &strategy) in cfg.strategies.iter().enumerate() {
        let gen = cfg.generation_config(strategy, 10 + i as u64);
        let out = generate_novel_corpus(&model, &vocab, &corpus, &dict, &gen, cfg.count).map_err(|e| e.to_string())?;
        let dir = ws.generated(strategy);
        ws.fresh_dir(&dir)?;
        let mut compressed = String::new();
        for (n, path) in out.paths.iter().enumerate() {
            let name = format!("gen-{:04}", n + 1);
            let blocks = crate::pathcomp::decompress(path, &dict).map_err(|e| e.to_string())?;
            write(&dir.join(format!("{name}.trace")), blocks.to_trace())?;
            compressed.push_str(&format!("{name}\t{}\n", tokens_line(&path.tokens)));
        }
        write(&dir.join("compressed.txt"), compressed)?;
        write(&dir.join("attempts.txt"), out.report_text())?;
        summary.push(format!("{} {}/{} novel", strategy.label(), out.paths.len(), cfg.count));
    }
    Ok(summary.join(" "))
}

fn stage_train_translator(cfg: &PipelineConfig, ws: &Workspace) -> StageResult<String> {
    let (seeds, _) = read_seed_dir(&cfg.seed_dir)?;
    let corpus = load_corpus(ws)?;
    let dict = load_dict(ws, cfg, &corpus)?;
    let paths = load_traces(&ws.traces())?;
    let parallel = build_parallel_corpus(&seeds, &paths, &dict, cfg.vocab_budget).map_err(|e| e.to_string())?;
    let train = cfg.train_config(cfg.translator_epochs, 2);
    let (model, log) = train_translator(&parallel, cfg.translator_hidden, &train).map_err(|e| e.to_string())?;
    let dir = ws.translator();
    ws.fresh_dir(&dir)?;
    write(&dir.join("model.ssnn"), save_checkpoint(&Checkpoint::Seq2Seq(model)))?;
    write(&dir.join("source.vocab"), parallel.source_vocab.to_text())?;
    write(&dir.join("objects.vocab"), parallel.object_vocab.to_text())?;
    parallel.save_pairs(&dir.join("pairs")).map_err(|e| e.to_string())?;
    write(&dir.join("loss.txt"), loss_text(&log))?;
    Ok(format!(
        "train-translator: {} pairs ({} dropped empty, {} unmatched), object vocab {}, final loss {:.4}",
        parallel.pairs.len(),
        parallel.dropped_empty,
        parallel.unmatched.len(),
        parallel.object_vocab.len(),
        log.final_loss().unwrap_or(f64::NAN)
    ))
}

fn read_generated(dir: &Path, corpus: &PathCorpus) -> StageResult<Vec<(String, CompressedPath)>> {
    let text = read_text(&dir.join("compressed.txt"))?;
    text.lines()
        .map(|line| {
            let (name, tokens) = line.split_once('\t').ok_or("malformed compressed.txt")?;
            let tokens = tokens
                .split(' ')
                .filter(|t| !t.is_empty())
                .map(|t| Token::parse(t, |id| corpus.universe_lookup(id)).ok_or(format!("bad token `{t}`")))
                .collect::<StageResult<Vec<_>>>()?;
            Ok((name.to_string(), CompressedPath { tokens, origin: Some(name.to_string()) }))
        })
        .collect()
}

fn stage_translate(cfg: &PipelineConfig, ws: &Workspace) -> StageResult<String> {
    let corpus = load_corpus(ws)?;
    let dir = ws.translator();
    let source_vocab = load_path_vocab(&dir.join("source.vocab"), &corpus)?;
    let object_vocab = ObjectVocab::from_text(&read_text(&dir.join("objects.vocab"))?).map_err(|e| e.to_string())?;
    let model = load_seq2seq(&read(&dir.join("model.ssnn"))?, (source_vocab.len(), object_vocab.len()))
        .map_err(ctx("translator model"))?;
    let max_decode_len = if cfg.max_decode_len > 0 {
        cfg.max_decode_len
    } else {
        let pairs = load_pairs(&dir.join("pairs")).map_err(|e| e.to_string())?;
        4 * pairs.iter().map(|p| p.target.len()).max().unwrap_or(1)
    };
    ws.fresh_dir(&ws.root.join("seeds"))?;
    let mut summary = vec!["translate:".to_string()];
    for &strategy in &cfg.strategies {
        let generated = read_generated(&ws.generated(strategy), &corpus)?;
        let out_dir = ws.seeds(strategy);
        ws.fresh_dir(&out_dir)?;
        let mut validation = String::new();
        let (mut written, mut well_formed) = (0, 0);
        for (name, path) in &generated {
            let src = encode_source(path, &source_vocab);
            let result = translate(&model, &src, max_decode_len, &object_vocab).map_err(|e| e.to_string())?;
            validation.push_str(&format!("{name} well_formed={} objects={}\n", result.well_formed, result.bodies.len()));
            for d in &result.diagnostics {
                validation.push_str(&format!("  {d}\n"));
            }
            if !result.seed.is_empty() {
                write(&out_dir.join(format!("{name}.pdf")), &result.seed)?;
                written += 1;
                well_formed += usize::from(result.well_formed);
            }
        }
        write(&ws.root.join("seeds").join(format!("{}.validation.txt", strategy.label())), validation)?;
        summary.push(format!("{} {written} seeds ({well_formed} well-formed)", strategy.label()));
    }
    Ok(summary.join(" "))
}

/// Per-corpus outcome of an evaluation, beyond the coverage counts.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SeedStats {
    pub label: String,
    pub seeds: usize,
    pub unreadable: usize,
    /// Seeds whose path is not produced by any original seed.
    pub novel: usize,
    pub novel_well_formed: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Evaluation {
    pub report: CoverageReport,
    pub stats: Vec<SeedStats>,
    pub original_unreadable: usize,
}

impl Evaluation {
    pub fn render(&self) -> String {
        let mut out = self.report.render();
        out.push('\n');
        if self.original_unreadable > 0 {
            out.push_str(&format!("Original: {} unreadable seed files skipped\n", self.original_unreadable));
        }
        for s in &self.stats {
            out.push_str(&format!(
                "{}: {} seeds, {} unreadable, {} with novel paths, {} novel and well-formed\n",
                s.label, s.seeds, s.unreadable, s.novel, s.novel_well_formed
            ));
        }
        out
    }
}

/// Runs the original seeds and each labeled directory of new seeds through
/// the toy target and compares coverage.
pub fn evaluate_toy(original_dir: &Path, new: &[(String, PathBuf)]) -> Result<Evaluation, String> {
    let (original_seeds, original_unreadable) = read_seed_dir(original_dir)?;
    let mut original = PathCorpus::new();
    for ((name, _), (path, _)) in original_seeds.iter().zip(run_seeds(&original_seeds)) {
        original.add(path.with_source(name.clone()));
    }
    let mut report = CoverageReport::new(coverage::coverage_of([&original]));
    let mut stats = Vec::new();
    for (label, dir) in new {
        let (seeds, unreadable) = if dir.is_dir() { read_seed_dir(dir)? } else { (Vec::new(), Vec::new()) };
        let mut corpus = PathCorpus::new();
        let mut s = SeedStats { label: label.clone(), seeds: seeds.len(), unreadable: unreadable.len(), ..Default::default() };
        for ((name, _), (path, well_formed)) in seeds.iter().zip(run_seeds(&seeds)) {
            if !original.contains(path.blocks()) {
                s.novel += 1;
                s.novel_well_formed += usize::from(well_formed);
            }
            corpus.add(path.with_source(name.clone()));
        }
        report.add(label, &original, &corpus);
        stats.push(s);
    }
    Ok(Evaluation { report, stats, original_unreadable: original_unreadable.len() })
}

/// Toy-target path and well-formedness of each seed, in input order. Files
/// are split across worker threads; results are gathered by index.
fn run_seeds(seeds: &[(String, Vec<u8>)]) -> Vec<(ExecutionPath, bool)> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(seeds.len()).max(1);
    let chunk = seeds.len().div_ceil(workers).max(1);
    std::thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .chunks(chunk)
            .map(|part| {
                scope.spawn(move || {
                    part.iter().map(|(_, b)| (run_toy_target(b), is_well_formed(b).ok)).collect::<Vec<_>>()
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("seed worker panicked")).collect()
    })
}

fn stage_eval(cfg: &PipelineConfig, ws: &Workspace) -> StageResult<(String, Evaluation)> {
    let new: Vec<(String, PathBuf)> =
        cfg.strategies.iter().map(|&s| (table_label(s).to_string(), ws.seeds(s))).collect();
    let eval = evaluate_toy(&cfg.seed_dir, &new)?;
    let text = eval.render();
    write(&ws.report(), &text)?;
    Ok((text, eval))
}

/// Runs one stage against the work directory, quarantining its outputs on
/// failure. Returns the stage's summary line.
pub fn run_stage(cfg: &PipelineConfig, stage: Stage) -> Result<String, PipelineError> {
    cfg.validate()?;
    if stage == Stage::Eval && cfg.target != TargetKind::Toy {
        return Err(ConfigError::Invalid("evaluation needs the toy target".into()).into());
    }
    let ws = Workspace::new(&cfg.work_dir);
    let result = match stage {
        Stage::Trace => stage_trace(cfg, &ws),
        Stage::Compress => stage_compress(cfg, &ws),
        Stage::TrainPathgen => stage_train_pathgen(cfg, &ws),
        Stage::GenPaths => stage_gen_paths(cfg, &ws),
        Stage::TrainTranslator => stage_train_translator(cfg, &ws),
        Stage::Translate => stage_translate(cfg, &ws),
        Stage::Eval => stage_eval(cfg, &ws).map(|(text, _)| text),
    };
    result.map_err(|message| {
        ws.quarantine(stage, &message);
        PipelineError::Stage { stage, message }
    })
}

#[derive(Clone, Debug)]
pub struct PipelineOutcome {
    /// One summary line per stage.
    pub log: Vec<String>,
    pub evaluation: Option<Evaluation>,
    pub manifest: String,
}

impl PipelineOutcome {
    pub fn report_text(&self) -> String {
        let mut out = self.log.join("\n");
        out.push('\n');
        if let Some(eval) = &self.evaluation {
            out.push('\n');
            out.push_str(&eval.render());
        }
        out
    }
}

/// Runs every stage in order, then writes the manifest. Evaluation runs
/// only for the toy target.
pub fn cmd_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutcome, PipelineError> {
    cfg.validate()?;
    let ws = Workspace::new(&cfg.work_dir);
    for stage in Stage::ALL {
        for out in stage.outputs() {
            let p = ws.root.join(out);
            if p.is_dir() {
                let _ = fs::remove_dir_all(&p);
            } else if p.exists() {
                let _ = fs::remove_file(&p);
            }
            let _ = fs::remove_dir_all(ws.root.join(format!("failed-{}", stage.name())));
        }
    }
    let _ = fs::remove_file(ws.manifest());

    let mut log = Vec::new();
    for stage in &Stage::ALL[..6] {
        log.push(run_stage(cfg, *stage)?);
    }
    let evaluation = if cfg.target == TargetKind::Toy {
        let (_, eval) = stage_eval(cfg, &ws).map_err(|message| {
            ws.quarantine(Stage::Eval, &message);
            PipelineError::Stage { stage: Stage::Eval, message }
        })?;
        Some(eval)
    } else {
        None
    };
    let outcome = PipelineOutcome { log, evaluation, manifest: String::new() };
    write(&ws.report(), outcome.report_text()).map_err(|message| PipelineError::Stage { stage: Stage::Eval, message })?;
    let manifest = build_manifest(&ws.root).map_err(|message| PipelineError::Stage { stage: Stage::Eval, message })?;
    write(&ws.manifest(), &manifest).map_err(|message| PipelineError::Stage { stage: Stage::Eval, message })?;
    Ok(PipelineOutcome { manifest, ..outcome })
}

/// `<sha256>  <relative path>` for every file under `root` except the
/// manifest itself, sorted by path.
pub fn build_manifest(root: &Path) -> Result<String, String> {
    fn walk(dir: &Path, root: &Path, out: &mut Vec<(String, PathBuf)>) -> Result<(), String> {
        for entry in fs::read_dir(dir).map_err(ctx(dir.display()))? {
            let path = entry.map_err(ctx(dir.display()))?.path();
            if path.is_dir() {
                walk(&path, root, out)?;
            } else {
                let rel = path.strip_prefix(root).expect("under root");
                let rel = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
                out.push((rel, path));
            }
        }
        Ok(())
    }
    let mut files = Vec::new();
    walk(root, root, &mut files)?;
    files.retain(|(rel, _)| rel != "manifest.txt");
    files.sort();
    let mut manifest = String::new();
    for (rel, path) in files {
        let digest = Sha256::digest(read(&path)?);
        manifest.push_str(&format!("{}  {rel}\n", hex::encode(digest)));
    }
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_seed_dir_writes_nothing() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = PipelineConfig {
            seed_dir: tmp.path().join("absent"),
            work_dir: tmp.path().join("work"),
            ..Default::default()
        };
        let err = cmd_pipeline(&cfg).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(!cfg.work_dir.exists());
    }

    #[test]
    fn failed_stage_is_quarantined() {
        let tmp = tempfile::tempdir().unwrap();
        let seeds = tmp.path().join("seeds");
        fs::create_dir_all(&seeds).unwrap();
        let cfg = PipelineConfig { seed_dir: seeds, work_dir: tmp.path().join("work"), ..Default::default() };
        // No corpus has been recorded yet.
        let err = run_stage(&cfg, Stage::Compress).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().starts_with("stage compress failed"));
        let note = fs::read_to_string(cfg.work_dir.join("failed-compress/error.txt")).unwrap();
        assert!(!note.is_empty());
    }

    #[test]
    fn manifest_lists_hashes_sorted() {
        let tmp = tempfile::tempdir().unwrap();
        fs::create_dir_all(tmp.path().join("b")).unwrap();
        fs::write(tmp.path().join("b/x.txt"), "x").unwrap();
        fs::write(tmp.path().join("a.txt"), "").unwrap();
        fs::write(tmp.path().join("manifest.txt"), "old").unwrap();
        let m = build_manifest(tmp.path()).unwrap();
        let lines: Vec<&str> = m.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855  a.txt");
        assert!(lines[1].ends_with("  b/x.txt"));
    }

    #[test]
    fn identical_corpora_give_zero_deltas() {
        let tmp = tempfile::tempdir().unwrap();
        let seeds = fixture::toy_seed_fixture(5, 3);
        fixture::write_seeds(&tmp.path().join("a"), &seeds).unwrap();
        fixture::write_seeds(&tmp.path().join("b"), &seeds).unwrap();
        let eval = evaluate_toy(&tmp.path().join("a"), &[("copy".into(), tmp.path().join("b"))]).unwrap();
        let row = &eval.report.rows[0];
        assert_eq!(eval.report.blocks_delta(row), 0);
        assert_eq!(eval.report.paths_delta(row), 0);
        assert_eq!(eval.stats[0].novel, 0);
    }
}
