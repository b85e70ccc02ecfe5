use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Arg, ArgMatches, CommandFactory, FromArgMatches, Parser, Subcommand};

use pathseed::neural::gradcheck::run_trials;
use pathseed::pipeline::config::KEYS;
use pathseed::pipeline::{
    cmd_pipeline, evaluate_toy, run_stage, table_label, ConfigError, PipelineConfig, PipelineError, Stage,
    TargetKind, Workspace,
};
use pathseed::toy::run_toy_target;

/// Learns execution paths of a target and translates novel ones into new
/// PDF seed files.
///
/// Every configuration key is also accepted as a global `--<key> <value>`
/// flag, applied after the `--config` file.
#[derive(Parser)]
#[command(name = "pathseed", version)]
struct Cli {
    /// Configuration file of `key = value` lines.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage and print the coverage report.
    Pipeline,
    /// Compare coverage of seed directories on the toy target.
    Eval {
        /// Original seeds (defaults to the configured seed directory).
        #[arg(long, value_name = "DIR")]
        original: Option<PathBuf>,
        /// A labeled directory of new seeds, `label=dir`; repeatable.
        /// Defaults to the translated seeds in the work directory.
        #[arg(long = "new", value_name = "LABEL=DIR", value_parser = parse_labeled)]
        new: Vec<(String, PathBuf)>,
    },
    /// Record seed paths, or print the toy-target trace of one file.
    Trace {
        #[arg(long, value_name = "FILE")]
        input: Option<PathBuf>,
    },
    /// Build the compression dictionary.
    Compress,
    /// Train the path language model.
    TrainPathgen,
    /// Generate novel paths with each strategy.
    GenPaths,
    /// Train the path-to-objects translator.
    TrainTranslator,
    /// Translate generated paths into seed files.
    Translate,
    /// Finite-difference check of the network gradients.
    Gradcheck {
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
}

fn parse_labeled(s: &str) -> Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((label, dir)) if !label.is_empty() && !dir.is_empty() => Ok((label.into(), dir.into())),
        _ => Err("expected LABEL=DIR".into()),
    }
}

fn load_config(cli: &Cli, matches: &ArgMatches) -> Result<PipelineConfig, ConfigError> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::from_file(path)?,
        None => PipelineConfig::default(),
    };
    for key in KEYS {
        if let Some(value) = matches.get_one::<String>(key) {
            cfg.set(key, value)?;
        }
    }
    Ok(cfg)
}

fn run(cli: &Cli, cfg: &PipelineConfig) -> Result<String, PipelineError> {
    let stage = |s| run_stage(cfg, s);
    match &cli.command {
        Command::Pipeline => cmd_pipeline(cfg).map(|o| o.report_text()),
        Command::Eval { original, new } if original.is_none() && new.is_empty() => stage(Stage::Eval),
        Command::Eval { original, new } => {
            cfg.validate_values()?;
            if cfg.target != TargetKind::Toy {
                return Err(ConfigError::Invalid("evaluation needs the toy target".into()).into());
            }
            let original = original.clone().unwrap_or_else(|| cfg.seed_dir.clone());
            if !original.is_dir() {
                return Err(ConfigError::Invalid(format!("seed directory {} does not exist", original.display())).into());
            }
            let new = if new.is_empty() {
                let ws = Workspace::new(&cfg.work_dir);
                cfg.strategies.iter().map(|&s| (table_label(s).to_string(), ws.seeds(s))).collect()
            } else {
                new.clone()
            };
            let fail = |message| PipelineError::Stage { stage: Stage::Eval, message };
            let text = evaluate_toy(&original, &new).map_err(fail)?.render();
            let report = Workspace::new(&cfg.work_dir).report();
            std::fs::create_dir_all(&cfg.work_dir)
                .and_then(|_| std::fs::write(&report, &text))
                .map_err(|e| fail(format!("{}: {e}", report.display())))?;
            Ok(text)
        }
        Command::Trace { input: Some(file) } => {
            let bytes = std::fs::read(file)
                .map_err(|e| ConfigError::Read { path: file.display().to_string(), reason: e.to_string() })?;
            Ok(run_toy_target(&bytes).to_trace())
        }
        Command::Trace { input: None } => stage(Stage::Trace),
        Command::Compress => stage(Stage::Compress),
        Command::TrainPathgen => stage(Stage::TrainPathgen),
        Command::GenPaths => stage(Stage::GenPaths),
        Command::TrainTranslator => stage(Stage::TrainTranslator),
        Command::Translate => stage(Stage::Translate),
        Command::Gradcheck { trials, tolerance } => {
            let s = run_trials(*trials, cfg.seed, *tolerance);
            let text = format!(
                "lm: worst {:.3e}, {} of {} over {tolerance:e}\nseq2seq: worst {:.3e}, {} of {} over {tolerance:e}\n",
                s.lm_worst, s.lm_failures, s.trials, s.seq2seq_worst, s.seq2seq_failures, s.trials
            );
            if !s.passed() {
                eprint!("gradient check failed\n{text}");
                std::process::exit(1);
            }
            Ok(text)
        }
    }
}

fn main() -> ExitCode {
    let command = KEYS.iter().fold(Cli::command(), |cmd, key| {
        let arg = Arg::new(*key).long(*key).global(true).value_name("VALUE");
        cmd.arg(arg.help(format!("Sets the `{key}` configuration key")).hide(!matches!(*key, "seed" | "work-dir")))
    });
    let matches = command.get_matches();
    let cli = Cli::from_arg_matches(&matches).unwrap_or_else(|e| e.exit());
    let cfg = match load_config(&cli, &matches) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("configuration error: {e}");
            return ExitCode::from(2);
        }
    };
    match run(&cli, &cfg) {
        Ok(text) => {
            print!("{text}");
            if !text.ends_with('\n') {
                println!();
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
