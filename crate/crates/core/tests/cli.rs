use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pathseed::pipeline::fixture::{toy_seed_fixture, write_seeds};

const SMALL: &[&str] = &[
    "--path-hidden",
    "16",
    "--translator-hidden",
    "16",
    "--path-epochs",
    "5",
    "--translator-epochs",
    "10",
    "--count",
    "4",
];

fn pathseed(args: &[&str], extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pathseed")).args(args).args(extra).output().expect("spawn")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

struct Scratch {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Scratch {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        write_seeds(&root.join("seeds"), &toy_seed_fixture(8, 4)).unwrap();
        Scratch { _dir: dir, root }
    }

    fn path(&self, rel: &str) -> String {
        self.root.join(rel).display().to_string()
    }
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn missing_seed_dir_is_a_config_error() {
    let s = Scratch::new();
    let work = s.path("work");
    let o = pathseed(&["pipeline", "--seed-dir", &s.path("nope"), "--work-dir", &work], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("does not exist"));
    assert!(!Path::new(&work).exists());
}

#[test]
fn bad_config_values_exit_2() {
    let s = Scratch::new();
    let conf = s.path("bad.conf");
    fs::write(&conf, "count = 3\nunknown-key = 1\n").unwrap();
    assert_eq!(pathseed(&["compress", "--config", &conf], &[]).status.code(), Some(2));
    assert_eq!(pathseed(&["compress", "--count", "zero"], &[]).status.code(), Some(2));
    assert_eq!(pathseed(&["compress", "--seed-dir", &s.path("seeds"), "--count", "0"], &[]).status.code(), Some(2));
}

#[test]
fn stage_out_of_order_fails_with_status_1() {
    let s = Scratch::new();
    let o = pathseed(&["train-pathgen", "--seed-dir", &s.path("seeds"), "--work-dir", &s.path("work")], &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("stage train-pathgen failed"));
    assert!(s.root.join("work/failed-train-pathgen/error.txt").is_file());
}

#[test]
fn trace_of_one_file() {
    let s = Scratch::new();
    let o = pathseed(&["trace", "--input", &s.path("seeds/seed-00.pdf")], &[]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.lines().all(|l| l.len() == 10 && "-EXB".contains(&l[9..])), "{text}");
    assert!(text.starts_with("00401000 E\n"));
}

#[test]
fn staged_run_matches_pipeline() {
    let s = Scratch::new();
    let seeds = s.path("seeds");
    let (staged, whole) = (s.path("staged"), s.path("whole"));

    let o = pathseed(&["pipeline", "--seed-dir", &seeds, "--work-dir", &whole, "--seed", "5"], SMALL);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = stdout(&o);
    assert!(report.contains("execution paths"));
    assert!(report.contains("C_sf"));
    assert_eq!(fs::read_to_string(s.root.join("whole/report.txt")).unwrap(), report);

    for stage in ["trace", "compress", "train-pathgen", "gen-paths", "train-translator", "translate", "eval"] {
        let o = pathseed(&[stage, "--seed-dir", &seeds, "--work-dir", &staged, "--seed", "5"], SMALL);
        assert!(o.status.success(), "{stage}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let strip = |t: Vec<(String, Vec<u8>)>| -> Vec<(String, Vec<u8>)> {
        t.into_iter().filter(|(p, _)| p != "report.txt" && p != "manifest.txt").collect()
    };
    assert_eq!(strip(tree(Path::new(&staged))), strip(tree(Path::new(&whole))));

    let o = pathseed(
        &["eval", "--seed-dir", &seeds, "--work-dir", &s.path("eval"), "--new", &format!("copy={seeds}")],
        &[],
    );
    assert!(o.status.success());
    assert!(stdout(&o).contains("+0.00%"));
}

#[test]
fn config_file_then_flags() {
    let s = Scratch::new();
    let conf = s.path("run.conf");
    fs::write(&conf, format!("seed-dir = {}\ncount = 3\nstrategies = sample\n", s.path("seeds"))).unwrap();
    let work = s.path("work");
    for stage in ["trace", "compress", "train-pathgen", "gen-paths"] {
        let o = pathseed(&[stage, "--config", &conf, "--work-dir", &work], &SMALL[..8]);
        assert!(o.status.success(), "{stage}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let listed = fs::read_to_string(s.root.join("work/generated/sample/compressed.txt")).unwrap();
    assert!(listed.lines().count() <= 3);
    assert!(!s.root.join("work/generated/samplefunction").exists());

    let o = pathseed(&["gen-paths", "--config", &conf, "--work-dir", &work, "--count", "1"], &SMALL[..8]);
    assert!(o.status.success());
    let listed = fs::read_to_string(s.root.join("work/generated/sample/compressed.txt")).unwrap();
    assert_eq!(listed.lines().count(), 1);
}

#[test]
fn gradcheck_command() {
    let o = pathseed(&["gradcheck", "--trials", "2", "--seed", "100"], &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("seq2seq: worst"));
}
