use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_echotrace")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const SMALL: [&str; 8] = [
    "--set",
    "experiment.train_users=2",
    "--set",
    "experiment.train_reps=1",
    "--set",
    "experiment.patterns=[1, 3, 4, 8, 10]",
    "--set",
    "classifier.algorithm=fine_knn",
];

#[test]
fn gen_writes_181_frames_per_second() {
    let dir = tempfile::tempdir().unwrap();
    let wav = dir.path().join("s.wav");
    ok(&["gen", "--duration", "1", "-o", p(&wav)]);
    let data = echotrace::io::read_wav(&wav).unwrap();
    assert_eq!(data.sample_rate, 48_000);
    assert_eq!(data.channels[0].len(), 181 * 264);
}

#[test]
fn gen_rejects_zero_frames() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["gen", "--frames", "0", "-o", p(&dir.path().join("s.wav"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulated_pattern_5_is_among_candidates() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["simulate", "--pattern", "5", "-o", p(dir.path())]);
    let (b, t) = (dir.path().join("bottom.wav"), dir.path().join("top.wav"));
    let report: Value = serde_json::from_str(&ok(&["analyze", "--bottom", p(&b), "--top", p(&t), "--truth", "5"])).unwrap();
    assert_eq!(report["truth"]["in_candidates"], Value::Bool(true));
    let suggested: Vec<u64> = report["candidates"]["suggested"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).collect();
    assert!(suggested.contains(&5));
    assert_eq!(report["config"]["seed"], Value::from(1));
}

#[test]
fn stereo_file_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["simulate", "--pattern", "7", "--stereo", "-o", p(dir.path())]);
    let stereo = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|f| f.extension().is_some_and(|e| e == "wav"))
        .unwrap();
    let report: Value = serde_json::from_str(&ok(&["analyze", "--stereo", p(&stereo), "--truth", "7"])).unwrap();
    assert_eq!(report["truth"]["in_candidates"], Value::Bool(true));
}

#[test]
fn bottom_only_needs_a_bottom_mode() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["simulate", "--pattern", "3", "-o", p(dir.path())]);
    let b = dir.path().join("bottom.wav");
    let report: Value = serde_json::from_str(&ok(&["analyze", "--bottom", p(&b), "--mode", "D2.3", "--truth", "3"])).unwrap();
    assert_eq!(report["candidates"]["resolution"]["table"], Value::from("bottom"));
    assert_eq!(report["truth"]["in_candidates"], Value::Bool(true));
    let out = run(&["analyze", "--bottom", p(&b), "--mode", "D2.1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_config_exits_nonzero() {
    assert_eq!(run(&["config", "--set", "segment.percentile=150"]).status.code(), Some(2));
    assert_eq!(run(&["config", "--mode", "D7.1"]).status.code(), Some(2));
    assert_eq!(run(&["config", "--set", "nosuchkey=1"]).status.code(), Some(2));
    assert!(run(&["config", "--seed", "4"]).status.success());
}

#[test]
fn enumerate_reports_total() {
    let out = ok(&["enumerate", "--json"]);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert!(out.contains("389112"), "{v}");
}

#[test]
fn experiment_reports_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    for path in [&a, &b] {
        let mut args = vec!["experiment", "--users", "2", "--reps", "1", "--modes", "D2.1,D3.1", "--seed", "3", "-o", p(path)];
        args.extend(SMALL);
        ok(&args);
    }
    let (ja, jb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(ja, jb);
    let report: Value = serde_json::from_slice(&ja).unwrap();
    assert_eq!(report["trials"], Value::from(10));
    assert_eq!(report["config"]["seed"], Value::from(3));
}

#[test]
fn single_pattern_catalog_gives_one_candidate() {
    let dir = tempfile::tempdir().unwrap();
    let catalog = dir.path().join("catalog.txt");
    std::fs::write(&catalog, "5: 2 1 0 3 6\n").unwrap();
    let out = ok(&["experiment", "--users", "2", "--reps", "1", "--catalog", p(&catalog), "--format", "json"]);
    let report: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(report["results"][0]["metrics"]["overall"]["mean_candidates"], Value::from(1.0));
}

#[test]
fn train_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.json");
    let mut args = vec!["train", "-o", p(&model)];
    args.extend(SMALL);
    ok(&args);
    let mut args = vec!["eval", "--model", p(&model), "--modes", "D3.1", "--users", "1", "--reps", "1", "--format", "json"];
    args.extend(SMALL);
    let report: Value = serde_json::from_str(&ok(&args)).unwrap();
    assert_eq!(report["trials"], Value::from(5));
    let bogus = dir.path().join("bogus.json");
    std::fs::write(&bogus, "{}").unwrap();
    assert!(!run(&["eval", "--model", p(&bogus), "--modes", "D3.1"]).status.success());
}

#[test]
fn render_writes_pgm() {
    let dir = tempfile::tempdir().unwrap();
    let pgm = dir.path().join("d.pgm");
    ok(&["render", "--simulate", "1", "--kind", "binary", "--mic", "top", "-o", p(&pgm)]);
    let bytes = std::fs::read(&pgm).unwrap();
    assert!(bytes.starts_with(b"P5\n"));
}
