use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

fn eval(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eval"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_replay_writes_reports() {
    let out = tempfile::tempdir().unwrap();
    let config = fixtures().join("replay.toml");
    let o = eval(&["run", "--config", path(&config), "--out", path(out.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.starts_with("task,strategy,modalities,accuracy,similarity,trials\n"));
    assert_eq!(stdout.lines().count(), 1 + 4 * 5);
    assert!(stdout.contains("opening_bottle,CoM,force+hand+image,1.0000,1.0000,3"));
    assert_eq!(std::fs::read_to_string(out.path().join("metrics.csv")).unwrap(), stdout);

    let json = out.path().join("metrics.json");
    let o = eval(&["report", "--format", "json", "--input", path(&json)]);
    assert!(o.status.success());
    assert_eq!(o.stdout, std::fs::read(&json).unwrap());
    let o = eval(&["report", "--format", "csv", "--input", path(&json)]);
    assert_eq!(String::from_utf8(o.stdout).unwrap(), stdout);
}

#[test]
fn overrides_narrow_the_matrix() {
    let out = tempfile::tempdir().unwrap();
    let config = fixtures().join("mock.toml");
    let o = eval(&[
        "run", "--config", path(&config), "--strategy", "com", "--modalities", "w.o. force",
        "--backend", "mock", "--trials", "1", "--out", path(out.path()),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 1 + 4);
    assert!(stdout.lines().skip(1).all(|l| l.contains(",CoM,hand+image,") && l.ends_with(",1")));
    assert!(out.path().join("transcript.jsonl").is_file());
}

#[test]
fn pipeline_prints_stage_report() {
    let out = tempfile::tempdir().unwrap();
    let rec = fixtures().join("corpus/opening_bottle");
    let o = eval(&[
        "pipeline", "--demo", path(&rec.join("manifest.json")), "--task", path(&rec.join("task.json")),
        "--config", path(&fixtures().join("replay.toml")), "--out", path(out.path()),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("success: true"), "{stdout}");
    assert!(out.path().join("program.py").is_file());
}

#[test]
fn error_categories_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = eval(&["run", "--config", path(&dir.path().join("missing.toml"))]);
    assert_eq!(o.status.code(), Some(3));

    std::fs::create_dir(dir.path().join("empty")).unwrap();
    let cfg = dir.path().join("empty.toml");
    std::fs::write(&cfg, "corpus_dir = \"empty\"\n[backend]\nkind = \"mock\"\n").unwrap();
    let o = eval(&["run", "--config", path(&cfg)]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no recordings found"));

    let cfg = dir.path().join("replay.toml");
    let corpus = fixtures().join("corpus");
    std::fs::write(
        &cfg,
        format!("corpus_dir = {:?}\n[backend]\nkind = \"replay\"\ntranscript = \"nope.jsonl\"\n", path(&corpus)),
    )
    .unwrap();
    let o = eval(&["run", "--config", path(&cfg)]);
    assert_eq!(o.status.code(), Some(5));

    let o = eval(&["report", "--format", "xml"]);
    assert_eq!(o.status.code(), Some(2));
}
