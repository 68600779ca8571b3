use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn furrow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_furrow")).args(args).output().expect("spawn furrow")
}

fn desk_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/desk.toml")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "status {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn oracle_navigation_writes_replayable_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("nav");
    let cfg = desk_config();
    let args = ["-c", cfg.to_str().unwrap(), "-o", run.to_str().unwrap()];
    let stdout = ok(&furrow(&[&args[..], &["eval-nav", "--controller", "oracle", "--trials", "3"]].concat()));
    assert!(stdout.contains("3 trials"), "{stdout}");

    for f in ["config.toml", "trials.csv", "summary.json", "traces/trial_0002.jsonl"] {
        assert!(run.join(f).exists(), "missing {f}");
    }
    let saved: toml::Value = toml::from_str(&std::fs::read_to_string(run.join("config.toml")).unwrap()).unwrap();
    assert_eq!(saved["eval"]["trials"].as_integer(), Some(3));
    assert_eq!(saved["eval"]["controller"].as_str(), Some("oracle"));

    let trace = run.join("traces/trial_0000.jsonl");
    let report: serde_json::Value = serde_json::from_str(&ok(&furrow(&["replay", "--strict", trace.to_str().unwrap()]))).unwrap();
    assert_eq!(report["identical"], true);
}

#[test]
fn saved_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = desk_config();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok(&furrow(&["-c", cfg.to_str().unwrap(), "-o", a.to_str().unwrap(), "eval-nav", "--controller", "random", "--trials", "4", "--seed", "3"]));
    let saved = a.join("config.toml");
    ok(&furrow(&["-c", saved.to_str().unwrap(), "-o", b.to_str().unwrap(), "eval-nav"]));
    let read = |d: &Path| std::fs::read_to_string(d.join("trials.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn perceive_dumps_every_stage() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = desk_config();
    let stdout = ok(&furrow(&[
        "-c", cfg.to_str().unwrap(), "-o", dir.path().to_str().unwrap(),
        "perceive", "--x", "0.2", "--y", "0", "--dump",
    ]));
    assert!(stdout.contains("front:") && stdout.contains("rear:"), "{stdout}");
    for cam in ["front", "rear"] {
        for stage in ["render", "crop", "mask", "gray", "binary", "edges", "lines"] {
            assert!(dir.path().join(format!("{cam}_{stage}.png")).exists(), "{cam}_{stage}");
        }
    }
}

#[test]
fn bad_input_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[train]\nlearning_rat = 0.1\n").unwrap();
    let out = furrow(&["-c", bad.to_str().unwrap(), "-o", dir.path().to_str().unwrap(), "train"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("learning_rat"));

    let out = furrow(&["-o", dir.path().to_str().unwrap(), "eval-nav", "--trials", "1"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--checkpoint"));

    let out = furrow(&["replay", dir.path().join("nope.jsonl").to_str().unwrap()]);
    assert!(!out.status.success());
}

#[test]
fn short_training_produces_a_usable_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.toml");
    std::fs::write(
        &cfg,
        "[env.field]\nn_rows = 3\nplants_per_row = 5\nplant_spacing = 0.6\n\n[train]\nn_steps = 128\nbatch_size = 32\nn_epochs = 2\nhidden = [16]\n",
    )
    .unwrap();
    let run = dir.path().join("train");
    let c = cfg.to_str().unwrap();
    ok(&furrow(&["-c", c, "-o", run.to_str().unwrap(), "train", "--steps", "256", "--seed", "4"]));
    let ck = run.join("final.json");
    assert!(ck.exists() && run.join("metrics.csv").exists());
    let metrics = std::fs::read_to_string(run.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 3, "{metrics}");

    let eval = dir.path().join("eval");
    let stdout = ok(&furrow(&["-c", c, "-o", eval.to_str().unwrap(), "eval-nav", "--checkpoint", ck.to_str().unwrap(), "--trials", "2"]));
    assert!(stdout.contains("2 trials"), "{stdout}");
}
