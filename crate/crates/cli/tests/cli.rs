use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nn-entropy")).current_dir(dir).args(args).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) {
    let out = run(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read(dir: &Path, rel: &str) -> String {
    std::fs::read_to_string(dir.join(rel)).unwrap()
}

#[test]
fn unknown_key_is_rejected() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), &["train", "--out-dir", "t", "--set", "lr=0.1", "--set", "bogus=1", "--set", "nope=2"]);
    assert!(!o.status.success());
    let e = stderr(&o);
    assert!(e.contains("kind=invalid_config"), "{e}");
    assert!(e.contains("bogus") && e.contains("nope"), "{e}");
}

#[test]
fn missing_inputs_are_all_listed() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), &["wlmc", "--out-dir", "w", "--set", "data=nowhere"]);
    assert!(!o.status.success());
    let e = stderr(&o);
    assert!(e.contains("kind=missing_input"), "{e}");
    assert!(e.contains("train.csv") && e.contains("test.csv") && e.contains("meta.txt"), "{e}");
}

#[test]
fn zero_stages_leave_the_initial_grid() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    ok(p, &["gen-data", "--out-dir", "data", "--seed", "1"]);
    for (dir, seed) in [("a", "1"), ("b", "2")] {
        ok(p, &["wlmc", "--out-dir", dir, "--seed", seed, "--set", "data=data", "--set", "stages=0", "--set", "x_max=1"]);
    }
    assert_eq!(read(p, "a/grid.txt"), read(p, "b/grid.txt"));
}

#[test]
fn seed_changes_samples() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    ok(p, &["gen-data", "--out-dir", "data", "--seed", "1"]);
    for (dir, seed) in [("a", "1"), ("b", "2")] {
        ok(p, &["wlmc", "--out-dir", dir, "--seed", seed, "--set", "data=data", "--set", "stages=2", "--set", "steps_per_stage=500"]);
    }
    assert_ne!(read(p, "a/grid.txt"), read(p, "b/grid.txt"));
}

#[test]
fn flags_override_config_file() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    std::fs::write(p.join("run.conf"), "# spiral\nn = 12\nnoise_std = 0.1\n").unwrap();
    ok(p, &["gen-data", "--out-dir", "g", "--config", "run.conf", "--set", "n=8"]);
    let cfg = read(p, "g/config.txt");
    assert!(cfg.contains("n=8") && cfg.contains("noise_std=0.1"), "{cfg}");
    assert_eq!(read(p, "g/train.csv").lines().count(), 1 + 16);
}

#[test]
fn manifest_hashes_outputs() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    ok(p, &["gen-data", "--out-dir", "g", "--seed", "4"]);
    let m = read(p, "g/manifest.txt");
    assert!(m.starts_with("format=manifest-v1"), "{m}");
    for f in ["train.csv", "test.csv", "meta.txt"] {
        assert!(m.contains(&format!("output.{f}=")), "{m}");
    }
}

#[test]
fn help_lists_keys() {
    let o = Command::new(env!("CARGO_BIN_EXE_nn-entropy")).args(["wlmd", "--help"]).output().unwrap();
    let h = String::from_utf8_lossy(&o.stdout);
    assert!(h.contains("preset") && h.contains("sigma"), "{h}");
}
