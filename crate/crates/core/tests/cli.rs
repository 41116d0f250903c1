use std::path::Path;
use std::process::{Command, Output};

fn apt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cropland-apt"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .unwrap()
}

fn synth(root: &Path) -> String {
    let data = root.join("data");
    let o = apt(&["synth", "--out", data.to_str().unwrap(), "--tiles-x", "2", "--tiles-y", "1", "--tile-size", "60"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    data.join("config.toml").to_string_lossy().into_owned()
}

#[test]
fn run_on_synthetic_data() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = synth(tmp.path());
    let o = apt(&["run", "--config", &cfg]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = String::from_utf8(o.stdout).unwrap();
    assert!(out.contains("2 tiles: 2 completed, 0 skipped, 0 failed"), "{out}");
    assert!(tmp.path().join("data/out/summary.json").is_file());
}

#[test]
fn stage_commands_then_ablation() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = synth(tmp.path());
    for cmd in ["prelabel", "sample", "predict", "evaluate"] {
        let o = apt(&[cmd, "--config", &cfg, "--workers", "2"]);
        assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let o = apt(&["ablate-noise", "--config", &cfg, "--seed", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().filter(|l| l.starts_with("flip_p")).count(), 3);
}

#[test]
fn missing_config_is_a_usage_error() {
    assert_eq!(apt(&["run"]).status.code(), Some(2));
    assert_eq!(apt(&["run", "--config", "/nonexistent/config.toml"]).status.code(), Some(2));
}

#[test]
fn invalid_config_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "seed = \"zero\"\n").unwrap();
    let o = apt(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    assert_eq!(apt(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn vfm_backend_without_graphs_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = synth(tmp.path());
    let o = apt(&["run", "--config", &cfg, "--backend", "vfm"]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}
