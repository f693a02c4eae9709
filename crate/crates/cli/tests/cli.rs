use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const SMALL: &str = r#"
mode = "mlhy"
seed = 7

[constellation]
kind = "ask"
bits = 2

[code]
block_len = 16
rate = 1.25
design_snr_db = 8.0
kappa_db = -0.5
n_dm = 4
crc = "10011"
construction_trials = 1000

[decoder]
list_dec = 4

[sweep]
snr_db = [6.0, 9.0]
min_errors = 20
max_frames = 2000
batch = 64

[rcu]
outer_trials = 200
calibration_frames = 100

[capacity]
snr_db = [4.0, 8.0]
"#;

fn mlhy(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mlhy")).args(args).output().expect("binary runs")
}

fn write_config(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// CSV body with the wall-time column and metadata removed.
fn rows_without_time(csv: &str) -> Vec<String> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head).to_string())
        .collect()
}

#[test]
fn construct_then_fer_is_reproducible_across_workers() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "small.toml", SMALL);
    let cons = dir.path().join("cons.json");
    let out = mlhy(&["construct", "--config", s(&cfg), "--out", s(&cons)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let fer = |workers: &str, name: &str| {
        let path = dir.path().join(name);
        let out = mlhy(&[
            "fer", "--config", s(&cfg), "--construction", s(&cons), "--workers", workers, "--out", s(&path),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read_to_string(path).unwrap()
    };
    let a = fer("1", "a.csv");
    let b = fer("4", "b.csv");
    assert_eq!(rows_without_time(&a), rows_without_time(&b));
    for key in ["# tool_version:", "# config_hash:", "# design_hash:", "# construction_hash:", "# seed: 7"] {
        assert!(a.contains(key), "missing {key}");
    }
    assert!(a.lines().any(|l| l.starts_with("snr_db,frames,frame_errors")));
    assert_eq!(rows_without_time(&a).len(), 3);
}

#[test]
fn fer_refuses_a_construction_from_another_design() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "small.toml", SMALL);
    let other = write_config(&dir, "other.toml", &SMALL.replace("n_dm = 4", "n_dm = 5"));
    let cons = dir.path().join("cons.json");
    assert!(mlhy(&["construct", "--config", s(&other), "--out", s(&cons)]).status.success());
    let out = mlhy(&["fer", "--config", s(&cfg), "--construction", s(&cons)]);
    assert!(!out.status.success());
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}

#[test]
fn seed_flag_changes_the_design_hash() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "small.toml", SMALL);
    let hash = |seed: &str| {
        let out = mlhy(&["capacity", "--config", s(&cfg), "--seed", seed]);
        assert!(out.status.success());
        let text = String::from_utf8(out.stdout).unwrap();
        text.lines().find(|l| l.starts_with("# design_hash:")).unwrap().to_string()
    };
    assert_eq!(hash("3"), hash("3"));
    assert_ne!(hash("3"), hash("4"));
}

#[test]
fn capacity_and_rcu_emit_tables() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "small.toml", SMALL);
    let cap = String::from_utf8(mlhy(&["capacity", "--config", s(&cfg)]).stdout).unwrap();
    assert!(cap.contains("# threshold_shaped_db:"));
    assert!(cap.lines().any(|l| l == "snr_db,mi_uniform,mi_shaped,nu_shaped,mi_paired"));
    let out = mlhy(&["rcu", "--config", s(&cfg)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rcu = String::from_utf8(out.stdout).unwrap();
    assert!(rcu.contains("# distribution: encoder-realized"));
    assert_eq!(rows_without_time(&rcu).len(), 3);
}

#[test]
fn bad_config_is_an_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "bad.toml", &SMALL.replace("block_len = 16", "block_len = 12"));
    let out = mlhy(&["construct", "--config", s(&cfg)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}
