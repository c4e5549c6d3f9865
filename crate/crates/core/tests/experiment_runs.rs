use sha2::{Digest, Sha256};
use std::fs;
use std::path::Path;
use trapclock::experiment::{run_command, Command, ExperimentConfig};

fn config(toml: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml_str(toml).unwrap()
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn manifest_checksums_match_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("[overshoot]\nn_paths = 200\nfk_paths = 50\n");
    let manifest = run_command(Command::Overshoot, &cfg, dir.path()).unwrap();
    assert!(!manifest.files.is_empty());
    for f in &manifest.files {
        let data = fs::read(dir.path().join(&f.name)).unwrap();
        let hex: String = Sha256::digest(&data).iter().map(|b| format!("{b:02x}")).collect();
        assert_eq!(hex, f.sha256, "{}", f.name);
        assert_eq!(data.len() as u64, f.bytes);
    }
    let json: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(json["command"], "overshoot");
    assert_eq!(json["files"].as_array().unwrap().len(), manifest.files.len());
}

#[test]
fn minimal_simulate_writes_three_series() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = run_command(Command::Simulate, &config("[simulate]\nhorizon = 400.0\n"), dir.path()).unwrap();
    let mut names: Vec<_> = manifest.files.iter().map(|f| f.name.as_str()).collect();
    names.sort();
    assert_eq!(names, ["blocks_0_0.csv", "clock_0_0.csv", "trajectory_0_0.csv"]);
    assert!(dir.path().join("manifest.json").exists());
    assert!(manifest.events > 0);
}

#[test]
fn overshoot_table_reports_the_arcsine_target() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("[overshoot]\nalphas = [0.5]\nrhos = [1.0]\nn_paths = 400\nfk_alphas = []\n");
    run_command(Command::Overshoot, &cfg, dir.path()).unwrap();
    let table = rows(&dir.path().join("overshoot.csv"));
    assert_eq!(table.len(), 1);
    let target: f64 = table[0][5].parse().unwrap();
    assert!((target - 0.5).abs() < 1e-12);
    let p: f64 = table[0][3].parse().unwrap();
    assert!((0.0..=1.0).contains(&p));
}

#[test]
fn conditions_emit_tail_slopes_for_each_n() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("[conditions]\nn = [1000, 10000]\nt = [1.0]\nn_traj = 40\n");
    run_command(Command::Conditions, &cfg, dir.path()).unwrap();
    let table = rows(&dir.path().join("conditions.csv"));
    let slopes: Vec<_> = table.iter().filter(|r| r[0] == "nu_tail_slope").map(|r| r[1].clone()).collect();
    assert_eq!(slopes, ["1000", "10000"]);
    assert!(dir.path().join("pi.csv").exists() && dir.path().join("return_sum.csv").exists());
}

#[test]
fn validation_and_cap_failures_have_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    for (cmd, toml) in [
        (Command::Aging, "[env]\nalpha = 1.2\n"),
        (Command::Simulate, "workers = 0\n"),
        (Command::Overshoot, "[overshoot]\nrhos = []\n"),
        (Command::Conditions, "[conditions]\nn = []\n"),
    ] {
        let e = run_command(cmd, &config(toml), dir.path()).unwrap_err();
        assert_eq!(e.exit_code(), 2, "{toml}");
    }
    assert_eq!(ExperimentConfig::from_toml_str("[aging]\nnope = 1\n").unwrap_err().exit_code(), 2);
    let capped = config("[simulate]\nhorizon = 400.0\nmax_events = 5\n");
    assert_eq!(run_command(Command::Simulate, &capped, dir.path()).unwrap_err().exit_code(), 3);
    let capped = config("[aging]\ns = [1000.0]\nn_env = 2\nn_traj = 2\nmax_events = 1\nfk_eps = []\n");
    assert_eq!(run_command(Command::Aging, &capped, dir.path()).unwrap_err().exit_code(), 3);
}
