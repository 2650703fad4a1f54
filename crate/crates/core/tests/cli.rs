use std::path::Path;
use std::process::Command;

use qdiffusion::experiment::{RunManifest, EXIT_CONFIG, EXIT_OK};

const CONFIG: &str = r#"
master_seed = 8
[model]
kind = "hhaa"
n = 40
potential = 2.0
realizations = 2
[dynamics]
n_traj = 6
t_max = 4.0
record_interval = 0.5
[dephasing]
values = [0.5]
[analysis]
window = [1.0, 4.0]
"#;

fn qdiff(args: &[&str], dir: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_qdiff"))
        .args(args)
        .current_dir(dir)
        .env("QDIFF_WORKERS", "1")
        .output()
        .unwrap()
}

#[test]
fn spread_writes_a_valid_manifest() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), CONFIG).unwrap();
    let out = qdiff(&["spread", "run.toml", "--out", "out", "--gnuplot"], dir.path());
    assert_eq!(out.status.code(), Some(EXIT_OK), "{}", String::from_utf8_lossy(&out.stderr));
    let run_dir = dir.path().join("out");
    let manifest = RunManifest::read(&run_dir).unwrap();
    manifest.validate(&run_dir).unwrap();
    let files: Vec<&str> = manifest.outputs.iter().map(|o| o.file.as_str()).collect();
    for f in ["spread.csv", "summary.json", "spread.gp"] {
        assert!(files.contains(&f), "{f} missing from {files:?}");
    }
}

#[test]
fn overrides_reach_the_config() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), CONFIG).unwrap();
    let out = qdiff(
        &["greenkubo", "run.toml", "-o", "gk", "--seed", "99", "--set", "dephasing.values=[0.1, 1.0]"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(EXIT_OK), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = RunManifest::read(&dir.path().join("gk")).unwrap();
    assert_eq!(manifest.seeds.master_seed, 99);
    let csv = std::fs::read_to_string(dir.path().join("gk/greenkubo.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn dump_hamiltonian_lists_nonzero_entries() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), CONFIG).unwrap();
    let out = qdiff(&["dump-hamiltonian", "run.toml", "-o", "h", "--realization", "1"], dir.path());
    assert_eq!(out.status.code(), Some(EXIT_OK), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("h/hamiltonian.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("row,col,value"));
    assert_eq!(csv.lines().count(), 1 + 40 + 2 * 39);
}

#[test]
fn config_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        CONFIG.replace("values = [0.5]", "values = []"),
        CONFIG.replace("values = [0.5]", "values = [-1.0]"),
        CONFIG.replace("n_traj = 6", "n_trajectories = 6"),
        CONFIG.replace("kind = \"hhaa\"", "kind = \"anderson\""),
    ];
    for (i, text) in cases.iter().enumerate() {
        let name = format!("bad{i}.toml");
        std::fs::write(dir.path().join(&name), text).unwrap();
        let out = qdiff(&["spread", &name, "-o", "bad"], dir.path());
        assert_eq!(out.status.code(), Some(EXIT_CONFIG), "case {i}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let out = qdiff(&["spread", "missing.toml"], dir.path());
    assert_eq!(out.status.code(), Some(EXIT_CONFIG));
    assert!(!dir.path().join("bad").join("manifest.json").exists());
}

#[test]
fn lindblad_size_limit_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = CONFIG.replace("n = 40", "n = 400").replace("[dynamics]", "[dynamics]\nmethod = \"both\"");
    std::fs::write(dir.path().join("big.toml"), text).unwrap();
    let out = qdiff(&["spread", "big.toml", "-o", "big"], dir.path());
    assert_eq!(out.status.code(), Some(EXIT_CONFIG), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn universal_routes_agree_at_short_decoherence_times() {
    let dir = tempfile::tempdir().unwrap();
    let text = CONFIG
        .replace("n = 40", "n = 300")
        .replace("realizations = 2", "realizations = 16")
        .replace("values = [0.5]", "values = [5.0]")
        .replace("window = [1.0, 4.0]", "methods = [\"green_kubo\", \"collapse_integral\"]");
    std::fs::write(dir.path().join("u.toml"), text).unwrap();
    let out = qdiff(&["universal", "u.toml", "-o", "u"], dir.path());
    assert_eq!(out.status.code(), Some(EXIT_OK), "{}", String::from_utf8_lossy(&out.stderr));
    let rows: Vec<csv::StringRecord> = csv::Reader::from_path(dir.path().join("u/universal.csv"))
        .unwrap()
        .records()
        .map(|r| r.unwrap())
        .collect();
    let d = |method: &str| -> f64 { rows.iter().find(|r| &r[8] == method).unwrap()[5].parse().unwrap() };
    let (kubo, collapse) = (d("green_kubo"), d("collapse_integral"));
    assert!((kubo - collapse).abs() / kubo < 0.05, "Kubo {kubo} vs collapse {collapse}");
}
