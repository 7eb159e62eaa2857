use std::fs;
use std::path::Path;
use std::process::Command;

use wealthmap::ingest::{read_features, read_population};
use wealthmap::pipeline::{read_rwi, run};

fn stage(out: &Path, args: &[&str]) -> wealthmap::Result<Vec<std::path::PathBuf>> {
    let out = out.display().to_string();
    let mut argv = vec!["wealthmap", "--seed", "2", "--out", &out];
    argv.extend_from_slice(args);
    run(argv)
}

fn small_world(dir: &Path) {
    stage(dir, &["synth", "--countries", "2", "--tiles", "144", "--clusters", "25"]).unwrap();
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).display().to_string()
}

#[test]
fn synth_is_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    small_world(a.path());
    small_world(b.path());
    for name in wealthmap::synth::WORLD_FILES {
        let x = fs::read(a.path().join(name)).unwrap();
        let y = fs::read(b.path().join(name)).unwrap();
        assert!(x == y, "{name} differs");
    }
}

#[test]
fn every_output_starts_with_manifest() {
    let dir = tempfile::tempdir().unwrap();
    small_world(dir.path());
    let text = fs::read_to_string(dir.path().join("clusters.csv")).unwrap();
    let first = text.lines().next().unwrap();
    assert!(first.starts_with("# wealthmap ") && first.contains("command=synth seed=2"), "{first}");
}

#[test]
fn predict_covers_populated_tiles() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_world(d);
    stage(d, &[
        "ingest", "--features", &path(d, "features.csv"), "--population", &path(d, "population.csv"),
        "--clusters", &path(d, "clusters.csv"), "--households", &path(d, "households.csv"),
    ])
    .unwrap();
    stage(d, &["train", "--training", &path(d, "training.csv"), "--features", &path(d, "features.csv"), "--trees", "20"])
        .unwrap();
    stage(d, &[
        "predict", "--model", &path(d, "model.txt"), "--features", &path(d, "features.csv"),
        "--population", &path(d, "population.csv"),
    ])
    .unwrap();

    let features = read_features(&d.join("features.csv")).unwrap();
    let population = read_population(&d.join("population.csv")).unwrap();
    let populated = features.tiles().iter().filter(|t| population.get(t) > 0.0).count();
    let rows = read_rwi(&d.join("rwi.csv")).unwrap();
    assert_eq!(rows.len(), populated);
    assert!(rows.iter().all(|r| r.estimate.population > 0.0 && r.error.is_none()));

    let header = fs::read_to_string(d.join("rwi.csv")).unwrap().lines().nth(1).unwrap().to_string();
    assert!(header.starts_with("quadkey,latitude,longitude,rwi,aggregation_level,masked,population"));
}

#[test]
fn evaluate_all_reports_three_protocols() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_world(d);
    stage(d, &[
        "ingest", "--features", &path(d, "features.csv"), "--population", &path(d, "population.csv"),
        "--clusters", &path(d, "clusters.csv"), "--households", &path(d, "households.csv"),
    ])
    .unwrap();
    stage(d, &["evaluate", "--training", &path(d, "training.csv"), "--trees", "10"]).unwrap();
    let text = fs::read_to_string(d.join("cv_report.csv")).unwrap();
    let overall: Vec<&str> = text
        .lines()
        .filter(|l| l.contains(",all,mean,"))
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(overall, ["basic_kfold", "leave_country_out", "spatial"]);
    let importance = fs::read_to_string(d.join("importance.csv")).unwrap();
    assert_eq!(importance.lines().count(), 2 + 112);
}

#[test]
fn unknown_flag_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let err = stage(dir.path(), &["synth", "--colour", "blue"]).unwrap_err();
    assert!(err.to_string().contains("--colour"), "{err}");
}

#[test]
fn missing_input_names_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let missing = path(dir.path(), "nowhere.csv");
    let err = stage(dir.path(), &["awe", "--rwi", &missing, "--country-stats", &missing]).unwrap_err();
    assert!(err.to_string().contains("nowhere.csv"), "{err}");
}

#[test]
fn zero_threads_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().display().to_string();
    let err = run(["wealthmap", "--threads", "0", "--out", &out, "synth"]).unwrap_err();
    assert!(err.to_string().contains("--threads"), "{err}");
}

#[test]
fn binary_reports_errors_on_stderr() {
    let status = Command::new(env!("CARGO_BIN_EXE_wealthmap"))
        .args(["awe", "--rwi", "/nonexistent/rwi.csv", "--country-stats", "/nonexistent/c.csv"])
        .output()
        .unwrap();
    assert!(!status.status.success());
    let stderr = String::from_utf8_lossy(&status.stderr);
    assert!(stderr.starts_with("error: ") && stderr.contains("rwi.csv"), "{stderr}");
}

#[test]
fn binary_prints_written_paths() {
    let dir = tempfile::tempdir().unwrap();
    let output = Command::new(env!("CARGO_BIN_EXE_wealthmap"))
        .args(["--out", &dir.path().display().to_string()])
        .args(["synth", "--countries", "1", "--tiles", "64", "--clusters", "10"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert_eq!(stdout.lines().count(), wealthmap::synth::WORLD_FILES.len());
}

#[test]
fn binary_help_succeeds() {
    let output = Command::new(env!("CARGO_BIN_EXE_wealthmap")).arg("--help").output().unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    for sub in ["ingest", "train", "evaluate", "predict", "aggregate", "awe", "error", "target", "synth"] {
        assert!(stdout.contains(sub), "help lacks {sub}");
    }
}
