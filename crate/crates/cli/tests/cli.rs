use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use pilotwave::io::content_hash;

fn pilotwave(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pilotwave")).args(args).current_dir(dir).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn manifest_value(dir: &Path, key: &str) -> String {
    let m = fs::read_to_string(dir.join("manifest.txt")).unwrap();
    m.lines().find_map(|l| l.strip_prefix(&format!("{key} = ")).map(str::to_string)).unwrap_or_else(|| panic!("no {key} in manifest"))
}

const SMALL_LINE: &str = r#"
[[grid.axes]]
lower = -10.0
upper = 10.0
count = 128
boundary = "periodic"

[initial]
preset = "gaussian-packet"
momentum = [1.0]

[solver]
t_end = 0.5
dt = 0.01
store_every = 10

[trajectories]
particles = 500
resamples = 4
"#;

#[test]
fn shoemaker_finds_witness_at_61_years() {
    let tmp = tempfile::tempdir().unwrap();
    let o = pilotwave(&["shoemaker", "--years", "61", "--out", "s"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = fs::read_to_string(tmp.path().join("s/report.txt")).unwrap();
    assert!(report.contains("witness = found"));
    assert!(report.contains("augmented_markov = true"));
    let rows = fs::read_to_string(tmp.path().join("s/trace.csv")).unwrap().lines().count();
    assert_eq!(rows, 1 + 61 * 365 + 1);
    assert_eq!(manifest_value(&tmp.path().join("s"), "outcome"), "ok");
}

#[test]
fn shoemaker_has_no_witness_within_60_years() {
    let tmp = tempfile::tempdir().unwrap();
    let o = pilotwave(&["shoemaker", "--years", "60", "--out", "s"], tmp.path());
    assert_eq!(code(&o), 0);
    assert!(fs::read_to_string(tmp.path().join("s/report.txt")).unwrap().contains("witness = none"));
}

#[test]
fn unknown_key_is_a_line_anchored_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("c.toml"), "seed = 2\n[solver]\ndt = 0.01\nbogus = 1\n").unwrap();
    let o = pilotwave(&["evolve", "--config", "c.toml", "--out", "e"], tmp.path());
    assert_eq!(code(&o), 1);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 4"), "{err}");
    assert!(err.contains("bogus"), "{err}");
}

#[test]
fn malformed_toml_and_bad_usage_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("c.toml"), "[solver\n").unwrap();
    assert_eq!(code(&pilotwave(&["evolve", "--config", "c.toml"], tmp.path())), 1);
    assert_eq!(code(&pilotwave(&["evolve", "--config", "missing.toml"], tmp.path())), 1);
    assert_eq!(code(&pilotwave(&["no-such-command"], tmp.path())), 1);
    assert_eq!(code(&pilotwave(&["--help"], tmp.path())), 0);
}

#[test]
fn invalid_grid_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("c.toml"), "[[grid.axes]]\nlower = 1.0\nupper = -1.0\ncount = 16\nboundary = \"periodic\"\n").unwrap();
    let o = pilotwave(&["evolve", "--config", "c.toml", "--out", "e"], tmp.path());
    assert_eq!(code(&o), 1);
    assert!(manifest_value(&tmp.path().join("e"), "outcome").starts_with("failed"));
}

#[test]
fn locked_output_directory_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    fs::create_dir(tmp.path().join("o")).unwrap();
    fs::write(tmp.path().join("o/.lock"), "pid = 0\n").unwrap();
    let o = pilotwave(&["shoemaker", "--years", "2", "--out", "o"], tmp.path());
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("locked"));
    assert!(!tmp.path().join("o/manifest.txt").exists());
}

#[test]
fn lock_is_released_after_a_run() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&pilotwave(&["shoemaker", "--years", "2", "--out", "o"], tmp.path())), 0);
    assert!(!tmp.path().join("o/.lock").exists());
    assert_eq!(code(&pilotwave(&["shoemaker", "--years", "2", "--out", "o"], tmp.path())), 0);
}

#[test]
fn manifest_hash_is_the_hash_of_the_written_config() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("c.toml"), SMALL_LINE).unwrap();
    assert_eq!(code(&pilotwave(&["evolve", "--config", "c.toml", "--out", "e"], tmp.path())), 0);
    let dir = tmp.path().join("e");
    let hash = content_hash(&fs::read(dir.join("config.toml")).unwrap());
    assert_eq!(manifest_value(&dir, "config_hash"), hash);
    let series = pilotwave::schrodinger::SnapshotSeries::load(&dir.join("series")).unwrap();
    assert_eq!(series.config_hash(), Some(hash.as_str()));
    assert_eq!(series.len(), 6);
}

#[test]
fn identical_seeds_reproduce_trajectory_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("c.toml"), SMALL_LINE).unwrap();
    let run = |out: &str, seed: &str, threads: &str| {
        let o = pilotwave(&["trajectories", "--config", "c.toml", "--seed", seed, "--threads", threads, "--out", out], tmp.path());
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        (fs::read(tmp.path().join(out).join("trajectories.pwt")).unwrap(), fs::read(tmp.path().join(out).join("trajectories.csv")).unwrap())
    };
    let a = run("a", "5", "1");
    let b = run("b", "5", "2");
    let c = run("c", "6", "1");
    assert_eq!(a, b);
    assert_ne!(a.0, c.0);
}

#[test]
fn rerun_from_written_config_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("c.toml"), SMALL_LINE).unwrap();
    assert_eq!(code(&pilotwave(&["trajectories", "--config", "c.toml", "--seed", "11", "--out", "a"], tmp.path())), 0);
    assert_eq!(code(&pilotwave(&["trajectories", "--config", "a/config.toml", "--out", "b"], tmp.path())), 0);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(manifest_value(&a, "config_hash"), manifest_value(&b, "config_hash"));
    assert_eq!(manifest_value(&b, "seed"), "11");
    assert_eq!(fs::read(a.join("trajectories.pwt")).unwrap(), fs::read(b.join("trajectories.pwt")).unwrap());
    assert_eq!(fs::read(a.join("equivariance.txt")).unwrap(), fs::read(b.join("equivariance.txt")).unwrap());
}

#[test]
fn double_slit_records_one_landing_per_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = r#"
[double_slit]
x_range = [-12.0, 12.0]
x_points = 96
y_range = [-4.0, 20.0]
y_points = 96
separation = 5.0
momentum_y = 4.0
screen = 8.0
t_end = 3.0
dt = 0.05
bins = 12
bin_range = [-8.0, 8.0]
"#;
    fs::write(tmp.path().join("c.toml"), cfg).unwrap();
    let o = pilotwave(&["double-slit", "--config", "c.toml", "--runs", "200", "--out", "d"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let dir = tmp.path().join("d");
    assert_eq!(fs::read_to_string(dir.join("landings.csv")).unwrap().lines().count(), 201);
    let hist = fs::read_to_string(dir.join("histogram.csv")).unwrap();
    let total: u64 = hist.lines().skip(1).map(|l| l.split(',').nth(3).unwrap().parse::<u64>().unwrap()).sum();
    assert_eq!(total, 200);
    assert!(fs::read_to_string(dir.join("config.toml")).unwrap().contains("runs = 200"));
}

#[test]
fn hmm_coefficient_controls() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&pilotwave(&["hmm-build", "--out", "ok"], tmp.path())), 0);
    assert!(fs::read_to_string(tmp.path().join("ok/certification.txt")).unwrap().contains("certified = true"));
    assert!(fs::read_to_string(tmp.path().join("ok/model/manifest.txt"))
        .unwrap()
        .contains(&manifest_value(&tmp.path().join("ok"), "config_hash")));

    fs::write(tmp.path().join("bad.toml"), "[hmm]\ncoefficients = [2.0]\n").unwrap();
    assert_eq!(code(&pilotwave(&["hmm-build", "--config", "bad.toml", "--out", "bad"], tmp.path())), 1);

    fs::write(tmp.path().join("forced.toml"), "[hmm]\ncoefficients = [2.0]\nallow_coefficient_violation = true\n").unwrap();
    let o = pilotwave(&["hmm-build", "--config", "forced.toml", "--out", "forced"], tmp.path());
    assert_eq!(code(&o), 3);
    assert!(manifest_value(&tmp.path().join("forced"), "outcome").starts_with("uncertified"));
}

#[test]
fn gauge_compare_reports_restriction_and_ensembles() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = r#"
[[grid.axes]]
lower = -8.0
upper = 8.0
count = 64
boundary = "periodic"

[[grid.axes]]
lower = -8.0
upper = 8.0
count = 64
boundary = "periodic"

[solver]
t_end = 0.2
dt = 0.01
store_every = 5

[trajectories]
particles = 300
resamples = 4

[gauge.function]
kind = "linear"
p = [0.5, 0.0]
"#;
    fs::write(tmp.path().join("c.toml"), cfg).unwrap();
    let o = pilotwave(&["gauge-compare", "--config", "c.toml", "--out", "g"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = fs::read_to_string(tmp.path().join("g/comparison.txt")).unwrap();
    assert!(report.contains("restricted = false"), "{report}");
    assert!(report.contains(&manifest_value(&tmp.path().join("g"), "config_hash")));
    assert_eq!(fs::read_to_string(tmp.path().join("g/gauged.csv")).unwrap().lines().count(), 1 + 300 * 5);
}

#[test]
fn phase_space_audit_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = pilotwave(&["phase-space", "--out", "p"], tmp.path());
    assert_eq!(code(&o), 0);
    assert!(fs::read_to_string(tmp.path().join("p/report.txt")).unwrap().contains("passes = true"));
}
