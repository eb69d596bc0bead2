use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SMALL_L63: &str = r#"
name = "small"
seed = 2

[data]
source = "simulate"

[data.truth.model]
name = "lorenz63"
learn = ["alpha", "sigma"]

[data.truth.params]
alpha = 10.0
sigma = 10.0

[data.truth.simulation]
dt = 0.002
duration = 30.0
output_interval = 0.02

[statistics]
moment_groups = [{ components = [0, 1, 2], max_order = 2 }]
burn_in = 5.0

[gamma]
n_batches = 5

[model]
name = "lorenz63"
learn = ["alpha", "sigma"]

[forward]
dt = 0.002
duration = 30.0
output_interval = 0.02

[eki]
ensemble_size = 8
max_gens = 2

[eki.priors]
alpha = { kind = "uniform", lo = 5.0, hi = 15.0 }
sigma = { kind = "uniform", lo = 1.0, hi = 20.0 }

[validation]
length_factor = 1.0
bins = 20
"#;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ergodic-eki")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_writes_bundle() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "small.toml", SMALL_L63);
    let out = tmp.path().join("out");
    let o = cli(&["run", path_str(&cfg), "--out", path_str(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("alpha ="), "{stdout}");
    assert!(stdout.contains("TV(pooled)"), "{stdout}");
    for f in ["summary.json", "eki_history.jsonl", "final_ensemble.csv", "histograms.csv"] {
        assert!(out.join(f).is_file(), "{f}");
    }
}

#[test]
fn bundled_config_runs_at_smoke_scale() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/l63_case_i_ode.toml");
    let o = cli(&["run", path_str(&cfg), "--smoke", "--seed", "3", "--out", path_str(tmp.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = std::fs::read_to_string(tmp.path().join("summary.json")).unwrap();
    assert!(summary.contains("\"seed\": 3") || summary.contains("\"seed\":3"), "{summary}");
}

#[test]
fn config_errors_exit_with_2() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = write(tmp.path(), "bad.toml", &SMALL_L63.replace("bins = 20", "bins = 20\nbogus = 1"));
    let o = cli(&["run", path_str(&bad)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bogus"));

    let o = cli(&["run", path_str(&tmp.path().join("absent.toml"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn data_errors_exit_with_3() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write(tmp.path(), "spec.toml", "moments = [[0]]\nburn_in = 0.0\n");
    let csv = write(tmp.path(), "traj.csv", "t,x1\n0,1.0\n0.1,oops\n0.2,3.0\n");
    let o = cli(&["stats", path_str(&csv), path_str(&spec)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn solver_errors_exit_with_4() {
    let tmp = tempfile::tempdir().unwrap();
    // explicit Euler with alpha * dt > 2 diverges for every member
    let text = SMALL_L63
        .replace("alpha = { kind = \"uniform\", lo = 5.0, hi = 15.0 }", "alpha = { kind = \"uniform\", lo = 400.0, hi = 500.0 }")
        .replace("[forward]\ndt = 0.002", "[forward]\ndt = 0.01")
        .replace("duration = 30.0\noutput_interval = 0.02\n\n[eki]", "duration = 30.0\noutput_interval = 0.01\n\n[eki]");
    let cfg = write(tmp.path(), "diverge.toml", &text);
    let o = cli(&["run", path_str(&cfg), "--out", path_str(&tmp.path().join("out"))]);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn stats_prints_data_vector() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write(tmp.path(), "spec.toml", "moments = [[0], [0, 0]]\nburn_in = 0.0\n");
    let mut rows = String::from("t,x1\n");
    for i in 0..400 {
        rows.push_str(&format!("{},{}\n", i as f64 * 0.1, if i % 2 == 0 { 1.0 } else { -1.0 }));
    }
    let csv = write(tmp.path(), "traj.csv", &rows);
    let o = cli(&["stats", path_str(&csv), path_str(&spec), "--batches", "4"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("moment[0,0]"), "{stdout}");

    let out = tmp.path().join("obs.json");
    let o = cli(&["stats", path_str(&csv), path_str(&spec), "--out", path_str(&out)]);
    assert!(o.status.success());
    assert!(std::fs::read_to_string(out).unwrap().contains("gamma"));
}

#[test]
fn simulate_writes_series_and_observation() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "small.toml", SMALL_L63);
    let out = tmp.path().join("sim");
    let o = cli(&["simulate", path_str(&cfg), "--out", path_str(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let data = std::fs::read_to_string(out.join("data.csv")).unwrap();
    assert_eq!(data.lines().next(), Some("t,x1,x2,x3"));
    assert_eq!(data.lines().count(), 1 + 1501);
    assert!(out.join("observation.json").is_file());
}
