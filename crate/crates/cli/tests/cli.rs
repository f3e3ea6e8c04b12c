use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rgne_core::harness::{ScenarioConfig, Table};
use rgne_core::polytope::Polytope;

const BIN: &str = env!("CARGO_BIN_EXE_rgne");

fn rgne(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("RGNE_OUT_DIR").output().unwrap()
}

fn builtin_source() -> String {
    ScenarioConfig::builtin("demo-demand-response").unwrap().to_toml()
}

fn key(path: &Path, name: &str) -> f64 {
    let text = fs::read_to_string(path).unwrap();
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{name} = ")))
        .unwrap_or_else(|| panic!("no `{name}` in {}", path.display()))
        .trim()
        .parse()
        .unwrap()
}

#[test]
fn run_writes_every_artifact_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = rgne(&["run", "--scenario", "demo-demand-response", "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["trajectory.csv", "kkt.txt", "epsilon.txt", "lyapunov.csv", "polytopes.txt", "metadata.txt", "config.toml"] {
        assert!(a.join(f).is_file(), "missing {f}");
    }
    assert_eq!(fs::read(a.join("trajectory.csv")).unwrap(), fs::read(b.join("trajectory.csv")).unwrap());
    assert_eq!(fs::read(a.join("kkt.txt")).unwrap(), fs::read(b.join("kkt.txt")).unwrap());
    let traj = Table::read_path(&a.join("trajectory.csv")).unwrap();
    assert!(traj.rows.len() > 10);

    // the echoed config reproduces the run
    let c = dir.path().join("c");
    let o = rgne(&["run", "--config", a.join("config.toml").to_str().unwrap(), "--out", c.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(fs::read(a.join("trajectory.csv")).unwrap(), fs::read(c.join("trajectory.csv")).unwrap());
}

#[test]
fn out_dir_comes_from_the_environment_when_no_flag_is_given() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(BIN)
        .args(["approx", "--center", "0,0", "--semiaxes", "1,1", "--vertices", "4"])
        .env("RGNE_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("polytope.txt").is_file());
    assert!(dir.path().join("metrics.txt").is_file());
}

#[test]
fn disconnected_graph_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, builtin_source().replace("kind = \"ring\"", "kind = \"edges\"\nedges = [[1, 2], [3, 4]]")).unwrap();
    for cmd in ["run", "validate"] {
        let o = rgne(&[cmd, "--config", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2));
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.contains("game.graph") && err.contains("connected"), "{err}");
    }
    assert!(!dir.path().join("trajectory.csv").exists());
}

#[test]
fn validate_and_argument_errors() {
    let o = rgne(&["validate", "--scenario", "demo-demand-response"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("ok:"));

    assert_eq!(rgne(&["validate", "--scenario", "nope"]).status.code(), Some(2));
    assert_eq!(rgne(&["validate"]).status.code(), Some(2));
    assert_eq!(rgne(&["run", "--scenario", "demo-demand-response", "--step-size", "-1"]).status.code(), Some(2));
    assert_eq!(rgne(&["approx", "--center", "0,0", "--semiaxes", "1,-1"]).status.code(), Some(2));
}

#[test]
fn approx_reports_known_geometry() {
    let dir = tempfile::tempdir().unwrap();
    let out = |name: &str| dir.path().join(name);

    let o = rgne(&["approx", "--center", "0,0", "--semiaxes", "1,1", "--vertices", "4", "--out", out("sq").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let h = key(&out("sq").join("metrics.txt"), "hausdorff");
    assert!((h - (1.0 - std::f64::consts::SQRT_2 / 2.0)).abs() < 1e-4, "{h}");

    let o = rgne(&["approx", "--center", "0,0", "--semiaxes", "1,1", "--vertices", "6", "--out", out("hex").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(key(&out("hex").join("metrics.txt"), "facets"), 6.0);
    let hex = Polytope::from_text(&fs::read_to_string(out("hex").join("polytope.txt")).unwrap()).unwrap();
    for (r, d) in hex.offsets().iter().enumerate() {
        let scale = hex.normals().row(r).norm();
        assert!((d / scale - (std::f64::consts::PI / 6.0).cos()).abs() < 1e-12);
    }

    let args = ["approx", "--center", "2,2", "--semiaxes", "3,2", "--vertices", "4"];
    let o = rgne(&[&args[..], &["--out", out("base").to_str().unwrap()]].concat());
    assert_eq!(o.status.code(), Some(0));
    let o = rgne(&[&args[..], &["--refine", "60", "--out", out("fine").to_str().unwrap()]].concat());
    assert_eq!(o.status.code(), Some(0));
    let (coarse, fine) = (key(&out("base").join("metrics.txt"), "hausdorff"), key(&out("fine").join("metrics.txt"), "hausdorff"));
    assert!(fine * 10.0 <= coarse, "{coarse} -> {fine}");
}

#[test]
fn sweep_table_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("small.toml");
    let mut cfg = ScenarioConfig::builtin("demo-demand-response").unwrap();
    cfg.sweep.as_mut().unwrap().vertices = vec![3, 6];
    fs::write(&path, cfg.to_toml()).unwrap();
    let o = rgne(&["sweep", "--config", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = dir.path().join("sweep.csv");
    let t = Table::read_path(&csv).unwrap();
    assert_eq!(t.rows.len(), 2);
    let eps = t.column_f64("eps_ellipsoid").unwrap();
    assert!(eps[1] < eps[0]);
    let mut again = Vec::new();
    t.to_writer(&mut again).unwrap();
    assert_eq!(again, fs::read(&csv).unwrap());
}
