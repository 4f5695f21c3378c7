use std::fs;
use std::process::{Command, Output};

fn recsparse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_recsparse")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn minimal_simulate_run_writes_outputs_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = recsparse(&["simulate", "--trials", "1", "--horizon", "1", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["metrics.csv", "diagnostics.csv", "nmse.dat", "extras.dat", "misses.dat", "manifest.toml"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let manifest = fs::read_to_string(out.join("manifest.toml")).unwrap();
    assert!(manifest.contains("trials = 1"));
    assert!(fs::read_to_string(out.join("metrics.csv")).unwrap().starts_with("# recsparse metrics v1"));
}

#[test]
fn config_file_and_overrides_combine() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    fs::write(&cfg, "name = \"small\"\nm = 60\ns0 = 6\nsa = 1\nn = 30\ntrials = 3\nhorizon = 4\nalgorithms = [\"mod_cs\"]\n").unwrap();
    let out = dir.path().join("out");
    let o = recsparse(&["simulate", "--config", cfg.to_str().unwrap(), "--trials", "2", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = fs::read_to_string(out.join("manifest.toml")).unwrap();
    assert!(manifest.contains("trials = 2") && manifest.contains("m = 60"));
    assert!(stdout(&o).contains("mod_cs"));
}

#[test]
fn simulate_output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = recsparse(&["simulate", "--m", "60", "--s0", "6", "--sa", "1", "--n", "30", "--trials", "3", "--horizon", "5", "--seed", "4", "--out", out.to_str().unwrap()]);
        assert!(o.status.success());
        fs::read(out.join("metrics.csv")).unwrap()
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn check_prints_a_condition_report() {
    let o = recsparse(&["check", "--theorem", "2", "--s0", "20", "--sa", "2", "--eps", "0.97", "--r", "1", "--alpha-add", "0.0633", "--samples", "200"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    for name in ["false_additions", "delta_modcs", "delta_ls", "theta", "rate", "overall"] {
        assert!(text.contains(name), "{name} missing from\n{text}");
    }
    // Constants of a 65 x 200 matrix at these orders can only be sampled.
    assert!(!text.contains("overall: holds"));
}

#[test]
fn check_with_fixed_constants_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("check");
    let o = recsparse(&[
        "check", "--theorem", "1", "--s0", "12", "--sa", "2", "--eps", "0.01", "--r", "1", "--delta", "0.1", "--theta", "0.05",
        "--oracle-start", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("overall: holds"));
    assert!(out.join("report.txt").exists() && out.join("manifest.toml").exists());
}

#[test]
fn ric_round_trips_a_saved_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.csv");
    let p = path.to_str().unwrap();
    let first = recsparse(&["ric", "--s", "2", "--n", "6", "--m", "10", "--save-matrix", p]);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    assert!(stdout(&first).contains("method=exhaustive"));
    let again = recsparse(&["ric", "--s", "2", "--matrix", p]);
    assert_eq!(stdout(&first), stdout(&again));
    let theta = recsparse(&["ric", "--s1", "2", "--s2", "1", "--matrix", p]);
    assert!(stdout(&theta).contains("constant=roc"));
}

#[test]
fn zeta_reports_an_estimate() {
    let o = recsparse(&["zeta", "--m", "60", "--s0", "6", "--sa", "1", "--n", "30", "--trials", "2", "--horizon", "5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let z: f64 = text.lines().find_map(|l| l.strip_prefix("zeta=")).unwrap().parse().unwrap();
    // With sa = 1 the ratio ||e||_inf / ||e|| lies in (0, 1].
    assert!(z > 0.0 && z <= 1.0 + 1e-12, "{text}");
}

#[test]
fn exit_codes_separate_usage_from_runtime_errors() {
    assert_eq!(recsparse(&["simulate", "--bogus"]).status.code(), Some(1));
    assert_eq!(recsparse(&["figure3", "--panel", "z"]).status.code(), Some(1));
    let invalid = recsparse(&["simulate", "--trials", "0"]);
    assert_eq!(invalid.status.code(), Some(1));
    assert!(!invalid.stderr.is_empty());
    let missing = recsparse(&["ric", "--s", "2", "--matrix", "/nonexistent/a.csv"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).starts_with("error:"));
    assert_eq!(recsparse(&["--help"]).status.code(), Some(0));
}
