use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lorentz-synth")).args(args).current_dir(dir).output().expect("binary runs")
}

fn read(p: impl AsRef<Path>) -> String {
    std::fs::read_to_string(p).unwrap()
}

fn report(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&read(dir.join("report.json"))).unwrap()
}

#[test]
fn bishop_gromov_flat_equality_exits_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["bishop-gromov", "--quick", "--out", "bg"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rep = report(&tmp.path().join("bg"));
    for row in rep["reports"][0]["rows"].as_array().unwrap() {
        assert!(row["margin"].as_f64().unwrap().abs() <= 1e-3, "{row}");
    }
    assert_eq!(rep["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn lp_deficit_on_kinked_metric_is_decreasing() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["lp-deficit", "--eps-list", "0.4,0.2,0.1,0.05", "--out", "lp"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = read(tmp.path().join("lp/lp_deficit_p1.csv"));
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("eps,deficit"));
    let deficits: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(deficits.len(), 4);
    assert!(deficits.windows(2).all(|w| w[1] < w[0]), "{deficits:?}");
    let manifest: serde_json::Value = serde_json::from_str(&read(tmp.path().join("lp/plots.json"))).unwrap();
    assert_eq!(manifest.as_array().unwrap().len(), 2);
}

#[test]
fn malformed_json_exits_two_with_payload() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("bad.json"), "{\"parameters\": {").unwrap();
    let out = run(&["bishop-gromov", "--config", "bad.json", "--out", "x"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_str(String::from_utf8_lossy(&out.stderr).trim()).unwrap();
    assert_eq!(err["error"]["kind"], "parse_error");
    assert!(!tmp.path().join("x").exists());
}

#[test]
fn config_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("u.json"), r#"{"parameters": {"nonsense": 1}}"#).unwrap();
    assert_eq!(run(&["tmcp", "--config", "u.json"], tmp.path()).status.code(), Some(2));
    std::fs::write(tmp.path().join("c.json"), r#"{"command": "tmcp"}"#).unwrap();
    assert_eq!(run(&["tcd", "--config", "c.json"], tmp.path()).status.code(), Some(2));
    std::fs::write(tmp.path().join("v.json"), r#"{"parameters": {"q": 1.5}}"#).unwrap();
    let out = run(&["transport", "--config", "v.json"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("invalid_input"));
    assert_eq!(run(&["no-such-command"], tmp.path()).status.code(), Some(2));
    assert_eq!(run(&["--help"], tmp.path()).status.code(), Some(0));
}

#[test]
fn failing_inequality_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    // x² on [0.1, 1] is convex, so not CD(0, 2)
    let h: Vec<f64> = (0..=90).map(|i| (0.1 + 0.01 * i as f64).powi(2)).collect();
    let cfg = serde_json::json!({
        "command": "cd-verify",
        "parameters": {"density": {"a": 0.1, "b": 1.0, "h": h, "kappa": {"L": 0.9, "samples": [[0.0, 0.0], [0.9, 0.0]]}, "N": 2.0}},
    });
    std::fs::write(tmp.path().join("cd.json"), cfg.to_string()).unwrap();
    let out = run(&["cd-verify", "--config", "cd.json", "--out", "cd"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(report(&tmp.path().join("cd"))["reports"][0]["status"], "failed");
}

#[test]
fn hypothesis_violation_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = r#"{"model": {"k": 1.0, "n": 2.0, "dip": 3.0, "slab": [0.3, 0.6], "margin": 0.02, "x_half_width": 2.0},
                  "parameters": {"sample_grid": 5}}"#;
    std::fs::write(tmp.path().join("a.json"), cfg).unwrap();
    let out = run(&["aubry", "--config", "a.json", "--out", "a"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(report(&tmp.path().join("a"))["reports"][0]["status"], "hypothesis_violated");
}

#[test]
fn same_config_and_seed_reproduce_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("b.json"), r#"{"parameters": {"n_random": 12}, "seed": 7}"#).unwrap();
    for d in ["r1", "r2"] {
        assert_eq!(run(&["brenier", "--config", "b.json", "--out", d], tmp.path()).status.code(), Some(0));
    }
    let (a, b) = (tmp.path().join("r1"), tmp.path().join("r2"));
    for f in ["margins.csv", "brenier_deviation.csv", "plots.json"] {
        assert_eq!(read(a.join(f)), read(b.join(f)), "{f}");
    }
    let (ra, rb) = (report(&a), report(&b));
    assert_eq!(ra["reports"], rb["reports"]);
    assert_eq!(ra["config_hash"], rb["config_hash"]);
    // a different seed draws a different target measure
    assert_eq!(run(&["brenier", "--config", "b.json", "--seed", "8", "--out", "r3"], tmp.path()).status.code(), Some(0));
    assert_ne!(read(a.join("margins.csv")), read(tmp.path().join("r3/margins.csv")));
}

#[test]
fn config_hash_ignores_formatting() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("x.json"), r#"{"parameters":{"k":-1.0,"n":2.5}}"#).unwrap();
    std::fs::write(tmp.path().join("y.json"), "{\n  \"parameters\": {\n    \"n\": 2.5,\n    \"k\": -1.0\n  }\n}\n").unwrap();
    for (c, d) in [("x.json", "x"), ("y.json", "y")] {
        assert_eq!(run(&["cd-verify", "--config", c, "--out", d], tmp.path()).status.code(), Some(0));
    }
    assert_eq!(report(&tmp.path().join("x"))["config_hash"], report(&tmp.path().join("y"))["config_hash"]);
}

#[test]
fn quick_suite_writes_one_row_per_criterion() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["suite", "quick", "--out", "s"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("[PASS]")).count(), 15);
    let first = read(tmp.path().join("s/suite.csv"));
    assert!(first.starts_with("id,name,passed,metric,value"));
    assert_eq!(run(&["suite", "quick", "--out", "s2"], tmp.path()).status.code(), Some(0));
    assert_eq!(first, read(tmp.path().join("s2/suite.csv")));
}

#[test]
fn every_subcommand_help_names_its_statement() {
    let tmp = tempfile::tempdir().unwrap();
    for (cmd, word) in [
        ("distortion", "distortion"),
        ("cd-verify", "CD"),
        ("transport", "Wasserstein"),
        ("tmcp", "contraction"),
        ("tcd", "curvature-dimension"),
        ("brunn-minkowski", "Brunn"),
        ("bishop-gromov", "Bishop"),
        ("bonnet-myers", "Bonnet"),
        ("dalembert", "d'Alembert"),
        ("eikonal", "Eikonal"),
        ("brenier", "Brenier"),
        ("needles", "Needle"),
        ("mollify", "Mollification"),
        ("lp-deficit", "deficit"),
        ("aubry", "Diameter"),
        ("suite", "Acceptance"),
    ] {
        let out = run(&[cmd, "--help"], tmp.path());
        assert_eq!(out.status.code(), Some(0));
        assert!(String::from_utf8_lossy(&out.stdout).contains(word), "{cmd}");
    }
}

#[test]
fn mollify_writes_a_readable_grid() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("m.json"), r#"{"parameters": {"grid": "cosh", "eps_list": [0.1], "write_grid": true}}"#).unwrap();
    assert_eq!(run(&["mollify", "--config", "m.json", "--out", "m"], tmp.path()).status.code(), Some(0));
    let path = tmp.path().join("m/mollified.bin");
    assert!(path.exists());
    let cfg = format!(r#"{{"parameters": {{"grid": {:?}, "eps_list": [0.2]}}}}"#, path.display().to_string());
    std::fs::write(tmp.path().join("m2.json"), cfg).unwrap();
    assert_eq!(run(&["mollify", "--config", "m2.json", "--out", "m2"], tmp.path()).status.code(), Some(0));
}
