use std::fs;
use std::process::{Command, Output};

fn meta_td(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_meta-td"))
        .args(args)
        .env_remove("MTD_OUT_DIR")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn sweep_writes_outputs_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = meta_td(&[
        "sweep",
        "--experiment",
        "gridworld",
        "--algorithm",
        "autotidbd",
        "--alpha0-grid",
        "0.05,0.5",
        "--theta-grid",
        "0.01",
        "--steps",
        "300",
        "--trials",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for name in ["curves.csv", "summary.csv", "manifest.toml"] {
        assert!(out.join(name).exists(), "{name}");
    }
    let table = stdout(&o);
    assert!(table.starts_with("algorithm\talpha0\ttheta\tlambda\tasymptotic_rmse\tdiverged\n"));
    // TD baseline and AutoTIDBD at both α₀.
    assert_eq!(table.lines().count(), 5);
}

#[test]
fn output_directory_comes_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_meta-td"))
        .args([
            "sweep",
            "--experiment",
            "gridworld",
            "--algorithm",
            "td",
            "--alpha0-grid",
            "0.1",
        ])
        .args(["--steps", "100", "--trials", "1"])
        .env("MTD_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("curves.csv").exists());
    let manifest = fs::read_to_string(dir.path().join("manifest.toml")).unwrap();
    assert!(manifest.contains(&format!("output_dir = \"{}\"", dir.path().display())));
}

#[test]
fn manifest_reruns_reproduce_curves() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let first = meta_td(&[
        "sweep",
        "--experiment",
        "gridworld",
        "--algorithm",
        "tidbd-ordinary",
        "--alpha0-grid",
        "0.1",
        "--theta-grid",
        "0.05",
        "--steps",
        "200",
        "--trials",
        "2",
        "--seed",
        "4",
        "--out",
        a.to_str().unwrap(),
    ]);
    assert!(first.status.success());
    let manifest = a.join("manifest.toml");
    let second = meta_td(&["sweep", manifest.to_str().unwrap(), "--out", b.to_str().unwrap()]);
    assert!(second.status.success(), "{}", stderr(&second));
    assert_eq!(
        fs::read(a.join("curves.csv")).unwrap(),
        fs::read(b.join("curves.csv")).unwrap()
    );
    assert_eq!(stdout(&first), stdout(&second));
}

#[test]
fn configuration_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "experiment = \"gridworld\"\nalgorithm = \"td\"\ngamma = 1.5\n").unwrap();
    for args in [
        vec!["sweep", bad.to_str().unwrap()],
        vec!["sweep", "--experiment", "gridworld"],
        vec!["sweep", "--experiment", "gridworld", "--algorithm", "autostep"],
        vec!["sweep", "--experiment", "relevance"],
        vec!["validate-config"],
        vec!["sweep", "missing.toml"],
    ] {
        let o = meta_td(&args);
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", stderr(&o));
        assert!(stderr(&o).starts_with("error:"), "{args:?}");
    }
}

#[test]
fn usage_errors_exit_one_and_help_exits_zero() {
    let o = meta_td(&["sweep", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(1));
    let o = meta_td(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    let o = meta_td(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("solve-values"));
}

#[test]
fn relevance_divergence_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = meta_td(&[
        "relevance",
        "--m-clamp",
        "per-index",
        "--steps",
        "1000",
        "--trials",
        "1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("divergence"));
}

#[test]
fn relevance_run_prints_statistics() {
    let dir = tempfile::tempdir().unwrap();
    let o = meta_td(&[
        "relevance",
        "--steps",
        "500",
        "--trials",
        "1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    for key in ["mean_alpha_noisy", "min_alpha_clean", "separated", "activation_rate"] {
        assert!(text.contains(key), "{key}");
    }
    assert!(dir.path().join("mask.csv").exists());
}

#[test]
fn solve_values_prints_gridworld_table() {
    let o = meta_td(&["solve-values"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "state,value");
    assert_eq!(rows.len(), 26);
    let v1: f64 = rows[2].split(',').nth(1).unwrap().parse().unwrap();
    assert!((v1 - 8.8).abs() < 0.05);
}

#[test]
fn solve_values_reads_tables() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("chain.txt");
    // A two-state loop paying 1 on every step has value 1 / (1 − γ).
    fs::write(&table, "# gamma 0.5\nstate next prob reward\n0 1 1 1\n1 0 1 1\n").unwrap();
    let o = meta_td(&["solve-values", "--env", "table", "--table", table.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o), "state,value\n0,2\n1,2\n");
    let o = meta_td(&["solve-values", "--env", "table"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn validate_config_prints_a_complete_manifest() {
    let o = meta_td(&[
        "validate-config",
        "--experiment",
        "signal-prediction",
        "--algorithm",
        "autotidbd",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    for key in [
        "experiment = \"signal-prediction\"",
        "code_version",
        "lambda_grid",
        "[signal]",
        "[tiles]",
    ] {
        assert!(text.contains(key), "{key}\n{text}");
    }
}
