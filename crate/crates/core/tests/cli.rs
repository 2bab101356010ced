mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::{quick_fit, synthetic_pattern};

fn scmpp(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scmpp"))
        .current_dir(dir)
        .env_remove("LDM_SEED")
        .args(args)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Writes pts.csv, grids.json and budgets.json into `dir`.
fn inputs(dir: &Path) {
    std::fs::write(dir.join("pts.csv"), scmpp::io::pattern_to_csv(&synthetic_pattern(12))).unwrap();
    std::fs::write(dir.join("grids.json"), r#"{"upper_bounds": [1, 30, 30], "levels": [[8, 8, 8]]}"#).unwrap();
    let b = r#"{"maxeval": 150, "ftol_rel": 1e-5, "xtol_rel": 1e-4}"#;
    std::fs::write(dir.join("budgets.json"), format!(r#"{{"global": {b}, "local_first": {b}, "local_refine": {b}}}"#)).unwrap();
}

const FIT: [&str; 14] = [
    "fit", "--data", "pts.csv", "--window", "0,30,0,30", "--delta", "1", "--grids", "grids.json", "--budgets", "budgets.json",
    "--local-starts", "2", "--deterministic",
];

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&scmpp(dir.path(), &["frobnicate"])), 1);
    assert_eq!(code(&scmpp(dir.path(), &["fit", "--no-such-flag"])), 1);
    assert_eq!(code(&scmpp(dir.path(), &["--help"])), 0);
}

#[test]
fn missing_input_file_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    inputs(dir.path());
    let out = scmpp(dir.path(), &["summaries", "--data", "absent.csv", "--out", "c.csv"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("absent.csv"), "{}", stderr(&out));
}

#[test]
fn missing_column_is_named() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.csv"), "x,y,mass\n1,2,3\n4,5,6\n").unwrap();
    let out = scmpp(dir.path(), &["summaries", "--data", "bad.csv", "--window", "0,10,0,10", "--out", "c.csv"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("size"), "{}", stderr(&out));
}

#[test]
fn unknown_config_key_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    inputs(dir.path());
    std::fs::write(dir.path().join("run.json"), r#"{"schema_version": 1, "colour": "red"}"#).unwrap();
    let out = scmpp(dir.path(), &["--config", "run.json", "summaries", "--data", "pts.csv", "--out", "c.csv"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("colour"), "{}", stderr(&out));
}

#[test]
fn simulation_budget_error_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let mut fit = quick_fit(1);
    fit.parameters.alpha1 = 30.0;
    scmpp::io::write_json(&dir.path().join("fit.json"), &fit).unwrap();
    let out = scmpp(dir.path(), &["simulate", "--fit", "fit.json", "--out", "sim.csv"]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(!dir.path().join("sim.csv").exists());
}

#[test]
fn seed_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    inputs(dir.path());
    assert_eq!(code(&scmpp(dir.path(), &FIT.iter().copied().chain(["--out", "fit.json"]).collect::<Vec<_>>())), 0);
    let sim = |name: &str, seed: Option<&str>, flag: &[&str]| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_scmpp"));
        cmd.current_dir(dir.path()).env_remove("LDM_SEED");
        if let Some(s) = seed {
            cmd.env("LDM_SEED", s);
        }
        let out = cmd.args(flag).args(["simulate", "--fit", "fit.json", "--out", name]).output().unwrap();
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        std::fs::read(dir.path().join(name)).unwrap()
    };
    let from_env = sim("a.csv", Some("77"), &[]);
    let from_flag = sim("b.csv", None, &["--seed", "77"]);
    let other = sim("c.csv", Some("78"), &[]);
    let flag_wins = sim("d.csv", Some("78"), &["--seed", "77"]);
    assert_eq!(from_env, from_flag);
    assert_eq!(from_env, flag_wins);
    assert_ne!(from_env, other);
}

#[test]
fn deterministic_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    inputs(dir.path());
    for name in ["fit1.json", "fit2.json"] {
        let out = scmpp(dir.path(), &FIT.iter().copied().chain(["--seed", "5", "--out", name]).collect::<Vec<_>>());
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    let a = std::fs::read(dir.path().join("fit1.json")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("fit2.json")).unwrap());
    let fit: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(fit["elapsed"], 0.0);
}

#[test]
fn zero_cores_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    inputs(dir.path());
    let out = scmpp(dir.path(), &["--num-cores", "0", "summaries", "--data", "pts.csv", "--out", "c.csv"]);
    assert_eq!(code(&out), 1);
}
