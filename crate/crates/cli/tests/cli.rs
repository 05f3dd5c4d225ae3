// Copyright 2026 The bifr Authors
// SPDX-License-Identifier: Apache-2.0

use std::process::{Command, Output};

fn bifr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bifr"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = bifr(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    bifr(args).status.code().unwrap()
}

/// Parses `index,value` rows.
fn values(csv: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("index,value"));
    lines
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect()
}

fn column(csv: &str, name: &str) -> Vec<String> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = header.iter().position(|h| *h == name).unwrap();
    lines
        .map(|l| l.split(',').nth(idx).unwrap().to_string())
        .collect()
}

const BIFR3: [&str; 9] = [
    "coeffs",
    "--method",
    "gamma-bifr",
    "--gamma",
    "0.5",
    "--bandwidth",
    "3",
    "--n",
    "5",
];

#[test]
fn coeffs_examples() {
    let mut args = BIFR3.to_vec();
    assert_eq!(
        values(&stdout(&args)),
        vec![1.0, 0.5, 0.375, 0.25, 0.171875]
    );
    args.extend(["--which", "inverse"]);
    assert_eq!(values(&stdout(&args)), vec![1.0, -0.5, -0.125, 0.0, 0.0]);
    assert_eq!(
        values(&stdout(&["coeffs", "--method", "identity", "--n", "3"])),
        vec![1.0, 0.0, 0.0]
    );
}

#[test]
fn coeffs_uses_seventeen_digits() {
    let out = stdout(&[
        "coeffs",
        "--method",
        "dp-lambda-cgd",
        "--lambda",
        "0.3",
        "--n",
        "3",
    ]);
    let third = out
        .lines()
        .nth(3)
        .unwrap()
        .split(',')
        .nth(1)
        .unwrap()
        .to_string();
    let mantissa = third.split('e').next().unwrap().replace(['.', '-'], "");
    assert_eq!(mantissa.len(), 17);
    assert_eq!(third.parse::<f64>().unwrap(), 0.3 * 0.3);
}

#[test]
fn invalid_flag_combinations() {
    assert_eq!(
        code(&["coeffs", "--method", "identity", "--gamma", "0.5", "--n", "3"]),
        2
    );
    assert_eq!(
        code(&[
            "coeffs",
            "--method",
            "gamma-bifr",
            "--gamma",
            "0.5",
            "--n",
            "3"
        ]),
        2
    );
    assert_eq!(
        code(&[
            "coeffs",
            "--method",
            "gamma-bifr",
            "--gamma",
            "1.5",
            "--bandwidth",
            "2",
            "--n",
            "3"
        ]),
        2
    );
    assert_eq!(code(&["rmse", "--method", "identity"]), 2);
    assert_eq!(
        code(&["rmse", "--method", "identity", "--n", "4", "--epsilon", "1"]),
        2
    );
    assert_eq!(
        code(&["rmse", "--method", "identity", "--n", "4", "--k", "3", "--b", "4"]),
        2
    );
}

#[test]
fn rmse_examples() {
    let out = stdout(&[
        "rmse", "--method", "identity", "--n", "4", "--k", "1", "--b", "4",
    ]);
    let r: f64 = column(&out, "rmse")[0].parse().unwrap();
    assert!((r - 1.58114).abs() < 1e-5);

    let common = ["--n", "64", "--k", "4", "--bandwidth", "8"];
    let mut a = vec!["rmse", "--method", "bisr"];
    a.extend(common);
    let mut b = vec!["rmse", "--method", "gamma-bifr", "--gamma", "0.5"];
    b.extend(common);
    assert_eq!(column(&stdout(&a), "rmse"), column(&stdout(&b), "rmse"));

    let scaled = stdout(&[
        "rmse",
        "--method",
        "identity",
        "--n",
        "4",
        "--epsilon",
        "1",
        "--delta",
        "1e-5",
    ]);
    let sigma: f64 = column(&scaled, "sigma")[0].parse().unwrap();
    assert!(sigma > 3.0 && sigma <= 4.847);
}

#[test]
fn sweep_examples() {
    let out = stdout(&[
        "sweep",
        "--method",
        "gamma-bifr",
        "--bandwidth",
        "2",
        "--n",
        "1024",
    ]);
    assert_eq!(out.lines().count(), 1 + 19);
    let best: Vec<String> = out
        .lines()
        .skip(1)
        .filter(|l| l.ends_with(",1"))
        .map(|l| l.split(',').nth(5).unwrap().to_string())
        .collect();
    assert_eq!(best.len(), 1);
    assert!(best[0].parse::<f64>().unwrap() > 0.5);

    let grid = stdout(&[
        "sweep",
        "--method",
        "gamma-bifr",
        "--bandwidth",
        "2",
        "--n",
        "64",
        "--grid",
        "0.05:0.95:0.05",
    ]);
    assert_eq!(grid.lines().count(), 20);
    assert_eq!(
        code(&[
            "sweep",
            "--method",
            "gamma-bifr",
            "--bandwidth",
            "2",
            "--n",
            "64",
            "--grid",
            ""
        ]),
        2
    );
    assert_eq!(code(&["sweep", "--method", "identity", "--n", "64"]), 2);

    let lambda = stdout(&[
        "sweep",
        "--method",
        "dp-lambda-cgd",
        "--n",
        "256",
        "--k",
        "4",
        "--b",
        "64",
        "--grid",
        "0:0.9:0.1",
    ]);
    let rmses: Vec<f64> = column(&lambda, "rmse")
        .iter()
        .map(|v| v.parse().unwrap())
        .collect();
    let min = rmses.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(min <= rmses[0]);
}

#[test]
fn compare_examples() {
    let out = stdout(&[
        "compare",
        "--n",
        "2048",
        "--k",
        "8",
        "--b",
        "256",
        "--methods",
        "dp-lambda-cgd,bisr,gamma-bifr",
        "--gamma-grid",
        "0.01:0.99:0.01",
    ]);
    assert_eq!(
        column(&out, "method"),
        vec!["gamma-bifr", "bisr", "dp-lambda-cgd"]
    );

    let single = stdout(&["compare", "--n", "64", "--spec", "method=bisr,bandwidth=4"]);
    let direct = stdout(&["rmse", "--n", "64", "--method", "bisr", "--bandwidth", "4"]);
    assert_eq!(single, direct);

    assert_eq!(
        code(&[
            "compare",
            "--n",
            "64",
            "--spec",
            "method=bisr,bandwidth=4,n=32"
        ]),
        2
    );
    assert_eq!(code(&["compare", "--n", "64"]), 2);
}

#[test]
fn simulate_examples() {
    let out = stdout(&[
        "simulate", "--method", "identity", "--n", "16", "--trials", "4000", "--dim", "2",
    ]);
    let est: f64 = column(&out, "estimate")[0].parse().unwrap();
    let se: f64 = column(&out, "std_error")[0].parse().unwrap();
    let analytic: f64 = column(&out, "analytic")[0].parse().unwrap();
    assert!((est - analytic).abs() <= 3.0 * se);
    assert_eq!(
        code(&["simulate", "--method", "identity", "--n", "16", "--trials", "0"]),
        2
    );
    assert_eq!(
        code(&[
            "simulate",
            "--method",
            "gamma-bfr",
            "--gamma",
            "0.5",
            "--bandwidth",
            "2",
            "--n",
            "16"
        ]),
        2
    );
}

#[test]
fn verify_examples() {
    let out = stdout(&["verify", "--suite", "all", "--quick"]);
    assert_eq!(out.lines().count(), 7);
    assert!(column(&out, "violations").iter().all(|v| v == "0"));
    let one = stdout(&[
        "verify",
        "--suite",
        "prefix-identity",
        "--quick",
        "--format",
        "json",
    ]);
    let rows: serde_json::Value = serde_json::from_str(&one).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 1);
    assert_eq!(rows[0]["suite"], "prefix-identity");
    assert_eq!(code(&["verify", "--suite", "nope"]), 2);
}

#[test]
fn runs_are_reproducible_and_replayable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    let out = dir.path().join("out.csv");
    let args = [
        "simulate",
        "--method",
        "bisr",
        "--bandwidth",
        "4",
        "--n",
        "32",
        "--trials",
        "200",
        "--seed",
        "7",
    ];
    let first = stdout(&args);
    assert_eq!(first, stdout(&args));
    let mut other = args.to_vec();
    let last = other.len() - 1;
    other[last] = "8";
    assert_ne!(first, stdout(&other));

    let mut save = args.to_vec();
    save.extend([
        "--save-config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(stdout(&save).is_empty());
    let saved = std::fs::read_to_string(&out).unwrap();
    assert_eq!(saved, first);
    std::fs::remove_file(&out).unwrap();
    stdout(&["replay", cfg.to_str().unwrap()]);
    assert_eq!(std::fs::read_to_string(&out).unwrap(), first);
}

#[test]
fn json_mirrors_csv() {
    let mut args = BIFR3.to_vec();
    args.extend(["--which", "b", "--format", "json"]);
    let rows: serde_json::Value = serde_json::from_str(&stdout(&args)).unwrap();
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 5);
    assert_eq!(rows[4]["index"], 4);
    assert_eq!(rows[4]["value"], 0.375);
}
