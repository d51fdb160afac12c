//! The `concentra` command line, in process and as a binary.

mod common;

use std::path::Path;
use std::process::Command;

use concentra::cli::run;

struct Run {
    code: i32,
    out: String,
    err: String,
}

fn run_with(args: &[&str], env: &[(&str, &str)]) -> Run {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("concentra").chain(args.iter().copied());
    let code = run(
        argv,
        |k| env.iter().find(|(n, _)| *n == k).map(|(_, v)| v.to_string()),
        &mut out,
        &mut err,
    );
    Run {
        code,
        out: String::from_utf8(out).unwrap(),
        err: String::from_utf8(err).unwrap(),
    }
}

fn cli(args: &[&str]) -> Run {
    run_with(args, &[])
}

fn fixture(name: &str) -> String {
    common::fixture(name).display().to_string()
}

/// Last field of the first data row.
fn value(csv: &str) -> f64 {
    csv.lines().nth(1).unwrap().rsplit(',').next().unwrap().parse().unwrap()
}

#[test]
fn national_hhi_of_worked_economy() {
    let r = cli(&["--geo", "national", "hhi", "-i", &fixture("worked_economy.csv")]);
    assert_eq!(r.code, 0, "{}", r.err);
    assert_eq!(value(&r.out), 0.625);
    let r = cli(&["hhi", "--measure", "national", "-i", &fixture("worked_economy.csv")]);
    assert_eq!(value(&r.out), 0.625);
    let r = cli(&["hhi", "-i", &fixture("worked_economy.csv")]);
    assert_eq!(value(&r.out), 0.75);
}

#[test]
fn decompose_closes_identity() {
    let r = cli(&["decompose", "-i", &fixture("worked_economy.csv")]);
    assert_eq!(r.code, 0, "{}", r.err);
    let header: Vec<&str> = r.out.lines().next().unwrap().split(',').collect();
    for row in r.out.lines().skip(1) {
        let f: Vec<&str> = row.split(',').collect();
        let get = |name: &str| f[header.iter().position(|h| *h == name).unwrap()].parse::<f64>().unwrap();
        let c = get("collocation");
        let lhs = c * get("local_conditional") + (1.0 - c) * get("cross_market_conditional");
        assert!((lhs - get("national_hhi")).abs() < 1e-15);
    }
}

#[test]
fn relocation_gap() {
    let r = cli(&["rst", "-i", &fixture("relocation.csv"), "--base", "1", "--target", "2"]);
    assert_eq!(r.code, 0, "{}", r.err);
    let f: Vec<f64> = r.out.lines().nth(1).unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(f[2], 0.0);
    assert!((f[3] + 1.0 / 6.0).abs() < 1e-12);
    assert!((f[4] - 1.0 / 6.0).abs() < 1e-12);
}

#[test]
fn exit_codes_and_error_format() {
    let r = cli(&["hhi", "--no-such-flag"]);
    assert_eq!(r.code, 2);
    let r = cli(&["--geo", "planet", "hhi", "-i", &fixture("worked_economy.csv")]);
    assert_eq!(r.code, 2);
    let r = run_with(&["hhi", "-i", &fixture("worked_economy.csv")], &[("CONCENTRA_SEED", "many")]);
    assert_eq!(r.code, 2);
    assert!(r.err.starts_with("error[config]"), "{}", r.err);

    let r = cli(&["rst", "-i", &fixture("worked_economy.csv"), "--base", "1", "--target", "9"]);
    assert_eq!(r.code, 1);
    assert!(r.err.starts_with("error["), "{}", r.err);

    let r = cli(&["--format", "json", "hhi", "-i", "/does/not/exist.csv"]);
    assert_eq!(r.code, 1);
    let v: serde_json::Value = serde_json::from_str(r.err.trim()).unwrap();
    assert_eq!(v["error"]["kind"], "io");
    assert!(v["error"]["message"].as_str().unwrap().contains("exist.csv"));
}

#[test]
fn settings_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "geo = \"cz\"\n").unwrap();
    let input = fixture("worked_economy.csv");
    let env = [("CONCENTRA_GEO", "national")];

    assert_eq!(value(&run_with(&["hhi", "-i", &input], &env).out), 0.625);
    let cfg_s = cfg.display().to_string();
    assert_eq!(value(&run_with(&["--config", &cfg_s, "hhi", "-i", &input], &env).out), 0.75);
    let via_env = [("CONCENTRA_GEO", "national"), ("CONCENTRA_CONFIG", cfg_s.as_str())];
    assert_eq!(value(&run_with(&["hhi", "-i", &input], &via_env).out), 0.75);
    assert_eq!(
        value(&run_with(&["--config", &cfg_s, "--geo", "national", "hhi", "-i", &input], &env).out),
        0.625
    );
}

#[test]
fn output_file_gets_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("hhi.csv");
    let out_s = out.display().to_string();
    let r = cli(&["--seed", "5", "-o", &out_s, "hhi", "-i", &fixture("worked_economy.csv")]);
    assert_eq!(r.code, 0, "{}", r.err);
    assert!(r.out.is_empty());
    assert_eq!(value(&std::fs::read_to_string(&out).unwrap()), 0.75);
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("hhi.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(m["seed"], 5);
    assert_eq!(m["config_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(m["inputs"][0][1].as_str().unwrap().len(), 64);
    assert!(m["command"].as_array().unwrap().iter().any(|a| a == "hhi"));
    assert!(m["wall_time_seconds"].as_f64().unwrap() >= 0.0);
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("econ.csv").display().to_string();
    let r = cli(&["--seed", "3", "-o", &data, "synth", "generate", "--rows", "20000"]);
    assert_eq!(r.code, 0, "{}", r.err);
    for side in [".meta.json", ".categories.csv", ".manifest.json"] {
        assert!(Path::new(&format!("{data}{side}")).exists(), "{side}");
    }
    let cats = format!("{data}.categories.csv");
    for cmd in [&["hhi"][..], &["decompose"], &["counterfactual", "breakup"], &["topn"]] {
        let mut a = vec!["--categories", &cats, "--threads", "1"];
        a.extend_from_slice(cmd);
        a.extend(["-i", &data]);
        let one = cli(&a);
        a[3] = "4";
        let four = cli(&a);
        assert_eq!(one.code, 0, "{}", one.err);
        assert_eq!(one.out, four.out);
    }
}

#[test]
fn generation_is_reproducible_from_the_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv").display().to_string();
    let b = dir.path().join("b.csv").display().to_string();
    for p in [&a, &b] {
        assert_eq!(cli(&["--seed", "8", "-o", p, "synth", "generate", "--rows", "5000"]).code, 0);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(cli(&["synth", "generate"]).code, 2);
}

#[test]
fn remaining_subcommands_run() {
    let input = fixture("worked_economy.csv");
    let cases: Vec<Vec<&str>> = vec![
        vec!["topn", "-n", "1", "-i", &input],
        vec!["counterfactual", "breakup", "-i", &input],
        vec!["counterfactual", "rank", "-i", &input, "--base", "1", "--target", "1"],
        vec!["bounds", "-i", &input],
        vec!["markups", "imply", "--eps", "3", "--from", "0.05", "--to", "0.07"],
        vec!["markups", "imply", "--eps", "3", "--from", "0.05", "--to", "0.07", "--cournot"],
        vec!["synth", "equilibrium", "--costs", "1,1,2", "--eps", "4"],
        vec!["oracle", "-i", &input, "--samples", "100000"],
        vec!["ingest", "-i", &input],
    ];
    for c in cases {
        let r = cli(&c);
        assert_eq!(r.code, 0, "{c:?}: {}", r.err);
        assert!(!r.out.is_empty(), "{c:?}");
    }
    let r = cli(&["counterfactual", "breakup", "-i", &input]);
    assert_eq!(value(&r.out), 0.375);
    let margins = fixture("margins.csv");
    let r = cli(&["markups", "fit", "-i", &input, "--margins", &margins]);
    assert_eq!(r.code, 0, "{}", r.err);
    let r = cli(&["oracle", "-i", &input, "--samples", "100000"]);
    assert!(r.out.lines().skip(1).all(|l| l.ends_with("true")), "{}", r.out);
}

#[test]
fn binary_reports_version_and_errors() {
    let bin = env!("CARGO_BIN_EXE_concentra");
    let out = Command::new(bin).arg("--version").output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains(env!("CARGO_PKG_VERSION")));
    let out = Command::new(bin).args(["--geo", "national", "hhi", "-i", &fixture("worked_economy.csv")]).output().unwrap();
    assert_eq!(value(&String::from_utf8(out.stdout).unwrap()), 0.625);
    let out = Command::new(bin).args(["hhi", "-i", "/does/not/exist.csv"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = Command::new(bin).arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
