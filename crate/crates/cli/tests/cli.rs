use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nnmatch::io::{write_sample_csv, write_treatment_csv};
use nnmatch::sim::{generate_scenario, generate_treatment_data, Scenario};
use serde_json::Value;
use tempfile::TempDir;

fn nnmatch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nnmatch"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json_of(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("valid JSON")
}

struct Files {
    _dir: TempDir,
    regression: PathBuf,
    targets: PathBuf,
    treatment: PathBuf,
}

fn files() -> Files {
    let dir = TempDir::new().unwrap();
    let write = |name: &str, f: &dyn Fn(File)| {
        let p = dir.path().join(name);
        f(File::create(&p).unwrap());
        p
    };
    let s = generate_scenario(&Scenario::f2_box(), 400, 1).unwrap();
    let t = generate_scenario(&Scenario::f2_box(), 100, 2).unwrap();
    let d = generate_treatment_data(&Scenario::att_const(), 400, 3).unwrap();
    Files {
        regression: write("reg.csv", &|f| write_sample_csv(f, &s, "y").unwrap()),
        targets: write("targets.csv", &|f| write_sample_csv(f, &t, "y").unwrap()),
        treatment: write("trt.csv", &|f| write_treatment_csv(f, &d, "y", "d").unwrap()),
        _dir: dir,
    }
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn psi_records_a_defaulted_k() {
    let f = files();
    let v = json_of(&nnmatch(&[
        "psi", "--data", p(&f.regression), "--support", "0.2:0.8,0.2:0.8", "--mc-points", "500",
        "--seed", "4",
    ]));
    let c = &v["config"];
    assert_eq!(c["subcommand"], "psi");
    assert_eq!(c["L"], 1);
    assert_eq!(c["K"], 17);
    assert_eq!(c["k_defaulted"], true);
    assert_eq!(c["below_theoretical_K"], false);
    assert_eq!(c["mc_points"], 500);
    assert_eq!(c["seed"], 4);
    assert_eq!(c["support"]["lower"][1], 0.2);
    assert!(v["result"]["estimate"].is_f64());
    assert_eq!(v["result"]["notes"].as_array().unwrap().len(), 1);
}

#[test]
fn explicit_small_k_is_flagged() {
    let f = files();
    let v = json_of(&nnmatch(&[
        "phi", "--data", p(&f.regression), "--targets", p(&f.targets), "--L", "1", "--K", "6",
    ]));
    assert_eq!(v["config"]["k_defaulted"], false);
    assert_eq!(v["config"]["below_theoretical_K"], true);
    assert_eq!(v["result"]["m"], 100);
}

#[test]
fn json_numbers_round_trip_exactly() {
    let f = files();
    let args = ["covshift-loss", "--data", p(&f.regression), "--targets", p(&f.targets), "--L", "0", "--K", "2"];
    let v = json_of(&nnmatch(&args));
    let Value::Number(n) = &v["result"]["estimate"] else { panic!("number") };
    let csv = nnmatch(&[&args[..], &["--format", "csv"]].concat());
    let text = String::from_utf8(csv.stdout).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let values: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "result.estimate").unwrap();
    let from_csv: f64 = values[col].parse().unwrap();
    assert_eq!(from_csv.to_bits(), n.as_f64().unwrap().to_bits());
}

#[test]
fn treatment_subcommands() {
    let f = files();
    let v = json_of(&nnmatch(&["att", "--data", p(&f.treatment), "--K", "17"]));
    let r = &v["result"];
    assert_eq!(r["tau_hat"].as_f64().unwrap(), r["tau1_hat"].as_f64().unwrap() - r["tau0_hat"].as_f64().unwrap());
    assert_eq!(v["config"]["treatment_col"], "d");
    let v = json_of(&nnmatch(&[
        "ate-region", "--data", p(&f.treatment), "--support", "0.2:0.8,0.2:0.8", "--L", "0", "--K", "3",
    ]));
    assert!(v["result"]["tau_region"].is_f64());
    assert_eq!(v["config"]["support"]["volume"].as_f64().unwrap(), (0.8f64 - 0.2) * (0.8 - 0.2));
}

#[test]
fn berkson_needs_exactly_one_cutoff_rule() {
    let f = files();
    assert_eq!(nnmatch(&["berkson", "--data", p(&f.regression)]).status.code(), Some(2));
    assert_eq!(
        nnmatch(&["berkson", "--data", p(&f.regression), "--Jn", "1", "--alpha", "2"]).status.code(),
        Some(2)
    );
    let v = json_of(&nnmatch(&[
        "berkson", "--data", p(&f.regression), "--support", "0.2:0.8,0.2:0.8", "--alpha", "1.5",
        "--gamma", "1.5", "--error-density", "laplace:0.1", "--mc-points", "300",
    ]));
    let c = &v["config"];
    // 400^(1/8) = 2.11, alpha = 1.5 -> L = 1
    assert_eq!(c["Jn"], 2);
    assert_eq!(c["Jn_from_alpha"], true);
    assert_eq!(c["L"], 1);
    assert_eq!(v["result"]["coefficients"].as_array().unwrap().len(), 25);
}

#[test]
fn exit_codes() {
    let f = files();
    // missing response column
    let out = nnmatch(&["psi", "--data", p(&f.regression), "--support", "0:1,0:1", "--response-col", "u"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("'u'"));
    // reversed support
    let out = nnmatch(&["psi", "--data", p(&f.regression), "--support", "1:0,0:1"]);
    assert_eq!(out.status.code(), Some(2));
    // K larger than the sample
    let out = nnmatch(&["psi", "--data", p(&f.regression), "--support", "0:1,0:1", "--K", "401"]);
    assert_eq!(out.status.code(), Some(2));
    // error density with a vanishing coefficient
    let out = nnmatch(&[
        "berkson", "--data", p(&f.regression), "--Jn", "3", "--error-density", "laplace:1e6",
        "--mc-points", "50",
    ]);
    assert_eq!(out.status.code(), Some(3));
    // quadrature that cannot meet its tolerance
    let out = nnmatch(&["simulate", "--scenario", "f2_box", "--n", "50", "--N", "2", "--oracle-tol", "0"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn simulate_writes_tables_and_errors() {
    let dir = TempDir::new().unwrap();
    let errors = dir.path().join("errors.csv");
    let out = nnmatch(&[
        "simulate", "--scenario", "f2_box", "--n", "60,120", "--N", "5", "--fit", "0:1,1:6",
        "--mc-points", "200", "--errors-out", p(&errors), "--format", "wide",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("| n=120, L=1 | K=6 |"));
    assert_eq!(text.matches("sqrt(n)·RMSE").count(), 4);
    let lines = std::fs::read_to_string(&errors).unwrap();
    // header plus 2 sizes x 2 cells x 5 replicates
    assert_eq!(lines.lines().count(), 1 + 20);

    let v = json_of(&nnmatch(&["simulate", "--scenario", "f2_box", "--n", "60", "--N", "4", "--mc-points", "200"]));
    assert_eq!(v["result"]["rows"].as_array().unwrap().len(), 2);
    assert!(v["result"]["oracle"]["change"].as_f64().unwrap() < 1e-9);
}
