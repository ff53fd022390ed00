use std::process::{Command, Output};

use serde_json::Value;

fn wishart(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wishart")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn validate(doc: &Value) {
    let schema: Value = serde_json::from_str(include_str!("../schemas/v1.json")).unwrap();
    let v = jsonschema::validator_for(&schema).expect("schema compiles");
    let errors: Vec<String> = v.iter_errors(doc).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "schema violations: {errors:?}");
}

fn json_of(args: &[&str]) -> Value {
    let o = wishart(args);
    assert!(o.status.success() || o.status.code() == Some(4), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn density_header_is_exact() {
    let o = wishart(&["density", "--n", "8", "--rho", "1", "--grid", "11"]);
    assert!(o.status.success());
    let first = stdout(&o).lines().next().unwrap().trim_end().to_string();
    assert_eq!(first, "x,kernel,limit,mc");
}

fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2).zip(y.windows(2)).map(|(a, b)| 0.5 * (a[1] - a[0]) * (b[0] + b[1])).sum()
}

fn limit_mass(args: &[&str]) -> (Vec<f64>, f64) {
    let o = wishart(args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (_, rows) = csv_rows(&stdout(&o));
    let x: Vec<f64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    let m = trapezoid(&x, &y);
    (x, m)
}

#[test]
fn limit_column_has_unit_mass() {
    let (_, strong) = limit_mass(&["density", "--n", "64", "--rho", "1", "--tau", "0.5"]);
    assert!((strong - 1.0).abs() < 1e-6, "strong mass {strong}");
    let (_, weak) = limit_mass(&["density", "--n", "64", "--rho", "1", "--regime", "weak", "--alpha", "2"]);
    assert!((weak - 1.0).abs() < 1e-6, "weak mass {weak}");
}

#[test]
fn strong_nu_zero_grid_skips_origin() {
    let (x, m) = limit_mass(&["density", "--n", "64", "--nu", "0", "--tau", "0.5"]);
    assert!(x.iter().all(|v| v.abs() >= 1e-6));
    assert!(x.iter().any(|v| *v < 0.0) && x.iter().any(|v| *v > 0.0));
    assert!(x.windows(2).all(|w| w[0] < w[1]));
    // Only the excluded window around the singular point is missing.
    assert!(m < 1.0 && m > 0.998, "mass {m}");
}

#[test]
fn density_kernel_and_mc_columns() {
    let o = wishart(&["density", "--n", "8", "--nu", "1", "--grid", "9", "--trials", "50", "--seed", "3"]);
    let (_, rows) = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 9);
    assert!(rows.iter().all(|r| !r[1].is_empty() && !r[3].is_empty()));
    let o = wishart(&["density", "--n", "42", "--grid", "5"]);
    let (_, rows) = csv_rows(&stdout(&o));
    assert!(rows.iter().all(|r| r[1].is_empty() && r[3].is_empty()));
}

#[test]
fn explicit_uniform_grid() {
    let o = wishart(&["density", "--n", "8", "--rho", "1", "--grid", "0:2:5"]);
    let (_, rows) = csv_rows(&stdout(&o));
    let x: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(x, ["0", "0.5", "1", "1.5", "2"]);
    assert_eq!(wishart(&["density", "--grid", "1:0:3"]).status.code(), Some(2));
}

#[test]
fn expected_number_columns() {
    let o = wishart(&["expected-number", "--n", "16", "--nu", "0", "--tau", "0.5", "--trials", "400", "--seed", "7"]);
    assert!(o.status.success());
    let (header, rows) = csv_rows(&stdout(&o));
    assert_eq!(header, ["n", "nu", "tau", "regime", "kernel", "mc_mean", "mc_stderr", "asymptotic"]);
    assert_eq!(rows.len(), 1);
    let kernel: f64 = rows[0][4].parse().unwrap();
    let mean: f64 = rows[0][5].parse().unwrap();
    let se: f64 = rows[0][6].parse().unwrap();
    assert!((kernel - 5.332717).abs() < 1e-5, "kernel {kernel}");
    assert!((mean - kernel).abs() < 4.0 * se, "mc {mean} +- {se}");
}

#[test]
fn weak_asymptotic_column() {
    let o = wishart(&["expected-number", "--regime", "weak", "--alpha", "1", "--n", "144"]);
    let (_, rows) = csv_rows(&stdout(&o));
    assert_eq!(rows[0][4], "");
    let a: f64 = rows[0][7].parse().unwrap();
    assert!((a / 144.0 - 0.801456073634022).abs() < 1e-12, "{a}");
}

#[test]
fn one_row_per_size() {
    let o = wishart(&["expected-number", "--n", "4", "--also-n", "6,8", "--tau", "0.3"]);
    let (_, rows) = csv_rows(&stdout(&o));
    let ns: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(ns, ["4", "6", "8"]);
}

#[test]
fn exit_codes() {
    assert_eq!(wishart(&["expected-number", "--tau", "1"]).status.code(), Some(2));
    assert_eq!(wishart(&["expected-number", "--n", "7"]).status.code(), Some(2));
    assert_eq!(wishart(&["expected-number", "--nu", "1", "--rho", "1"]).status.code(), Some(2));
    assert_eq!(wishart(&["expected-number", "--regime", "weak", "--tau", "0.5"]).status.code(), Some(2));
    assert_eq!(wishart(&["sample", "--nu", "0.5"]).status.code(), Some(2));
    assert_eq!(wishart(&["verify", "--only", "nope"]).status.code(), Some(2));
    assert_eq!(wishart(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(wishart(&["verify", "--only", "cd"]).status.code(), Some(0));
    assert_eq!(wishart(&["verify", "--only", "pfaffian", "--tol", "0"]).status.code(), Some(4));
}

#[test]
fn verify_filters_and_reports_json() {
    let doc = json_of(&["verify", "--only", "cd,tau0", "--json"]);
    validate(&doc);
    let names: Vec<&str> = doc["checks"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["cd", "tau0"]);
    assert_eq!(doc["passed"], Value::Bool(true));
    assert!(doc["checks"][0]["worst"]["residual"].as_f64().unwrap() < 1e-9);

    let o = wishart(&["verify", "--only", "c-weak", "--only", "omega"]);
    let text = stdout(&o);
    assert!(text.contains("c-weak") && text.contains("omega") && !text.contains("tau0"));
    assert!(text.contains("2/2 checks passed"));
}

#[test]
fn json_outputs_match_schema() {
    validate(&json_of(&["expected-number", "--n", "8", "--trials", "20", "--format", "json"]));
    validate(&json_of(&["expected-number", "--n", "8", "--format", "json"]));
    validate(&json_of(&["density", "--n", "8", "--grid", "7", "--trials", "10", "--format", "json"]));
    validate(&json_of(&["density", "--n", "50", "--regime", "weak", "--grid", "7", "--format", "json"]));
    validate(&json_of(&["sample", "--n", "6", "--nu", "2", "--trials", "3", "--format", "json"]));
}

#[test]
fn sample_row_count_and_pool() {
    let o = wishart(&["sample", "--n", "10", "--nu", "1", "--tau", "0.4", "--trials", "7", "--seed", "5"]);
    let (header, rows) = csv_rows(&stdout(&o));
    assert_eq!(header, ["re", "im", "trial", "real"]);
    assert_eq!(rows.len(), 70);

    let doc = json_of(&["sample", "--n", "10", "--nu", "1", "--tau", "0.4", "--trials", "7", "--seed", "5", "--format", "json"]);
    let reals = rows.iter().filter(|r| r[3] == "1").count();
    assert_eq!(doc["real_pool"].as_array().unwrap().len(), reals);
    assert_eq!(doc["eigenvalues"].as_array().unwrap().len(), 70);
}

#[test]
fn sample_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let args = ["sample", "--n", "12", "--rho", "0.5", "--trials", "20", "--seed", "99", "--out"];
    let run = |p: &std::path::Path| {
        let mut v: Vec<&str> = args.to_vec();
        v.push(p.to_str().unwrap());
        assert!(wishart(&v).status.success());
        std::fs::read(p).unwrap()
    };
    let first = run(&a);
    assert_eq!(first, run(&b));
    let other = wishart(&["sample", "--n", "12", "--rho", "0.5", "--trials", "20", "--seed", "100"]);
    assert_ne!(first, other.stdout);
}

#[test]
fn thread_count_does_not_change_output() {
    let args = ["sample", "--n", "8", "--trials", "30", "--seed", "4"];
    let one = Command::new(env!("CARGO_BIN_EXE_wishart")).args(args).env("WISHART_THREADS", "1").output().unwrap();
    let four = Command::new(env!("CARGO_BIN_EXE_wishart")).args(args).env("WISHART_THREADS", "4").output().unwrap();
    assert!(one.status.success());
    assert_eq!(one.stdout, four.stdout);
    let bad = Command::new(env!("CARGO_BIN_EXE_wishart")).args(args).env("WISHART_THREADS", "zero").output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn near_symmetric_spectrum_is_mostly_real() {
    let o = wishart(&["sample", "--n", "20", "--nu", "2", "--tau", "0.9999", "--trials", "20", "--seed", "1"]);
    let (_, rows) = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 400);
    let zero = rows.iter().filter(|r| r[1].parse::<f64>().unwrap() == 0.0).count();
    assert!(zero as f64 >= 0.95 * rows.len() as f64, "{zero} of {}", rows.len());
}

#[test]
fn schema_rejects_malformed_documents() {
    let schema: Value = serde_json::from_str(include_str!("../schemas/v1.json")).unwrap();
    let v = jsonschema::validator_for(&schema).unwrap();
    let mut doc = json_of(&["verify", "--only", "tau0", "--json"]);
    assert!(v.is_valid(&doc));
    doc["passed"] = Value::String("yes".into());
    assert!(!v.is_valid(&doc));
    assert!(!v.is_valid(&serde_json::json!({"schema": "v2", "command": "verify", "passed": true, "checks": []})));
}
