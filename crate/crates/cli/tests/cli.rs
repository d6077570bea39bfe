use std::path::PathBuf;
use std::process::{Command, Output};

fn example() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/example.cfg")
}

fn hamcert(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hamcert"))
        .args(args)
        .output()
        .expect("spawn hamcert")
}

fn with_example(sub: &str, rest: &[&str]) -> Output {
    let cfg = example();
    let mut args = vec![sub, cfg.to_str().unwrap()];
    args.extend_from_slice(rest);
    hamcert(&args)
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn certify_example_exits_zero() {
    let out = with_example("certify", &["--mode", "Sstar", "--rho1", "1e-3", "--rho2", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["verdict"], "certified");
    assert_eq!(v["report"], "certificate");
    assert_eq!(v["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn missing_config_exits_one() {
    let out = hamcert(&["certify", "/nonexistent/x.cfg", "--mode", "S", "--rho1", "1e-3", "--rho2", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn bad_arguments_exit_one_and_help_exits_zero() {
    assert_eq!(hamcert(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(hamcert(&["--help"]).status.code(), Some(0));
    let out = with_example("sweep", &["--axis", "lambda1:0:1:0", "--rho1", "1e-3", "--rho2", "1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn negative_lambda_is_a_model_error() {
    let out = with_example(
        "certify",
        &["--mode", "S", "--rho1", "1e-3", "--rho2", "1", "--param", "lambda1=-1"],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("lambda1"));
}

#[test]
fn constants_report_has_values_and_flags() {
    let out = with_example("constants", &[]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let c = &v["components"];
    let m0 = c[0]["recip_m0"]["computed"].as_f64().unwrap();
    let big_m = c[0]["recip_M"]["computed"].as_f64().unwrap();
    assert!((m0 - 0.375).abs() <= 1e-12, "{m0}");
    assert!((big_m - 0.140625).abs() <= 1e-12, "{big_m}");
    assert!(!v["discrepancies"].as_array().unwrap().is_empty());
}

#[test]
fn output_is_byte_identical_across_runs() {
    let args = ["--mode", "Sstar", "--rho1", "1e-3", "--rho2", "1"];
    let a = with_example("certify", &args);
    let b = with_example("certify", &args);
    assert_eq!(a.stdout, b.stdout);
    let a = with_example("constants", &[]);
    let b = with_example("constants", &[]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn nonexistence_at_published_parameters_is_not_certified() {
    let params = ["lambda1=31", "lambda2=1", "eta11=1", "eta21=1"];
    let mut args = vec!["--rho", "1", "--setI", "2", "--setJ", "1"];
    for p in &params {
        args.extend_from_slice(&["--param", p]);
    }
    let out = with_example("certify-nonexistence", &args);
    assert_eq!(out.status.code(), Some(10));
    let v = json(&out);
    assert_eq!(v["verdict"], "not-certified");
    let notes = v["notes"].as_array().unwrap();
    assert!(notes.iter().any(|n| n.as_str().unwrap().contains("discrepancy")));

    let last = args.len() - 1;
    args[last] = "eta21=0.1";
    args.extend_from_slice(&["--param", "lambda2=0.1"]);
    let out = with_example("certify-nonexistence", &args);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn solve_writes_the_state_next_to_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("sol.json");
    let out = with_example(
        "solve",
        &["--rho1", "1e-3", "--rho2", "1", "--out", report.to_str().unwrap()],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["converged"], true);
    assert_eq!(v["localization"]["inside"], true);
    let csv = std::fs::read_to_string(dir.path().join("sol.csv")).unwrap();
    assert!(csv.starts_with("t,u1,du1,u2,du2"));
}

#[test]
fn sweep_prints_a_csv_grid() {
    let out = with_example(
        "sweep",
        &["--axis", "lambda1:0:1:3", "--axis", "eta21:0:1:2", "--rho1", "1e-3", "--rho2", "1"],
    );
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "lambda1,eta21,verdict,binding,margin");
    assert_eq!(lines.len(), 7);
}

#[test]
fn falsify_reports_ranges() {
    let out = with_example("falsify", &["--rho", "1", "--samples", "200"]);
    let code = out.status.code();
    assert!(code == Some(0) || code == Some(10));
    let v = json(&out);
    assert!(v["ranges"].is_object());
    assert_eq!(v["falsify"]["report"], "falsify");
}
