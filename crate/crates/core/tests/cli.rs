use std::process::{Command, Output};

use serde_json::Value;

const BALL: &str = r#"{"type":"ball","center":[0.0,0.0,0.0],"radius":1.0,"amplitude":-1.0}"#;

fn bridgepot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bridgepot"))
        .args(args)
        .output()
        .expect("spawn bridgepot")
}

fn json(out: &Output) -> Value {
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn f_kernel_half_integer_closed_form() {
    let f = json(&bridgepot(&["kernel", "f", "--a", "1", "--b", "1", "--beta", "1.5", "--c", "1"]));
    assert_eq!(f["status"], "converged");
    // β = 3/2: f = √(π/c)/a
    let v = f["value"].as_f64().unwrap();
    assert!((v - std::f64::consts::PI.sqrt()).abs() < 1e-8);
}

#[test]
fn k0_with_zero_y() {
    let v = json(&bridgepot(&["kernel", "k0", "--d", "4", "--x", "2,0,0,0", "--y", "0,0,0,0"]));
    assert_eq!(v["value"], 0.25);
}

#[test]
fn printed_values_round_trip() {
    let out = bridgepot(&["kernel", "g", "--t", "0.3", "--x", "0.1,-0.7,2", "--y", "1e-3,0,0.5"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let v: Value = serde_json::from_str(&text).unwrap();
    let g = v["value"].as_f64().unwrap();
    let d = bridgepot::kernels::Dimension::new(3).unwrap();
    let want = bridgepot::kernels::heat_kernel(0.3, &[0.1, -0.7, 2.0], &[1e-3, 0.0, 0.5], d).unwrap();
    assert_eq!(g.to_bits(), want.to_bits());
}

#[test]
fn transform_from_file_and_csv() {
    let dir = std::env::temp_dir().join(format!("bridgepot-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("ball.json");
    std::fs::write(&path, BALL).unwrap();
    let out = bridgepot(&[
        "transform", "newton", "--potential", path.to_str().unwrap(),
        "--x", "0,0,0", "--x", "3,0,0", "--format", "csv",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x1,x2,x3,value,error,status");
    let centre: f64 = lines[1].split(',').nth(3).unwrap().parse().unwrap();
    let outside: f64 = lines[2].split(',').nth(3).unwrap().parse().unwrap();
    assert!((centre - 0.5).abs() < 1e-8);
    assert!((outside - 1.0 / 9.0).abs() < 1e-8);
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn exit_codes() {
    assert_eq!(bridgepot(&["bogus"]).status.code(), Some(2));
    assert_eq!(bridgepot(&["kernel", "k0", "--x", "1,0,0"]).status.code(), Some(2));
    let malformed = bridgepot(&["transform", "k", "--potential", "{\"type\":", "--x", "1,0,0"]);
    assert_eq!(malformed.status.code(), Some(2));
    assert!(malformed.stdout.is_empty());
    let missing = bridgepot(&["transform", "k", "--potential", "/nonexistent/v.json", "--x", "1,0,0"]);
    assert_eq!(missing.status.code(), Some(2));
    let low = bridgepot(&["kernel", "k0", "--x", "1,0", "--y", "0,0"]);
    assert_eq!(low.status.code(), Some(1));
    assert!(low.stdout.is_empty());
    assert!(String::from_utf8_lossy(&low.stderr).contains("d = 2"));
    let unbounded = bridgepot(&[
        "simulate", "ratio", "--potential",
        r#"{"type":"radial_power","exponent":-1,"inner_radius":0,"outer_radius":1,"amplitude":1}"#,
        "--t", "1", "--x", "0,0,0", "--y", "1,0,0",
    ]);
    assert_eq!(unbounded.status.code(), Some(1));
    assert!(unbounded.stdout.is_empty());
}

#[test]
fn norm_reports_search_details() {
    let v = json(&bridgepot(&["norm", "newton", "--potential", BALL, "--grid-density", "5"]));
    assert!((v["value"].as_f64().unwrap() - 0.5).abs() < 1e-8);
    assert!(v["evaluations"].as_u64().unwrap() >= 5);
    let ldh = json(&bridgepot(&["norm", "ldh", "--potential", BALL]));
    // ‖1_B‖_{3/2} = |B|^{2/3}
    let want = (4.0 * std::f64::consts::PI / 3.0f64).powf(2.0 / 3.0);
    assert!((ldh["value"].as_f64().unwrap() - want).abs() < 1e-8);
    let inf = json(&bridgepot(&["norm", "ldh", "--d", "4", "--potential", r#"{"type":"counterexample_a"}"#]));
    assert_eq!(inf["value"], "inf");
    assert_eq!(inf["status"], "diverged");
}

#[test]
fn simulate_constant_potential() {
    let v = json(&bridgepot(&[
        "simulate", "ratio", "--potential", r#"{"type":"constant","value":-2}"#,
        "--t", "0.5", "--x", "0,0,0", "--y", "0,1,0", "--paths", "10", "--threads", "1",
    ]));
    assert_eq!(v["value"].as_f64().unwrap(), (-1.0f64).exp());
    assert_eq!(v["paths"], 10);
}

#[test]
fn verify_report_schema() {
    let out = bridgepot(&["verify", "newton_ball", "--quick"]);
    let r = json(&out);
    for key in ["suite", "passed", "findings", "runtime_ms", "seed"] {
        assert!(r.get(key).is_some(), "missing {key}");
    }
    assert_eq!(r["runtime_ms"], Value::Null);
    let f = &r["findings"][0];
    for key in ["name", "value", "bound", "passed"] {
        assert!(f.get(key).is_some(), "missing finding.{key}");
    }
    let csv = bridgepot(&["verify", "closed_forms", "--quick", "--format", "csv"]);
    assert_eq!(csv.status.code(), Some(0));
    assert!(String::from_utf8(csv.stdout).unwrap().starts_with("suite,name,value,bound,passed\n"));
}

#[test]
fn counterexample_command_reports_divergence() {
    let r = json(&bridgepot(&["counterexample", "--quick"]));
    assert_eq!(r["suite"], "counterexample");
    assert_eq!(r["passed"], true);
    assert_eq!(r["diagnoses"][0]["verdict"], "divergent");
}
