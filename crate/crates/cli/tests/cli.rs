use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nalgebra::DVector;
use outabs::model::{self, mtx, ProblemSystem};
use outabs::reach::{simulate, InputSignal};
use serde_json::Value;

fn outabs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_outabs")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn motor() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/motor/motor.json")
}

const SCALAR: &str = r#"{
  "format_version": 1,
  "name": "scalar",
  "type": "lti",
  "matrices": { "A": [[-1.0]], "B": [[2.0]], "C": [[3.0]] },
  "x0": { "lb": [-1.0], "ub": [1.0] },
  "input": { "lb": [-1.0], "ub": [1.0] },
  "spec": { "kind": "polytope", "polarity": "safe", "gamma": [[1.0], [-1.0]], "psi": [-20.0, -20.0] },
  "t_f": 2.0
}"#;

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn reduce_reports_scalar_hankel_value() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "s.json", SCALAR);
    let o = outabs(&["reduce", "-i", input.to_str().unwrap(), "--k", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let sigma = v["modes"][0]["sigma"][0].as_f64().unwrap();
    assert!((sigma - 3.0).abs() < 1e-12);
    assert_eq!(v["format_version"], 1);
    assert_eq!(v["manifest"]["type"], "lti");
}

#[test]
fn full_order_reduction_reproduces_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("g.json");
    assert!(outabs(&["gen", "--n", "4", "--m", "2", "--p", "1", "--seed", "3", "-o", input.to_str().unwrap()])
        .status
        .success());
    let red = dir.path().join("r.json");
    let o = outabs(&["reduce", "-i", input.to_str().unwrap(), "--k", "4", "-o", red.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("r.sigma.json").exists());

    let full = model::parse_problem(&input).unwrap();
    let reduced = model::parse_problem(&red).unwrap();
    let map = mtx::read_matrix_market(&dir.path().join("r.map.mtx")).unwrap();
    let (ProblemSystem::Lti { system: f, x0 }, ProblemSystem::Lti { system: r, .. }) =
        (full.system(), reduced.system())
    else {
        panic!("expected LTI problems");
    };
    let x = x0.ub().clone();
    let u = InputSignal::piecewise(
        vec![0.0, 1.0],
        vec![DVector::from_vec(vec![0.5, -0.2]), DVector::from_vec(vec![-0.3, 0.4])],
    )
    .unwrap();
    let a = simulate(f, &x, &u, 3.0, 0.01).unwrap();
    let b = simulate(r, &(&map * &x), &u, 3.0, 0.01).unwrap();
    for (ya, yb) in a.outputs.iter().zip(&b.outputs) {
        assert!((ya - yb).amax() < 1e-8, "{ya} vs {yb}");
    }
}

#[test]
fn missing_matrix_is_a_runtime_error_naming_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let text = SCALAR.replace(r#""A": [[-1.0]]"#, r#""A": "nowhere.A.mtx""#);
    let input = write(dir.path(), "s.json", &text);
    let o = outabs(&["reduce", "-i", input.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nowhere.A.mtx"));
}

#[test]
fn usage_errors_exit_with_four() {
    assert_eq!(outabs(&["reduce", "--bogus"]).status.code(), Some(4));
    assert_eq!(outabs(&["gen", "--n", "3", "--m", "1", "--p", "3"]).status.code(), Some(3));
    assert_eq!(outabs(&["--help"]).status.code(), Some(0));
}

#[test]
fn bench_is_reproducible_without_timing() {
    let a = outabs(&["bench", "--no-timing"]);
    let b = outabs(&["bench", "--no-timing"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let v: Value = serde_json::from_str(&stdout(&a)).unwrap();
    let rows = v["rows"].as_array().unwrap();
    for k in [4, 5] {
        assert!(rows.iter().any(|r| r["benchmark"] == "motor" && r["k"] == k && r["method"] == "best"));
    }
    assert!(rows.iter().all(|r| r.get("time_ms").is_none()));
}

#[test]
fn gen_is_deterministic() {
    let a = outabs(&["gen", "--n", "5", "--m", "1", "--p", "2", "--seed", "8"]);
    let b = outabs(&["gen", "--n", "5", "--m", "1", "--p", "2", "--seed", "8"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let c = outabs(&["gen", "--n", "5", "--m", "1", "--p", "2", "--seed", "9"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn verify_exit_codes_follow_the_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let safe = write(dir.path(), "safe.json", SCALAR);
    let o = outabs(&["verify", "-i", safe.to_str().unwrap(), "--k0", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["outcome"], "safe");

    // y(0) = 3x0 reaches ±3, beyond the ±2 box
    let bad = write(dir.path(), "bad.json", &SCALAR.replace("[-20.0, -20.0]", "[-2.0, -2.0]"));
    let o = outabs(&["verify", "-i", bad.to_str().unwrap(), "--k0", "1"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn motor_verifies_safe() {
    let o = outabs(&["verify-pss", "-i", motor().to_str().unwrap(), "--k0", "5", "--k-max", "5", "--format", "text"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("safe"));
}

#[test]
fn transform_spec_subtracts_the_margin() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(
        dir.path(),
        "spec.json",
        r#"{ "kind": "polytope", "polarity": "safe", "gamma": [[1.0], [-1.0]], "psi": [-0.0015, -0.0015] }"#,
    );
    let o = outabs(&["transform-spec", "--spec", spec.to_str().unwrap(), "--delta", "3.7219e-4"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("-0.00112781"), "{text}");
}
