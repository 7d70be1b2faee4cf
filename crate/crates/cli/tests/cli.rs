use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bell(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bell")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&out.stdout))
    })
}

fn write_chsh(dir: &Path) -> String {
    let mut coeffs = vec![vec![vec![vec![0.0; 2]; 2]; 2]; 2];
    for x in 0..2 {
        for y in 0..2 {
            for a in 0..2 {
                for b in 0..2 {
                    if (a ^ b) == (x & y) {
                        coeffs[x][y][a][b] = 0.25;
                    }
                }
            }
        }
    }
    let path = dir.join("chsh.json");
    let doc = serde_json::json!({ "N": 2, "K": 2, "coeffs": coeffs, "is_game": true });
    std::fs::write(&path, doc.to_string()).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn classical_exact_and_heuristic() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_chsh(dir.path());
    let out = bell(&["classical", "--functional", &f]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["value"], 0.75);
    let out = bell(&["classical", "--functional", &f, "--heuristic", "--restarts", "4", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["value"], 0.75);
}

#[test]
fn local_weight_of_uniform_box_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.json");
    let probs = vec![vec![vec![vec![0.25; 2]; 2]; 2]; 2];
    std::fs::write(&path, serde_json::json!({ "N": 2, "K": 2, "probs": probs }).to_string()).unwrap();
    let out = bell(&["local-weight", "--box", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!((json(&out)["value"].as_f64().unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn quantum_reaches_tsirelson() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_chsh(dir.path());
    let out = bell(&["quantum", "--functional", &f, "--dim", "2", "--restarts", "20", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!(v["value"].as_f64().unwrap() >= 0.8535);
    assert!(v["psd_residual"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn kv_emits_functional_and_values_agree() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("kv.json");
    let out = bell(&["kv", "--l", "2", "--eta", "0.25", "--closed-form", "--direct", "--emit-functional", f.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!((v["closed_form"].as_f64().unwrap() - 0.4375).abs() < 1e-12);
    assert!((v["direct"].as_f64().unwrap() - 0.4375).abs() < 1e-12);
    let c = bell(&["classical", "--functional", f.to_str().unwrap()]);
    let omega = json(&c)["value"].as_f64().unwrap();
    assert!(omega <= v["classical_upper_bound"].as_f64().unwrap());
}

#[test]
fn relax_reports_ratio_and_envelope() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_chsh(dir.path());
    let out = bell(&["relax", "--functional", &f, "--dim", "2", "--mode", "opbar", "--restarts", "2", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert!(v["feasibility"]["feasible"].as_bool().unwrap());
    assert!(v["value"].as_f64().unwrap() >= 0.75 - 1e-12);
    assert!(v["ratio_to_omega"].as_f64().unwrap() >= 1.0 - 1e-12);
    assert!((v["envelope"].as_f64().unwrap() - 2.0 / 2f64.ln().sqrt()).abs() < 1e-12);
}

#[test]
fn relax_from_quantum_strategy_file() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_chsh(dir.path());
    let q = bell(&["quantum", "--functional", &f, "--dim", "2", "--restarts", "20", "--seed", "7"]);
    let s = dir.path().join("s.json");
    std::fs::write(&s, json(&q)["strategy"].to_string()).unwrap();
    let out = bell(&["relax", "--functional", &f, "--dim", "4", "--init", "quantum", s.to_str().unwrap(), "--restarts", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(json(&out)["value"].as_f64().unwrap() >= 0.8535);
}

#[test]
fn bounds_and_norms() {
    let v = json(&bell(&["bounds", "--dim", "16"]));
    assert_eq!(v["upper_projective"], 16.0);
    assert!((v["lower_sharp_raw"].as_f64().unwrap() - 16.0 / 16f64.ln().powi(2)).abs() < 1e-9);
    let v = json(&bell(&["norms", "pi-pure", "--dim", "9"]));
    assert!((v["result"]["value"].as_f64().unwrap() - 9.0).abs() < 1e-12);
    let v = json(&bell(&["norms", "two-summing", "--lambdas", "3,-4"]));
    assert_eq!(v["result"]["value"], 5.0);
    let v = json(&bell(&["norms", "concentration", "--n", "64", "--samples", "10000"]));
    let r = v["result"]["ratio"].as_f64().unwrap();
    assert!((0.4..=1.2).contains(&r));
    let dir = tempfile::tempdir().unwrap();
    let cols = dir.path().join("cols.json");
    std::fs::write(&cols, "[[1,0],[0,1]]").unwrap();
    let v = json(&bell(&["norms", "opnorm", "--columns", cols.to_str().unwrap()]));
    assert!((v["result"]["value"].as_f64().unwrap() - 2f64.sqrt()).abs() < 1e-12);
}

#[test]
fn verify_small_is_deterministic_and_passes() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
    for p in [&a, &b] {
        let out = bell(&["verify", "--scale", "small", "--seed", "5", "--out", p.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    }
    let (ta, tb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(ta, tb);
    let last: Value = serde_json::from_str(String::from_utf8(ta).unwrap().lines().last().unwrap()).unwrap();
    assert_eq!(last["summary"]["fail"], 0);
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(bell(&["classical"]).status.code(), Some(2));
    assert_eq!(bell(&["classical", "--functional", "/nonexistent.json"]).status.code(), Some(2));
    assert_eq!(bell(&["verify", "--scale", "huge"]).status.code(), Some(2));
    assert_eq!(bell(&["kv", "--l", "9"]).status.code(), Some(2));
    assert_eq!(bell(&["bounds"]).status.code(), Some(2));
    assert_eq!(bell(&["relax", "--functional", "x", "--dim", "2", "--init", "bogus"]).status.code(), Some(2));
}

#[test]
fn malformed_functional_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    std::fs::write(&p, r#"{"N":2,"K":2,"coeffs":[[[[1]]]],"is_game":false}"#).unwrap();
    let out = bell(&["classical", "--functional", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}
