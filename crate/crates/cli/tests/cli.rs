use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn gpseg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gpseg")).args(args).output().expect("gpseg runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn config(dir: &Path, text: &str) -> String {
    let p = dir.join("config.json");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn invalid_configs_exit_2_and_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    for (text, field) in [(r#"{"gamma": 1.5}"#, "gamma"), (r#"{"kapa": 0.1}"#, "kapa"), (r#"{"g_list": []}"#, "g_list")] {
        let cfg = config(dir.path(), text);
        let o = gpseg(&["profile", "--config", &cfg, "--out", dir.path().join("out").to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{text}: {}", stderr(&o));
        assert!(stderr(&o).contains(&format!("`{field}`")), "{text}: {}", stderr(&o));
    }
    let o = gpseg(&["profile", "--config", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn a_short_profile_window_is_a_gate_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), r#"{"kappa": 0.5}"#);
    let out = dir.path().join("out");
    let o = gpseg(&["construct", "--config", &cfg, "--g", "1e8", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("construct g_1e8") && stderr(&o).contains("profile window"), "{}", stderr(&o));
    // the manifest still records where the run stopped
    let m = json(&out.join("construct-manifest.json"));
    let last = m["stages"].as_array().unwrap().last().unwrap().clone();
    assert_eq!(last["pass"], Value::Bool(false));
}

#[test]
fn profile_is_cached_and_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let run = || {
        let o = gpseg(&["profile", "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        (fs::read(out.join("profile/profile.csv")).unwrap(), json(&out.join("profile-manifest.json")))
    };
    let (first, m1) = run();
    let (second, m2) = run();
    assert_eq!(m1["profile_cache"], "miss");
    assert_eq!(m2["profile_cache"], "hit");
    assert!(first == second, "profile.csv changed between a solved and a cached run");
    let header = String::from_utf8_lossy(&first[..40]).into_owned();
    assert!(header.starts_with("t,u,v,du,dv\n"));
}

#[test]
fn outputs_do_not_depend_on_the_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), r#"{"g_list": [1e4, 1e5, 1e6]}"#);
    let outs: Vec<_> = ["1", "3"]
        .iter()
        .map(|t| {
            let out = dir.path().join(format!("out{t}"));
            let o = gpseg(&["solve", "--config", &cfg, "--threads", t, "--out", out.to_str().unwrap()]);
            assert!(o.status.success(), "{}", stderr(&o));
            out
        })
        .collect();
    let m = json(&outs[0].join("solve-manifest.json"));
    let files = m["files"].as_array().unwrap();
    assert_eq!(files.len(), 4, "three solutions and a report");
    for f in files {
        let rel = f["path"].as_str().unwrap();
        let a = fs::read(outs[0].join(rel)).unwrap();
        assert!(a == fs::read(outs[1].join(rel)).unwrap(), "{rel} differs between thread counts");
        assert_eq!(f["bytes"].as_u64(), Some(a.len() as u64));
    }
    assert_eq!(m["threads"], 1);
}

/// Numbers agree to a relative 1e-6 (absolute below 1e-9), everything else exactly.
fn close(a: &Value, b: &Value, path: &str, bad: &mut Vec<String>) {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => {
            let (x, y) = (x.as_f64().unwrap(), y.as_f64().unwrap());
            if (x - y).abs() > 1e-6 * x.abs().max(y.abs()).max(1e-3) {
                bad.push(format!("{path}: {x} vs {y}"));
            }
        }
        (Value::Object(x), Value::Object(y)) => {
            if x.keys().ne(y.keys()) {
                bad.push(format!("{path}: keys differ"));
                return;
            }
            for (k, v) in x {
                close(v, &y[k], &format!("{path}.{k}"), bad);
            }
        }
        (Value::Array(x), Value::Array(y)) => {
            if x.len() != y.len() {
                bad.push(format!("{path}: lengths {} vs {}", x.len(), y.len()));
                return;
            }
            for (i, (p, q)) in x.iter().zip(y).enumerate() {
                close(p, q, &format!("{path}[{i}]"), bad);
            }
        }
        _ if a == b => {}
        _ => bad.push(format!("{path}: {a} vs {b}")),
    }
}

#[test]
fn verify_matches_the_golden_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = gpseg(&["verify", "--strict", "--out", out.to_str().unwrap()]);
    let report = json(&out.join("verify-report.json"));
    let stdout = String::from_utf8_lossy(&o.stdout).into_owned();
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS") || l.starts_with("FAIL")).count(), 12, "{stdout}");
    // --strict turns failed criteria into exit 1
    let pass = report["pass"].as_bool().unwrap();
    assert_eq!(o.status.code(), Some(if pass { 0 } else { 1 }), "{}", stderr(&o));

    let golden: Value = serde_json::from_str(include_str!("../../../docs/golden/verify-report.json")).unwrap();
    let mut bad = Vec::new();
    close(&report, &golden, "", &mut bad);
    assert!(bad.is_empty(), "{} mismatches:\n{}", bad.len(), bad[..bad.len().min(20)].join("\n"));
}
