use std::path::Path;
use std::process::Command;

fn reeb(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_reeb")).args(args).env("REEB_THREADS", "2").output().unwrap();
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stdout).into(), String::from_utf8_lossy(&out.stderr).into())
}

fn config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn round_pinching_certifies() {
    let d = tempfile::tempdir().unwrap();
    let c = config(d.path(), "p.json", r#"{"family":"revolution","c":1.0}"#);
    let out = d.path().join("out");
    let (code, _, err) = reeb(&["certify", "--config", &c, "--criterion", "pinching", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("certificate_pinching.json")).unwrap()).unwrap();
    assert_eq!(v["verdict"], "certified");
    assert_eq!(v["config_hash"].as_str().unwrap().len(), 64);
    assert!(v["tool_version"].as_str().unwrap().starts_with("reeb-core"));
}

#[test]
fn ellipsoid_convex_is_not_certified() {
    let d = tempfile::tempdir().unwrap();
    let c = config(d.path(), "e.json", r#"{"family":"ellipsoid","a":[1,2.5]}"#);
    let (code, stdout, _) = reeb(&["certify", "--config", &c, "--criterion", "convex"]);
    assert_eq!(code, 2);
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert!((v["measured"]["product"].as_f64().unwrap() - 0.8 * std::f64::consts::PI).abs() < 1e-6);
}

#[test]
fn malformed_configs_fail_with_one() {
    let d = tempfile::tempdir().unwrap();
    for (i, body) in [r#"{"family":"ellipsoid","a":[1,2.5"#, r#"{"family":"torus"}"#, r#"{"model":{"family":"hopf"},"colour":1}"#]
        .iter()
        .enumerate()
    {
        let c = config(d.path(), &format!("bad{i}.json"), body);
        let (code, _, err) = reeb(&["certify", "--config", &c]);
        assert_eq!(code, 1, "{body}");
        assert!(err.starts_with("error:"));
    }
    let (code, _, _) = reeb(&["certify", "--config", "/nonexistent.json"]);
    assert_eq!(code, 1);
    let (code, _, _) = reeb(&["certify", "--no-such-flag"]);
    assert_eq!(code, 1);
}

#[test]
fn sampling_runs_need_a_seed() {
    let d = tempfile::tempdir().unwrap();
    let c = config(d.path(), "h.json", r#"{"family":"hopf"}"#);
    let (code, _, err) = reeb(&["kappa", "--config", &c]);
    assert_eq!(code, 1);
    assert!(err.contains("seed"));
}

#[test]
fn delta_star_prints_root() {
    let (code, stdout, _) = reeb(&["delta-star"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    let x = v["x"].as_f64().unwrap();
    assert!(x > 0.84 && x < 0.85);
}

#[test]
fn kappa_runs_are_byte_identical() {
    let d = tempfile::tempdir().unwrap();
    let c = config(d.path(), "k.json", r#"{"model":{"family":"ellipsoid","a":[1,1.5]},"t_grid":[10,20,40],"budget":24}"#);
    let (a, b) = (d.path().join("a"), d.path().join("b"));
    let (ca, sa, ea) = reeb(&["kappa", "--config", &c, "--seed", "11", "--out", a.to_str().unwrap()]);
    let (cb, sb, _) = reeb(&["kappa", "--config", &c, "--seed", "11", "--out", b.to_str().unwrap()]);
    assert!(ca == 0 || ca == 3, "{ea}");
    assert_eq!(ca, cb);
    assert_eq!(sa, sb);
    for f in ["kappa.json", "kappa_per_t.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let csv = std::fs::read_to_string(a.join("kappa_per_t.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn round_audit_has_no_violations() {
    let d = tempfile::tempdir().unwrap();
    let c = config(d.path(), "r.json", r#"{"family":"revolution","c":1.0}"#);
    let out = d.path().join("audit");
    let (code, stdout, err) = reeb(&["audit", "--config", &c, "--grid", "8,4", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    for chk in v["audit"]["checks"].as_array().unwrap() {
        assert_ne!(chk["status"], "violated", "{chk}");
    }
    assert!(out.join("returns.csv").exists() && out.join("audit_checks.csv").exists());
}
