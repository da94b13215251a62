use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn majda(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_majda")).args(args).output().expect("run majda")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn out_arg(dir: &Path) -> String {
    dir.to_str().unwrap().to_string()
}

#[test]
fn profile_writes_csv_and_sidecar() {
    let tmp = tempfile::tempdir().unwrap();
    let o = majda(&["profile", "--q", "0.001", "--out", &out_arg(tmp.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(tmp.path().join("profile.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "x,u,z,y,u',z',y'");
    let side = json(&tmp.path().join("profile.json"));
    assert_eq!(side["schema_version"], 1);
    assert!(side["residual_norm"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn beyond_cj_fails_validation_without_files() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("out");
    let o = majda(&["profile", "--q", "0.6", "--out", &out_arg(&dir)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.exists());
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], "validation");
}

#[test]
fn zero_activation_energy_is_routed_to_shooting() {
    let tmp = tempfile::tempdir().unwrap();
    let o = majda(&["profile", "--ea", "0", "--q", "0.2", "--out", &out_arg(tmp.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rep = json(&tmp.path().join("zero_ea.json"));
    assert_eq!(rep["analytic_z"], true);
    assert_eq!(rep["outcome"], "connection");
    assert!(tmp.path().join("zero_ea_profile.csv").exists());
}

#[test]
fn zero_ea_reports_frontier_and_winding() {
    let tmp = tempfile::tempdir().unwrap();
    let o = majda(&["zero-ea", "--q", "0.2", "--out", &out_arg(tmp.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rep = json(&tmp.path().join("zero_ea.json"));
    let q_star = rep["frontier"]["q_star"].as_f64().unwrap();
    assert!((q_star - 0.226125505).abs() <= 1e-5);
    let v = json(&tmp.path().join("verdict.json"));
    assert_eq!(v["winding"], 0);
    assert_eq!(v["R"], 10.0);

    let past = majda(&["zero-ea", "--q", "0.3", "--out", &out_arg(&tmp.path().join("past"))]);
    assert_eq!(past.status.code(), Some(3));
    assert_eq!(json(&tmp.path().join("past/zero_ea.json"))["outcome"], "divergence");
}

#[test]
fn evans_is_deterministic_and_certified() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for d in [&a, &b] {
        let o = majda(&["evans", "--ea", "2", "--q", "0.3", "--out", &out_arg(d)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["verdict.json", "evans_trace.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs between runs");
    }
    let v = json(&a.join("verdict.json"));
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["winding"], 0);
    assert_eq!(v["certified"], true);
    assert_eq!(v["verdict"], "stable");
    assert_eq!(v["R"], 4.0);
    let trace = fs::read_to_string(a.join("evans_trace.csv")).unwrap();
    assert_eq!(trace.lines().next().unwrap(), "re_lambda,im_lambda,re_E,im_E,log_radial");
}

#[test]
fn radius_override_on_subregion() {
    let o = majda(&["wind", "--q", "0.2", "--radius", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["R"], 1.0);
    assert_eq!(v["winding"], 0);
    // a radius below the exclusion radius cannot certify stability
    assert_eq!(v["verdict"], "inconclusive");
}

#[test]
fn slow_reaction_contour_unwraps() {
    let o = majda(&["wind", "--k", "0.125", "--q", "0.45"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["winding"], 0);
    assert_eq!(v["certified"], true);
}

#[test]
fn hfbound_reports_radius() {
    let o = majda(&["hfbound", "--q", "0.2"]);
    assert!(o.status.success());
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["R"], 4.0);
    assert_eq!(v["feasible"], true);

    let o = majda(&["hfbound", "--D", "0.0625", "--q", "0.3"]);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let r = v["R"].as_f64().unwrap();
    assert!((4.5..=5.1).contains(&r), "R = {r}");

    let k = 22f64.exp().to_string();
    let o = majda(&["hfbound", "--ea", "44", "--k", &k, "--q", "0.2"]);
    assert!(o.status.success());
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["a_priori_feasible"], false);
    assert!(v["a_priori"]["R"].as_f64().unwrap() > 1e5);

    let o = majda(&["hfbound", "--ea", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_file_and_flags_compose() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("point.json");
    fs::write(&cfg, r#"{"params": {"q": 0.1, "k": 1, "D": 1, "ea": 4, "u_plus": 0, "u_ig": 0.1}, "nodes": 60}"#).unwrap();
    let o = majda(&["wind", "--config", cfg.to_str().unwrap(), "--q", "0.2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["params"]["q"], 0.2);
    assert_eq!(v["params"]["ea"], 4.0);

    fs::write(&cfg, r#"{"params": {"q": 0.1}}"#).unwrap();
    let o = majda(&["wind", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn one_point_sweep_matches_evans() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("sweep.json");
    fs::write(&cfg, r#"{"ea": [2], "q": [0.3]}"#).unwrap();
    let sw = tmp.path().join("sweep");
    let o = majda(&["sweep", "--config", cfg.to_str().unwrap(), "--out", &out_arg(&sw)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let ev = tmp.path().join("evans");
    assert!(majda(&["evans", "--ea", "2", "--q", "0.3", "--out", &out_arg(&ev)]).status.success());
    let ledger = json(&sw.join("ledger.json"));
    let recs = ledger["records"].as_array().unwrap();
    assert_eq!(recs.len(), 1);
    assert_eq!(recs[0]["status"], "done");
    assert_eq!(recs[0]["verdict"], json(&ev.join("verdict.json")));
}

#[test]
fn sweep_ledger_is_independent_of_threads() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("sweep.json");
    fs::write(
        &cfg,
        r#"{"ea": [1, 2], "D": [1, 0.5], "q": [0.05, 0.2, 0.45, 0.7], "nodes": 60}"#,
    )
    .unwrap();
    let mut ledgers = Vec::new();
    for jobs in ["1", "3"] {
        let dir = tmp.path().join(format!("j{jobs}"));
        let o = majda(&["sweep", "--config", cfg.to_str().unwrap(), "--out", &out_arg(&dir), "--jobs", jobs]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        ledgers.push(fs::read(dir.join("ledger.json")).unwrap());
        let timings = fs::read_to_string(dir.join("timings.csv")).unwrap();
        assert_eq!(timings.lines().count(), 1 + 16);
    }
    assert_eq!(ledgers[0], ledgers[1]);

    let v: Value = serde_json::from_slice(&ledgers[0]).unwrap();
    let s = &v["summary"];
    assert_eq!(s["total"], 16);
    let parts = ["done", "skipped", "failed"].iter().map(|k| s[k].as_u64().unwrap()).sum::<u64>();
    assert_eq!(parts, 16);
    assert_eq!(s["skipped"], 4);
    assert_eq!(s["reasons"]["beyond_cj"], 4);
    let idx: Vec<u64> = v["records"].as_array().unwrap().iter().map(|r| r["index"].as_u64().unwrap()).collect();
    assert_eq!(idx, (0..16).collect::<Vec<_>>());
}

#[test]
fn bad_sweep_config_aborts_before_work() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("sweep.json");
    fs::write(&cfg, r#"{"ea": [], "q": "auto"}"#).unwrap();
    let dir = tmp.path().join("out");
    let o = majda(&["sweep", "--config", cfg.to_str().unwrap(), "--out", &out_arg(&dir)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.exists());
    assert_eq!(majda(&["sweep"]).status.code(), Some(2));
}
