use std::path::Path;
use std::process::{Command, Output};

fn senselab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_senselab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn gen(dir: &Path, name: &str, extra: &[&str]) -> std::path::PathBuf {
    let out = dir.join(name);
    let mut args = vec!["gen", "--n", "6", "--m", "400", "--r", "2", "--r-star", "2", "--rip-trials", "20"];
    args.extend_from_slice(extra);
    args.extend_from_slice(&["--out", p(&out)]);
    let o = senselab(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

#[test]
fn gen_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = gen(dir.path(), "a.json", &["--sigma", "0.01", "--seed", "4"]);
    let b = gen(dir.path(), "b.json", &["--sigma", "0.01", "--seed", "4"]);
    let c = gen(dir.path(), "c.json", &["--sigma", "0.01", "--seed", "5"]);
    let read = |f: &Path| std::fs::read(f).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
}

#[test]
fn invalid_ranks_exit_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.json");
    let o = senselab(&["gen", "--n", "6", "--m", "40", "--r", "1", "--r-star", "2", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("r-star"));
    assert!(!out.exists());

    let o = senselab(&["solve", "--instance", "missing.json"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn solve_then_certify() {
    let dir = tempfile::tempdir().unwrap();
    let inst = gen(dir.path(), "inst.json", &["--sigma", "1e-3", "--seed", "2"]);
    let trace = dir.path().join("trace.csv");
    let sol = dir.path().join("sol.json");
    let o = senselab(&[
        "solve",
        "--instance",
        p(&inst),
        "--grad-tol",
        "1e-8",
        "--record-every",
        "10",
        "--trace-out",
        p(&trace),
        "--solution-out",
        p(&sol),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&trace).unwrap();
    assert!(csv.starts_with("iter,loss,grad_norm,err_frob\n"));
    let s = json(&sol);
    assert_eq!(s["termination"], "second_order");
    assert_eq!(s["x"].as_array().unwrap().len(), 12);
    assert!(s["err_frob"].as_f64().unwrap() < 0.05);

    let cert = dir.path().join("cert.json");
    let o = senselab(&["certify", "--instance", p(&inst), "--solution", p(&sol), "--out", p(&cert)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let c = json(&cert);
    assert_eq!(c["kind"], "global");
    assert!(c["necessary"]["passed"].as_bool().unwrap());
    assert!(c["sandwich_holds"].as_bool().unwrap());
    for (_, v) in c["residuals"].as_object().unwrap() {
        assert!(v.as_f64().unwrap() <= 1e-8);
    }
    assert!(c["local"].is_object());
}

#[test]
fn certify_at_zero_factor_and_bad_shapes() {
    let dir = tempfile::tempdir().unwrap();
    let inst = gen(dir.path(), "inst.json", &["--sigma", "0.01"]);
    let sol = dir.path().join("zero.json");
    std::fs::write(&sol, r#"{"n": 6, "r": 2, "x": [0,0,0,0,0,0,0,0,0,0,0,0]}"#).unwrap();
    let cert = dir.path().join("cert.json");
    let o = senselab(&["certify", "--instance", p(&inst), "--solution", p(&sol), "--out", p(&cert)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let c = json(&cert);
    assert_eq!(c["construction"], "zero_factor");
    assert_eq!(c["gamma"], 1.0);

    std::fs::write(&sol, r#"{"n": 3, "r": 2, "x": [0,0,0,0,0,0]}"#).unwrap();
    let o = senselab(&["certify", "--instance", p(&inst), "--solution", p(&sol), "--out", p(&cert)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn contour_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    let mut c = senselab_cli::config::ExperimentConfig::default();
    c.grid.x_steps = 5;
    c.grid.p_steps = 4;
    std::fs::write(&cfg, serde_json::to_string(&c).unwrap()).unwrap();
    for (i, threads) in ["1", "3"].iter().enumerate() {
        let out = dir.path().join(format!("run{i}"));
        let o = Command::new(env!("CARGO_BIN_EXE_senselab"))
            .env("SENSELAB_THREADS", threads)
            .args(["contour", "--figure", "global", "--config", p(&cfg), "--out", p(&out)])
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for name in ["global_r10_rs10.csv", "global_r10_rs2.csv"] {
        let a = std::fs::read(dir.path().join("run0").join(name)).unwrap();
        let b = std::fs::read(dir.path().join("run1").join(name)).unwrap();
        assert_eq!(a, b, "{name}");
        assert_eq!(String::from_utf8(a).unwrap().lines().count(), 21);
    }

    std::fs::write(&cfg, "{\"seed\": 1, \"contour\": {}}").unwrap();
    let o = senselab(&["contour", "--figure", "local", "--config", p(&cfg), "--out", p(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_writes_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("verify.json");
    let o = senselab(&[
        "verify", "--trials", "3", "--n", "6", "--m", "800", "--r", "3", "--r-star", "2", "--out", p(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&out);
    assert_eq!(v["trials"], 3);
    assert_eq!(v["passed"], 3);
    assert_eq!(v["rows"].as_array().unwrap().len(), 3);
}

#[test]
fn divergence_exits_with_code_three() {
    let dir = tempfile::tempdir().unwrap();
    let inst = gen(dir.path(), "inst.json", &[]);
    let trace = dir.path().join("trace.csv");
    let o = senselab(&[
        "solve",
        "--instance",
        p(&inst),
        "--algo",
        "gd",
        "--step",
        "50",
        "--trace-out",
        p(&trace),
        "--solution-out",
        p(&dir.path().join("sol.json")),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(std::fs::read_to_string(&trace).unwrap().lines().count() >= 2);
}

#[test]
fn certificate_is_feasible_away_from_critical_points() {
    let dir = tempfile::tempdir().unwrap();
    let inst = gen(dir.path(), "inst.json", &["--sigma", "0.01", "--seed", "8"]);
    let sol = dir.path().join("random.json");
    let x = [0.3, -1.1, 0.7, 0.2, -0.4, 0.9, 1.3, -0.6, 0.05, 0.8, -0.2, 0.4];
    std::fs::write(&sol, serde_json::json!({"n": 6, "r": 2, "x": x}).to_string()).unwrap();
    let cert = dir.path().join("cert.json");
    let o = senselab(&["certify", "--instance", p(&inst), "--solution", p(&sol), "--out", p(&cert)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let c = json(&cert);
    assert!(!c["necessary"]["passed"].as_bool().unwrap());
    for (_, v) in c["residuals"].as_object().unwrap() {
        assert!(v.as_f64().unwrap() <= 1e-8);
    }
}
