use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stochcouple")).args(args).output().unwrap()
}

fn ok(args: &[&str]) {
    let out = cli(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn identical_seeds_give_identical_hashes() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        ok(&["run", "--example", "lshape-desk", "--rank-max", "2", "--trace", "--out-dir", dir.to_str().unwrap()]);
    }
    let (ma, mb) = (json(&a.join("manifest.json")), json(&b.join("manifest.json")));
    assert_eq!(ma["files"], mb["files"]);
    for name in ["solution.json", "trace.csv", "moments.csv", "pcpg_trace.csv"] {
        assert!(ma["files"][name]["sha256"].is_string(), "{name}");
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap());
    }
    assert_eq!(ma["seeds"]["solver"], 0);
    assert_eq!(ma["command"], "run");
    let c = tmp.path().join("c");
    ok(&["run", "--example", "lshape-desk", "--rank-max", "2", "--seed", "7", "--out-dir", c.to_str().unwrap()]);
    assert_ne!(json(&c.join("manifest.json"))["files"]["solution.json"], ma["files"]["solution.json"]);
}

#[test]
fn replay_reproduces_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&["reference", "--example", "beam-desk", "--method", "mc", "-N", "200", "--out-dir", a.to_str().unwrap()]);
    let man = a.join("manifest.json");
    ok(&["replay", "--manifest", man.to_str().unwrap(), "--out-dir", b.to_str().unwrap()]);
    assert_eq!(json(&man)["files"], json(&b.join("manifest.json"))["files"]);
    assert_eq!(std::fs::read(a.join("reference.json")).unwrap(), std::fs::read(b.join("reference.json")).unwrap());
}

#[test]
fn unknown_config_key_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = stochcouple::config::Config::profile("lshape-desk").unwrap();
    let mut v: Value = serde_json::from_str(&cfg.to_json()).unwrap();
    v["mesh"]["hh"] = Value::from(0.1);
    let path = tmp.path().join("bad.json");
    std::fs::write(&path, v.to_string()).unwrap();
    let out = cli(&["run", "--config", path.to_str().unwrap(), "--out-dir", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("hh"), "{}", stderr(&out));
    let out = cli(&["run", "--example", "nonsense", "--out-dir", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_input_file_is_an_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.json");
    let out = cli(&["run", "--config", missing.to_str().unwrap(), "--out-dir", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let out = cli(&[
        "compare",
        "--solution",
        missing.to_str().unwrap(),
        "--reference",
        missing.to_str().unwrap(),
        "--out-dir",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn oversized_galerkin_reference_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let out = cli(&["reference", "--example", "beam-desk", "--method", "sg", "-p", "12", "--out-dir", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("M·P"), "{}", stderr(&out));
}

#[test]
fn deterministic_reference_has_zero_spread() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&["reference", "--example", "lshape-desk", "--sigma", "0", "--method", "mc", "-N", "20", "--out-dir", tmp.path().to_str().unwrap()]);
    let v = json(&tmp.path().join("reference.json"));
    assert!(v["moments"]["std"].as_array().unwrap().iter().all(|s| s.as_f64().unwrap() == 0.0));
    assert_eq!(v["config"]["field"]["sigma1"], 0.0);
}

#[test]
fn run_reference_compare_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let (run, sg, cmp) = (tmp.path().join("run"), tmp.path().join("sg"), tmp.path().join("cmp"));
    ok(&["run", "--example", "lshape-desk", "--rank-max", "4", "--out-dir", run.to_str().unwrap()]);
    ok(&["reference", "--example", "lshape-desk", "--method", "sg", "--probe-samples", "2000", "--out-dir", sg.to_str().unwrap()]);
    ok(&[
        "compare",
        "--solution",
        run.join("solution.json").to_str().unwrap(),
        "--reference",
        sg.join("reference.json").to_str().unwrap(),
        "--samples",
        "2000",
        "--out-dir",
        cmp.to_str().unwrap(),
    ]);
    let m = json(&cmp.join("metrics.json"));
    assert!(m["raw"]["eps_mean"].as_f64().unwrap() < 0.01);
    assert!(m["pdf_l1_gap"].as_f64().unwrap() < 1.0);
    assert!(std::fs::read_to_string(cmp.join("pdf_solution.csv")).unwrap().starts_with("x,density"));
    let trace = std::fs::read_to_string(run.join("trace.csv")).unwrap();
    assert!(trace.starts_with("sweep,r,pi,eps_res,pcpg_iters\n"));
    let man = json(&run.join("manifest.json"));
    assert_eq!(man["converged"], false);
}

#[test]
fn mesh_export_writes_both_subdomains() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&["mesh-export", "--example", "beam-desk", "--out-dir", tmp.path().to_str().unwrap()]);
    for f in ["mesh1.txt", "mesh2.txt", "kl1.json", "kl2.json"] {
        assert!(tmp.path().join(f).exists(), "{f}");
    }
    let kl = json(&tmp.path().join("kl2.json"));
    assert!(kl.is_object());
}
