use std::path::Path;
use std::process::{Command, Output};

use rdfrl_cli::artifacts::{sha256_hex, Manifest};
use rdfrl_cli::run::RESULTS_HEADER;

fn rdfrl(args: &[&str], workers: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_rdfrl"));
    cmd.args(args);
    if let Some(w) = workers {
        cmd.env("RDFRL_WORKERS", w);
    }
    cmd.output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const SMALL: &str = r#"{
    "experiment_id": "small",
    "env": {"name": "toy"},
    "methods": ["mle", "df", "true"],
    "w_train": 1.0,
    "preference": {"support": [[0.5, 1.0]]},
    "training": {"max_iters": 2, "tau": 0.5},
    "eval": {"lo": 0.5, "hi": 1.0, "n": 3},
    "seeds": [0, 1]
}"#;

#[test]
fn run_writes_artifacts_and_manifest_reproduces_them() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "small.json", SMALL);
    let out = tmp.path().join("a");
    let o = rdfrl(&["run", &cfg, "--out-dir", out.to_str().unwrap()], Some("1"));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let results = std::fs::read_to_string(out.join("results.csv")).unwrap();
    assert_eq!(results.lines().next().unwrap(), RESULTS_HEADER.join(","));
    // 3 methods x 2 seeds x 3 preferences; w_train is on the grid.
    assert_eq!(results.lines().count(), 1 + 18);
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().next().unwrap(), "method,j_train_mean,j_train_std,j_avg_mean,j_avg_std");
    assert!(summary.lines().any(|l| l.starts_with("True,51,0,")));

    let manifest: Manifest = serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest.seeds, vec![0, 1]);
    for (name, hash) in &manifest.artifacts {
        assert_eq!(&sha256_hex(&std::fs::read(out.join(name)).unwrap()), hash, "{name}");
    }
    assert!(manifest.artifacts.contains_key("checkpoints/df_seed1.kv"));

    let again = tmp.path().join("b");
    let manifest_path = out.join("manifest.json");
    let o = rdfrl(&["run", manifest_path.to_str().unwrap(), "--out-dir", again.to_str().unwrap()], Some("2"));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["results.csv", "summary.csv"] {
        assert_eq!(std::fs::read(out.join(f)).unwrap(), std::fs::read(again.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn tampered_manifest_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "small.json", &SMALL.replace(r#"["mle", "df", "true"]"#, r#"["true"]"#));
    let out = tmp.path().join("a");
    assert!(rdfrl(&["run", &cfg, "--out-dir", out.to_str().unwrap()], None).status.success());
    let text = std::fs::read_to_string(out.join("manifest.json")).unwrap().replace("\"w_train\": 1.0", "\"w_train\": 0.9");
    let m = write(tmp.path(), "m.json", &text);
    assert_eq!(rdfrl(&["run", &m], None).status.code(), Some(2));
}

#[test]
fn config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let empty = write(tmp.path(), "empty.json", "");
    let o = rdfrl(&["run", &empty], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("empty"));

    let typo = write(tmp.path(), "typo.json", &SMALL.replace("\"seeds\"", "\"sedes\""));
    let o = rdfrl(&["run", &typo], None);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("sedes") && err.contains("line"), "{err}");

    assert_eq!(rdfrl(&["run", "/nonexistent/config.json"], None).status.code(), Some(2));
    assert_eq!(rdfrl(&["sweep", &typo, "--kind", "lambda"], None).status.code(), Some(2));
    let good = write(tmp.path(), "good.json", SMALL);
    assert_eq!(rdfrl(&["sweep", &good, "--kind", "fig4"], None).status.code(), Some(2));
    assert_eq!(rdfrl(&["run", &good], Some("zero")).status.code(), Some(2));
}

#[test]
fn nonconvergent_planner_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = SMALL
        .replace(r#"["mle", "df", "true"]"#, r#"["df"]"#)
        .replace("\"seeds\"", "\"planner\": {\"kind\": \"value_iteration\", \"tol\": 1e-12, \"max_iters\": 2}, \"seeds\"");
    let path = write(tmp.path(), "num.json", &cfg);
    let out = tmp.path().join("out");
    let o = rdfrl(&["run", &path, "--out-dir", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(std::fs::read_to_string(out.join("failure.txt")).unwrap().contains("converge"));
}

#[test]
fn plot_is_deterministic_and_rejects_bad_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = "experiment_id,method,env,w_train,lambda,w,seed,ret\n\
               e,MLE,toy,1,,0.5,0,10\ne,MLE,toy,1,,1,0,12\ne,True,toy,1,,0.5,0,20\ne,True,toy,1,,1,0,12\n";
    let path = write(tmp.path(), "r.csv", csv);
    for kind in ["return-vs-w", "histogram"] {
        let a = tmp.path().join(format!("{kind}-a.svg"));
        let b = tmp.path().join(format!("{kind}-b.svg"));
        assert!(rdfrl(&["plot", &path, "--kind", kind, "--out", a.to_str().unwrap()], None).status.success());
        assert!(rdfrl(&["plot", &path, "--kind", kind, "--out", b.to_str().unwrap()], None).status.success());
        let svg = std::fs::read(&a).unwrap();
        assert!(svg.starts_with(b"<svg"));
        assert_eq!(svg, std::fs::read(&b).unwrap());
    }
    let bad = write(tmp.path(), "bad.csv", &csv.replace("0.5,0,20", "0.5,x,20"));
    let o = rdfrl(&["plot", &bad, "--kind", "histogram", "--out", "/dev/null"], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 4"));
}

#[test]
fn sweep_writes_table_and_chart() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = SMALL.replace("\"seeds\": [0, 1]", "\"seeds\": [0], \"sweep\": {\"thetas\": {\"lo\": 1.0, \"hi\": 2.0, \"n\": 3}}");
    let path = write(tmp.path(), "s.json", &cfg);
    let out = tmp.path().join("out");
    let o = rdfrl(&["sweep", &path, "--kind", "nonident", "--out-dir", out.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = std::fs::read_to_string(out.join("sweep-nonident/sweep.csv")).unwrap();
    assert_eq!(table.lines().next().unwrap(), "seed,theta,j_train,j_test");
    assert_eq!(table.lines().filter(|l| l.contains(",51,")).count(), 3);
    assert!(out.join("sweep-nonident/sweep.svg").exists());
    assert!(out.join("sweep-nonident/manifest.json").exists());
}
