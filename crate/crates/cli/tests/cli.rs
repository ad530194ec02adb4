use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const FLAT: &str = r#"
energy = 0.5
seed = 5

[lagrangian]
family = "flat-kinetic"

[entropy.covering]
samples = 600
t_grid = [5.0, 10.0]

[entropy.lyapunov]
orbits = 2
t_total = 20.0
"#;

const MECHANICAL_LOW: &str = r#"
energy = 0.05

[lagrangian]
family = "mechanical"
potential = { terms = [{ m = 1, n = 0, cos = 0.05 }, { m = 0, n = 1, cos = 0.05 }] }
"#;

const INDEFINITE: &str = r#"
energy = 1.0

[lagrangian]
family = "custom-fourier"

[lagrangian.metric.g11]
constant = 1.0
terms = [{ m = 1, n = 0, cos = 1.5 }]

[lagrangian.metric.g22]
constant = 1.0
"#;

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn aubry(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aubry")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let flat = write_config(dir.path(), "flat.toml", FLAT);
    let out = dir.path().join("v");
    let o = aubry(&["validate", "--config", s(&flat), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("validation.json").exists());

    let bad = write_config(dir.path(), "bad.toml", INDEFINITE);
    let o = aubry(&["validate", "--config", s(&bad), "--out", s(&out)]);
    assert_eq!(code(&o), 2);

    let missing = write_config(dir.path(), "missing.toml", &FLAT.replace("energy = 0.5", ""));
    let o = aubry(&["validate", "--config", s(&missing), "--out", s(&out)]);
    assert_eq!(code(&o), 1);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("missing field `energy`"), "{err}");
    assert!(err.contains("line"), "{err}");
}

#[test]
fn usage_errors_are_config_errors() {
    let o = aubry(&["pipeline"]);
    assert_eq!(code(&o), 1);
    let o = aubry(&["frobnicate"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn subcritical_energy_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "low.toml", MECHANICAL_LOW);
    let out = dir.path().join("run");
    let o = aubry(&["pipeline", "--config", s(&cfg), "--out", s(&out), "--workers", "1"]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stdout));
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["exit_code"], 3);
    let c0 = manifest["critical_value"].as_f64().unwrap();
    assert!((c0 - 0.1).abs() < 1e-3);
}

fn artifact_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file() && p.file_name().unwrap() != "timings.json")
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

#[test]
fn flat_pipeline_resumes_from_cache() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "flat.toml", FLAT);
    let out = dir.path().join("run");
    let o = aubry(&["pipeline", "--config", s(&cfg), "--out", s(&out), "--workers", "2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let first = artifact_bytes(&out);
    let names: Vec<&str> = first.iter().map(|(n, _)| n.as_str()).collect();
    for f in [
        "manifest.json",
        "orbits.json",
        "graph.json",
        "beta.csv",
        "alpha.csv",
        "barrier.csv",
        "entropy.json",
    ] {
        assert!(names.contains(&f), "missing {f} in {names:?}");
    }
    assert!(names.iter().any(|n| n.starts_with("trajectory_")));
    let manifest: serde_json::Value =
        serde_json::from_slice(&first.iter().find(|(n, _)| n == "manifest.json").unwrap().1).unwrap();
    assert_eq!(manifest["certificate"], false);
    assert!(!manifest["hypothesis_failures"].as_array().unwrap().is_empty());

    let o = aubry(&[
        "pipeline",
        "--config",
        s(&cfg),
        "--out",
        s(&out),
        "--workers",
        "1",
        "--resume",
    ]);
    assert_eq!(code(&o), 0);
    let timings: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("timings.json")).unwrap()).unwrap();
    for st in timings["stages"].as_array().unwrap() {
        assert_eq!(st["cache"], "hit", "{st}");
    }
    assert_eq!(first, artifact_bytes(&out));

    // a different seed is a different cache entry
    let o = aubry(&["pipeline", "--config", s(&cfg), "--out", s(&out), "--seed", "9", "--resume"]);
    assert_eq!(code(&o), 0);
    let timings: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("timings.json")).unwrap()).unwrap();
    assert!(timings["stages"]
        .as_array()
        .unwrap()
        .iter()
        .all(|st| st["cache"] == "computed"));
}

#[test]
fn sweep_marks_subcritical_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "flat.toml", FLAT);
    let out = dir.path().join("sweep");
    let o = aubry(&[
        "sweep",
        "--config",
        s(&cfg),
        "--out",
        s(&out),
        "--param",
        "energy",
        "--values",
        "0.0,0.5",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary = std::fs::read_to_string(out.join("sweep_summary.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].starts_with("value,exit_code,critical_value,certificate"));
    assert!(rows[1].starts_with("0,3,"), "{}", rows[1]);
    assert!(rows[2].starts_with("0.5,0,"), "{}", rows[2]);
    assert!(out.join("run_0/manifest.json").exists() && out.join("run_1/manifest.json").exists());

    let o = aubry(&["sweep", "--config", s(&cfg), "--out", s(&out), "--param", "energy"]);
    assert_eq!(code(&o), 1);
    let o = aubry(&[
        "sweep",
        "--config",
        s(&cfg),
        "--out",
        s(&out),
        "--param",
        "nowhere.near",
        "--values",
        "1",
    ]);
    assert_eq!(code(&o), 1);
}

#[test]
fn beta_alpha_and_entropy_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "flat.toml", FLAT);
    let out = dir.path().join("b");
    assert_eq!(code(&aubry(&["beta", "--config", s(&cfg), "--out", s(&out)])), 0);
    let beta = std::fs::read_to_string(out.join("beta.csv")).unwrap();
    assert!(beta.starts_with("h1,h2,beta,T_witness"));
    for line in beta.lines().skip(1) {
        let f: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert!((f[2] - 0.5 * (f[0] * f[0] + f[1] * f[1])).abs() < 1e-3, "{line}");
    }
    assert_eq!(code(&aubry(&["alpha", "--config", s(&cfg), "--out", s(&out)])), 0);
    assert!(std::fs::read_to_string(out.join("alpha.csv"))
        .unwrap()
        .starts_with("w1,w2,alpha"));
    assert_eq!(code(&aubry(&["entropy", "--config", s(&cfg), "--out", s(&out)])), 0);
    let e: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("entropy.json")).unwrap()).unwrap();
    assert!(e["covering"]["value"]["estimate"].as_f64().unwrap() < 0.1);
}
