use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_convfloer"))
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

fn read_json(p: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

const SMALL: &str = r#"
k = 3
dt = 0.01
modes = [1]
[density]
kind = "gp"
[grid]
ns = 20
nt = 8
margin = 2.0
[strip]
t_max = 2.0
steps = 2
[hofer]
nodes = 2
starts = 4
"#;

#[test]
fn zero_density_simulation_keeps_norm_constant() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "k = 4\nmodes = [1]\ndt = 0.01\n[density]\nkind = \"zero\"\n");
    let out = run(dir.path(), &["--config", &cfg, "--out", "sim", "simulate", "--t1", "0.5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut rdr = csv::Reader::from_path(dir.path().join("sim/observables.csv")).unwrap();
    let headers = rdr.headers().unwrap().clone();
    assert_eq!(&headers, vec!["t", "norm", "F", "G", "H0"]);
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let norm: f64 = rec[1].parse().unwrap();
        assert!((norm - 1.0).abs() <= 1e-14, "{norm}");
        assert_eq!(rec[2].parse::<f64>().unwrap(), 0.0);
        rows += 1;
    }
    assert_eq!(rows, 51);
    let manifest = read_json(&dir.path().join("sim/manifest.json"));
    assert_eq!(manifest["kind"], "simulate");
    assert_eq!(manifest["status"], "ok");
}

#[test]
fn hofer_matches_single_pair_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "k = 1\nmodes = [1]\n[density]\nkind = \"linear\"\nlambda = 1.0\n[kernel]\nprofile = \"flat\"\namplitude = 0.1\n",
    );
    let out = run(dir.path(), &["--config", &cfg, "--out", "h", "hofer", "--nodes", "2", "--starts", "8"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&dir.path().join("h/hofer.json"));
    let exact = 2.0 * PI * PI * 0.01;
    for key in ["F", "G"] {
        let v = report[key]["value"].as_f64().unwrap();
        assert!((v - exact).abs() / exact <= 1e-6, "{key}: {v} vs {exact}");
    }
    assert_eq!(report["hypothesis_holds"], true);
}

#[test]
fn large_kernel_warns_about_hypothesis() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "k = 1\nmodes = [1]\n[density]\nkind = \"linear\"\nlambda = 1.0\n[kernel]\nprofile = \"flat\"\namplitude = 0.3\n",
    );
    let out = run(dir.path(), &["--config", &cfg, "--out", "h", "hofer", "--nodes", "2", "--starts", "4"]);
    assert!(out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("hypothesis violated"), "{stderr}");
    let report = read_json(&dir.path().join("h/hofer.json"));
    assert_eq!(report["hypothesis_holds"], false);
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "k = 3\n[grid]\nnss = 4\n");
    let out = run(dir.path(), &["--config", &cfg, "hofer"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("nss"), "{stderr}");
}

#[test]
fn bad_arguments_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["strip", "--grid", "20by8"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["strip", "--grid", "21x8"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["simulate", "--dt", "0.3"]).status.code(), Some(2));
}

#[test]
fn corrupted_snapshot_names_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let snap = dir.path().join("broken.json");
    std::fs::write(&snap, "{\"version\": 1, \"k\": 3").unwrap();
    let out = run(
        dir.path(),
        &["--config", &cfg, "--out", "s", "strip", "--resume", snap.to_str().unwrap()],
    );
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("broken.json"), "{stderr}");
}

#[test]
fn strip_outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    for out_dir in ["a", "b"] {
        let out = run(dir.path(), &["--config", &cfg, "--out", out_dir, "strip"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for name in ["strip_n1.csv", "action_n1.csv", "strip_n1_final.json"] {
        let a = std::fs::read(dir.path().join("a").join(name)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between runs");
    }
}

#[test]
fn fixedpoints_catalog_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = run(
        dir.path(),
        &["--config", &cfg, "--out", "fp/catalog_small.json", "fixedpoints", "--modes-list", "0,1"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let catalog = read_json(&dir.path().join("fp/catalog_small.json"));
    let entries = catalog.as_array().unwrap();
    assert_eq!(entries.len(), 2);
    for e in entries {
        assert!(e["residual"].as_f64().unwrap() <= 1e-9);
    }
    assert!(dir.path().join("fp/manifest.json").exists());
}
