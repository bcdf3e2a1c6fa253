use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn lrchain(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lrchain")).args(args).output().expect("binary runs")
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn unknown_config_key_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[model]\nalpa = 1.0\n").unwrap();
    let out = lrchain(&["ed", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpa"));
}

#[test]
fn bad_flag_exits_1_and_help_exits_0() {
    assert_eq!(lrchain(&["ed", "--format", "xml"]).status.code(), Some(1));
    assert_eq!(lrchain(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(lrchain(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_input_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = lrchain(&["fit-c", "--input", dir.path().join("none.csv").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn ed_writes_energy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "[model]\nalpha = 1.0\nj = 0.0\nn_sites = 2\n").unwrap();
    let out = lrchain(&["ed", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = read_json(&dir.path().join("ed.json"));
    // triplet of the isotropic ferromagnetic bond
    assert!((v["energy"].as_f64().unwrap() + 0.25).abs() < 1e-12);
}

#[test]
fn dmrg_matches_ed_and_writes_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "[model]\nalpha = 1.5\nj = 0.5\nn_sites = 8\n").unwrap();
    let args = ["--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()];
    let ck = dir.path().join("gs.mps");
    let out = lrchain(&[&["dmrg", "--checkpoint", ck.to_str().unwrap()], &args[..]].concat());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(lrchain(&[&["ed"], &args[..]].concat()).status.success());
    let e_dmrg = read_json(&dir.path().join("dmrg.json"))["energy"].as_f64().unwrap();
    let e_ed = read_json(&dir.path().join("ed.json"))["energy"].as_f64().unwrap();
    assert!((e_dmrg - e_ed).abs() < 1e-8, "{e_dmrg} {e_ed}");
    assert!(fs::metadata(&ck).unwrap().len() > 0);
}

#[test]
fn fit_c_recovers_slope() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("series.csv");
    let rows: String = [8usize, 16, 32, 64]
        .iter()
        .map(|&l| format!("{l},{}\n", (l as f64).ln() / 6.0 + 0.3))
        .collect();
    fs::write(&input, format!("L,S\n{rows}")).unwrap();
    let out = lrchain(&["fit-c", "--input", input.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let v = read_json(&dir.path().join("fit.json"));
    assert!((v["c"].as_f64().unwrap() - 1.0).abs() < 1e-10);
}

#[test]
fn classify_labels_point() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("point.json");
    fs::write(
        &input,
        r#"{"alpha": 0.5, "j_lr": 0.5, "c_fit": {"c": 0.0, "offset": 0.0, "residual": 0.0, "ci_halfwidth": 0.0},
            "sigma_z_mean": 1.0, "xy_plateau": 0.0}"#,
    )
    .unwrap();
    let out = lrchain(&["classify", "--input", input.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(read_json(&dir.path().join("classification.json"))["label"], "FM");
}

#[test]
fn cavity_map_and_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "[cavity]\nt_end = 0.5\ndt = 1e-3\nrecord_every = 50\n").unwrap();
    let args = ["--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()];
    assert!(lrchain(&[&["cavity", "map"], &args[..]].concat()).status.success());
    let v = read_json(&dir.path().join("cavity_map.json"));
    assert!(v["effective"]["j_over_n"].as_f64().unwrap().is_finite());
    let out = lrchain(&[&["cavity", "simulate", "--model", "full"], &args[..]].concat());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("trajectory_full.csv")).unwrap();
    assert_eq!(csv.lines().count(), 12);
    assert!(csv.starts_with("t,sigma_z_0,sigma_z_1,photons"));
}

#[test]
fn sweep_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "format = \"csv\"\n[dmrg]\nbond_dims = [8, 16]\n[sweep]\nalphas = [1.5]\nj_values = [0.0]\nsizes = [8, 10]\n",
    )
    .unwrap();
    let out = lrchain(&["sweep", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--workers", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("summary.csv").exists());
    assert!(!dir.path().join("summary.json").exists());
    let out = lrchain(&["sweep", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("computed 0, skipped 1"));
}
