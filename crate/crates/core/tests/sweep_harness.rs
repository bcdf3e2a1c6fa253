use std::fs;
use std::path::Path;

use lrchain::config::RunConfig;
use lrchain::sweep::{read_record, record_file_name, run_sweep, PointStatus};

fn small_config(dir: &Path, workers: usize) -> RunConfig {
    let mut cfg = RunConfig::from_toml(
        r#"
        seed = 11
        [dmrg]
        bond_dims = [8, 16]
        max_sweeps = 10
        [sweep]
        alphas = [0.5, 1.5]
        j_values = [0.0, 0.5]
        sizes = [8, 10, 12]
        "#,
    )
    .unwrap();
    cfg.output_dir = dir.to_path_buf();
    cfg.workers = workers;
    cfg
}

fn record_bytes(dir: &Path) -> Vec<(String, String)> {
    let mut names: Vec<_> = fs::read_dir(dir.join("records"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    names
        .into_iter()
        .map(|n| {
            let rec = read_record(&dir.join("records").join(&n)).unwrap();
            (n, rec.content_json())
        })
        .collect()
}

#[test]
fn serial_parallel_and_rerun_agree() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();

    let first = run_sweep(&small_config(a.path(), 1)).unwrap();
    assert_eq!(first.computed, 4);
    assert_eq!(first.skipped, 0);
    assert!(a.path().join("summary.csv").exists());
    assert!(a.path().join("summary.json").exists());

    let parallel = run_sweep(&small_config(b.path(), 2)).unwrap();
    assert_eq!(parallel.computed, 4);
    assert_eq!(record_bytes(a.path()), record_bytes(b.path()));

    let raw_before = fs::read(a.path().join("records").join(record_file_name(1.5, 0.0))).unwrap();
    let again = run_sweep(&small_config(a.path(), 1)).unwrap();
    assert_eq!(again.computed, 0);
    assert_eq!(again.skipped, 4);
    let raw_after = fs::read(a.path().join("records").join(record_file_name(1.5, 0.0))).unwrap();
    assert_eq!(raw_before, raw_after);

    for rec in &first.records {
        assert_eq!(rec.seed, 11);
        assert_eq!(rec.entries.len(), 3);
        assert!(rec.fit.is_some(), "({}, {}) {:?} {:?}", rec.alpha, rec.j_lr, rec.message, rec.entries);
    }
}

#[test]
fn changed_seed_recomputes() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path(), 1);
    cfg.sweep.alphas = vec![1.5];
    cfg.sweep.j_values = vec![0.0];
    run_sweep(&cfg).unwrap();
    cfg.seed = 12;
    let again = run_sweep(&cfg).unwrap();
    assert_eq!(again.computed, 1);
}

#[test]
fn unusable_points_are_persisted_as_failed() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path(), 1);
    cfg.sweep.alphas = vec![1.5];
    cfg.sweep.j_values = vec![0.0];
    cfg.sweep.sizes = vec![4, 6];
    let summary = run_sweep(&cfg).unwrap();
    assert_eq!(summary.records.len(), 1);
    let rec = read_record(&dir.path().join("records").join(record_file_name(1.5, 0.0))).unwrap();
    assert_eq!(rec.status, PointStatus::Failed);
    assert_eq!(rec.excluded_sizes, vec![4, 6]);
    assert!(rec.label.is_none());
    let csv = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().contains("failed"), "{csv}");
}
