//! Phase-diagram sweeps: DMRG entropy series at each (α, J), central-charge
//! fit, order parameters and label, persisted as one JSON record per point
//! plus a summary CSV.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analysis::{
    fit_central_charge, order_parameters_mps, CentralChargeFit, EntropyScalingSeries, OrderParameters,
    PhaseLabel, PhasePoint, MIN_SERIES_LENGTH,
};
use crate::config::{ConfigError, RunConfig};
use crate::model::ModelParams;
use crate::tensornet::{ground_state, DmrgConfig};

/// Largest discarded weight for a size to enter the entropy series.
pub const ACCEPT_TRUNCATION: f64 = 1e-6;

pub const SCHEMA_VERSION: &str = "lrchain.sweep-record/1";
pub const CSV_HEADER: [&str; 12] =
    ["alpha", "j", "n", "energy", "s_half", "c", "c_residual", "sigma_z_mean", "xy_plateau", "label", "status", "seed"];

#[derive(Debug, Error)]
pub enum SweepError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type SweepResult<T> = Result<T, SweepError>;

fn io_at(path: &Path) -> impl FnOnce(std::io::Error) -> SweepError + '_ {
    move |source| SweepError::Io { path: path.to_path_buf(), source }
}

/// Rounds to 12 significant digits so records re-serialize identically.
pub fn round12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().unwrap()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeEntry {
    pub n_sites: usize,
    pub energy: f64,
    pub s_half: f64,
    pub converged: bool,
    pub max_truncation_error: f64,
    pub sweeps: usize,
    pub max_bond_dim: usize,
    pub pinned: bool,
    /// Used in the fit: converged, discarded weight below [`ACCEPT_TRUNCATION`], L ≥ 8.
    pub accepted: bool,
    pub error: Option<String>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointStatus {
    /// Every size accepted and the fit succeeded.
    Complete,
    /// Some sizes were excluded; the fit used the rest.
    Partial,
    /// No fit was possible.
    Failed,
}

impl std::fmt::Display for PointStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PointStatus::Complete => "complete",
            PointStatus::Partial => "partial",
            PointStatus::Failed => "failed",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordMetadata {
    pub timestamp_unix: u64,
    pub output_dir: PathBuf,
    pub workers: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub schema_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub alpha: f64,
    pub j_lr: f64,
    /// Run configuration with the execution-only fields (output directory,
    /// worker count, format) reset to defaults; those live in `metadata`.
    pub config: RunConfig,
    pub entries: Vec<SizeEntry>,
    pub excluded_sizes: Vec<usize>,
    pub fit: Option<CentralChargeFit>,
    pub order: Option<OrderParameters>,
    pub label: Option<PhaseLabel>,
    pub status: PointStatus,
    pub message: Option<String>,
    pub metadata: RecordMetadata,
}

impl SweepRecord {
    /// JSON without the metadata block, for reproducibility comparisons.
    pub fn content_json(&self) -> String {
        let mut v = serde_json::to_value(self).unwrap();
        v.as_object_mut().unwrap().remove("metadata");
        serde_json::to_string_pretty(&v).unwrap()
    }
}

/// DMRG across `sizes` at one (α, J).
pub fn entropy_series(alpha: f64, j_lr: f64, sizes: &[usize], cfg: &DmrgConfig) -> (Vec<SizeEntry>, Option<OrderParameters>) {
    let mut entries = Vec::with_capacity(sizes.len());
    let mut order = None;
    for &n in sizes {
        let run = ModelParams::new(alpha, j_lr, n)
            .map_err(|e| e.to_string())
            .and_then(|p| ground_state(&p, cfg).map_err(|e| e.to_string()));
        match run {
            Ok(run) => {
                let r = &run.report;
                let accepted = r.converged && r.max_truncation_error < ACCEPT_TRUNCATION && n >= MIN_SERIES_LENGTH;
                if accepted {
                    order = Some(order_parameters_mps(&run.mps));
                }
                entries.push(SizeEntry {
                    n_sites: n,
                    energy: round12(run.energy),
                    s_half: round12(r.half_chain_entropy()),
                    converged: r.converged,
                    max_truncation_error: round12(r.max_truncation_error),
                    sweeps: r.sweeps,
                    max_bond_dim: r.max_bond_dim,
                    pinned: run.pinned,
                    accepted,
                    error: None,
                });
            }
            Err(e) => entries.push(SizeEntry {
                n_sites: n,
                energy: f64::NAN,
                s_half: f64::NAN,
                converged: false,
                max_truncation_error: f64::NAN,
                sweeps: 0,
                max_bond_dim: 0,
                pinned: false,
                accepted: false,
                error: Some(e),
            }),
        }
    }
    let order = order.map(|o| OrderParameters { sigma_z_mean: round12(o.sigma_z_mean), xy_plateau: round12(o.xy_plateau) });
    (entries, order)
}

fn point_hash(cfg: &RunConfig, alpha: f64, j_lr: f64) -> String {
    #[derive(Serialize)]
    struct Key<'a> {
        schema: &'a str,
        alpha: f64,
        j_lr: f64,
        sizes: &'a [usize],
        dmrg: DmrgConfig,
    }
    let key = Key { schema: SCHEMA_VERSION, alpha, j_lr, sizes: &cfg.sweep.sizes, dmrg: cfg.dmrg_config() };
    let digest = Sha256::digest(serde_json::to_vec(&key).unwrap());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn canonical_config(cfg: &RunConfig) -> RunConfig {
    let d = RunConfig::default();
    RunConfig { output_dir: d.output_dir, workers: d.workers, format: d.format, ..cfg.clone() }
}

/// Computes the record of one grid point (metadata left for the caller).
pub fn compute_point(cfg: &RunConfig, alpha: f64, j_lr: f64) -> SweepRecord {
    let dmrg = cfg.dmrg_config();
    let (entries, order) = entropy_series(alpha, j_lr, &cfg.sweep.sizes, &dmrg);
    let excluded_sizes: Vec<usize> = entries.iter().filter(|e| !e.accepted).map(|e| e.n_sites).collect();
    let series = EntropyScalingSeries {
        alpha,
        j_lr,
        points: entries.iter().filter(|e| e.accepted).map(|e| (e.n_sites, e.s_half)).collect(),
    };
    let (fit, label, status, message) = match (fit_central_charge(&series), order) {
        (Ok(fit), Some(o)) => {
            let fit = CentralChargeFit {
                c: round12(fit.c),
                offset: round12(fit.offset),
                residual: round12(fit.residual),
                ci_halfwidth: round12(fit.ci_halfwidth),
            };
            let point = PhasePoint::new(alpha, j_lr, fit.clone(), o);
            let status = if excluded_sizes.is_empty() { PointStatus::Complete } else { PointStatus::Partial };
            let msg = (!excluded_sizes.is_empty()).then(|| format!("excluded sizes {excluded_sizes:?}"));
            (Some(fit), Some(point.label), status, msg)
        }
        (Err(e), _) => (None, None, PointStatus::Failed, Some(e.to_string())),
        (Ok(_), None) => (None, None, PointStatus::Failed, Some("no accepted state for order parameters".into())),
    };
    SweepRecord {
        schema_version: SCHEMA_VERSION.into(),
        config_hash: point_hash(cfg, alpha, j_lr),
        seed: cfg.seed,
        alpha,
        j_lr,
        config: canonical_config(cfg),
        entries,
        excluded_sizes,
        fit,
        order,
        label,
        status,
        message,
        metadata: RecordMetadata { timestamp_unix: 0, output_dir: PathBuf::new(), workers: 0 },
    }
}

pub fn record_file_name(alpha: f64, j_lr: f64) -> String {
    format!("point_a{alpha:+.4}_j{j_lr:+.4}.json")
}

pub fn write_record(path: &Path, record: &SweepRecord) -> SweepResult<()> {
    let text = serde_json::to_string_pretty(record).map_err(|source| SweepError::Json { path: path.into(), source })?;
    fs::write(path, text + "\n").map_err(io_at(path))
}

pub fn read_record(path: &Path) -> SweepResult<SweepRecord> {
    let text = fs::read_to_string(path).map_err(io_at(path))?;
    serde_json::from_str(&text).map_err(|source| SweepError::Json { path: path.into(), source })
}

/// One CSV row per (point, size).
pub fn write_csv<W: Write>(records: &[SweepRecord], out: W) -> SweepResult<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    let num = |x: Option<f64>| x.map_or(String::new(), |v| round12(v).to_string());
    for r in records {
        for e in &r.entries {
            w.write_record([
                r.alpha.to_string(),
                r.j_lr.to_string(),
                e.n_sites.to_string(),
                num(Some(e.energy)),
                num(Some(e.s_half)),
                num(r.fit.as_ref().map(|f| f.c)),
                num(r.fit.as_ref().map(|f| f.residual)),
                num(r.order.map(|o| o.sigma_z_mean)),
                num(r.order.map(|o| o.xy_plateau)),
                r.label.map_or(String::new(), |l| l.to_string()),
                r.status.to_string(),
                r.seed.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| SweepError::Csv(e.into()))?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSummary {
    pub computed: usize,
    pub skipped: usize,
    /// All records of the grid, in grid order.
    pub records: Vec<SweepRecord>,
}

/// Runs (or resumes) the sweep described by `cfg.sweep`, writing into
/// `cfg.output_dir`. Points whose record already exists with the same
/// configuration hash are not recomputed.
pub fn run_sweep(cfg: &RunConfig) -> SweepResult<SweepSummary> {
    cfg.sweep.validate()?;
    cfg.dmrg_config().validate().map_err(|e| ConfigError::Invalid(format!("[dmrg] {e}")))?;
    let dir = cfg.output_dir.join("records");
    fs::create_dir_all(&dir).map_err(io_at(&dir))?;
    let points = cfg.sweep.points();

    let mut todo = Vec::new();
    let mut existing = vec![None; points.len()];
    for (k, &(a, j)) in points.iter().enumerate() {
        let path = dir.join(record_file_name(a, j));
        let hash = point_hash(cfg, a, j);
        match read_record(&path) {
            Ok(rec) if rec.config_hash == hash => existing[k] = Some(rec),
            _ => todo.push(k),
        }
    }
    let skipped = points.len() - todo.len();

    let writer = Mutex::new(());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| ConfigError::Invalid(format!("worker pool: {e}")))?;
    let computed: Vec<(usize, SweepResult<SweepRecord>)> = pool.install(|| {
        todo.par_iter()
            .map(|&k| {
                let (a, j) = points[k];
                let mut rec = compute_point(cfg, a, j);
                rec.metadata = RecordMetadata {
                    timestamp_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
                    output_dir: cfg.output_dir.clone(),
                    workers: cfg.workers,
                };
                let _guard = writer.lock().unwrap();
                let res = write_record(&dir.join(record_file_name(a, j)), &rec).map(|_| rec);
                (k, res)
            })
            .collect()
    });
    for (k, res) in computed {
        existing[k] = Some(res?);
    }
    let records: Vec<SweepRecord> = existing.into_iter().map(Option::unwrap).collect();

    if cfg.format.csv() {
        let path = cfg.output_dir.join("summary.csv");
        let file = fs::File::create(&path).map_err(io_at(&path))?;
        write_csv(&records, file)?;
    }
    if cfg.format.json() {
        let path = cfg.output_dir.join("summary.json");
        let text = serde_json::to_string_pretty(&records).map_err(|source| SweepError::Json { path: path.clone(), source })?;
        fs::write(&path, text + "\n").map_err(io_at(&path))?;
    }
    Ok(SweepSummary { computed: todo.len(), skipped, records })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_is_idempotent() {
        for &x in &[1.0 / 3.0, -24.967779711750914, 1e-7 / 3.0, 0.0, 123456789.12345679] {
            let r = round12(x);
            assert_eq!(round12(r), r);
            assert!((r - x).abs() <= 1e-11 * x.abs());
        }
    }

    #[test]
    fn empty_csv_is_header_only() {
        let mut buf = Vec::new();
        write_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), CSV_HEADER.join(",") + "\n");
    }

    #[test]
    fn file_names_are_stable() {
        assert_eq!(record_file_name(1.5, -0.25), "point_a+1.5000_j-0.2500.json");
    }
}
