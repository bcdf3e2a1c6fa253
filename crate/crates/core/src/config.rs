//! Run configuration: a TOML file with top-level run options and one table
//! per command. Unknown keys are rejected.
//!
//! ```toml
//! seed = 7
//! workers = 2
//! format = "both"
//!
//! [model]
//! alpha = 1.5
//! j = 0.5
//! n_sites = 12
//!
//! [dmrg]
//! bond_dims = [16, 32, 64, 128]
//!
//! [sweep]
//! alphas = [0.5, 1.5]
//! j_values = [0.0, 0.5]
//! sizes = [16, 24, 32]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cavity::{CavityParams, TimeGrid};
use crate::model::{Boundary, ModelParams};
use crate::spinwave::default_density_sizes;
use crate::tensornet::DmrgConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Parse(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

pub type ConfigResult<T> = Result<T, ConfigError>;

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
    #[default]
    Both,
}

impl OutputFormat {
    pub fn csv(self) -> bool {
        matches!(self, OutputFormat::Csv | OutputFormat::Both)
    }
    pub fn json(self) -> bool {
        matches!(self, OutputFormat::Json | OutputFormat::Both)
    }
}

impl std::str::FromStr for OutputFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            "both" => Ok(Self::Both),
            other => Err(format!("unknown format {other:?} (expected csv, json or both)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    pub seed: u64,
    pub workers: usize,
    pub format: OutputFormat,
    pub model: ModelSection,
    pub dmrg: DmrgSection,
    pub sweep: SweepGrid,
    pub spinwave: SpinWaveSection,
    pub cavity: CavitySection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            output_dir: PathBuf::from("out"),
            seed: 1,
            workers: 1,
            format: OutputFormat::Both,
            model: ModelSection::default(),
            dmrg: DmrgSection::default(),
            sweep: SweepGrid::default(),
            spinwave: SpinWaveSection::default(),
            cavity: CavitySection::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub alpha: f64,
    pub j: f64,
    pub n_sites: usize,
    pub boundary: Boundary,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self { alpha: 1.5, j: 0.5, n_sites: 12, boundary: Boundary::Open }
    }
}

impl ModelSection {
    pub fn params(&self) -> ConfigResult<ModelParams> {
        ModelParams::with_boundary(self.alpha, self.j, self.n_sites, self.boundary)
            .map_err(|e| ConfigError::Invalid(format!("[model] {e}")))
    }
}

/// DMRG settings; the seed comes from the top-level `seed`. The default
/// cut is tighter than the solver default so that gapless points reach the
/// bond-dimension cap instead of stalling on the cut.
/// Discarded-weight threshold used by phase runs.
pub const PHASE_TRUNCATION_CUT: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DmrgSection {
    pub bond_dims: Vec<usize>,
    pub truncation_cut: f64,
    pub energy_tol: f64,
    pub max_sweeps: usize,
    pub initial_bond_dim: usize,
    pub local_tol: f64,
    pub local_max_iter: usize,
}

impl Default for DmrgSection {
    fn default() -> Self {
        let d = DmrgConfig::default();
        Self {
            bond_dims: d.bond_dims,
            truncation_cut: PHASE_TRUNCATION_CUT,
            energy_tol: d.energy_tol,
            max_sweeps: d.max_sweeps,
            initial_bond_dim: d.initial_bond_dim,
            local_tol: d.local_tol,
            local_max_iter: d.local_max_iter,
        }
    }
}

impl DmrgSection {
    pub fn to_config(&self, seed: u64) -> DmrgConfig {
        DmrgConfig {
            bond_dims: self.bond_dims.clone(),
            truncation_cut: self.truncation_cut,
            energy_tol: self.energy_tol,
            max_sweeps: self.max_sweeps,
            seed,
            initial_bond_dim: self.initial_bond_dim,
            local_tol: self.local_tol,
            local_max_iter: self.local_max_iter,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepGrid {
    pub alphas: Vec<f64>,
    pub j_values: Vec<f64>,
    /// Chain lengths of the entropy-scaling series at each point.
    pub sizes: Vec<usize>,
}

fn steps(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|k| lo + k as f64 * step).collect()
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self { alphas: steps(0.0, 2.5, 0.25), j_values: steps(-1.0, 2.0, 0.25), sizes: vec![16, 24, 32, 48, 64] }
    }
}

impl SweepGrid {
    pub fn cardinality(&self) -> usize {
        self.alphas.len() * self.j_values.len()
    }

    /// Grid points in row-major (α outer, J inner) order.
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.alphas.iter().flat_map(|&a| self.j_values.iter().map(move |&j| (a, j))).collect()
    }

    pub fn validate(&self) -> ConfigResult<()> {
        if self.alphas.is_empty() || self.j_values.is_empty() || self.sizes.is_empty() {
            return Err(ConfigError::Invalid("[sweep] axes must be non-empty".into()));
        }
        if self.alphas.iter().chain(&self.j_values).any(|x| !x.is_finite()) {
            return Err(ConfigError::Invalid("[sweep] grid values must be finite".into()));
        }
        if self.sizes.windows(2).any(|w| w[1] <= w[0]) || self.sizes[0] < 2 {
            return Err(ConfigError::Invalid("[sweep] sizes must be increasing and at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpinWaveSection {
    /// Ring sizes for the excitation-density series.
    pub density_sizes: Vec<usize>,
}

impl Default for SpinWaveSection {
    fn default() -> Self {
        Self { density_sizes: default_density_sizes() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CavitySection {
    pub g: f64,
    pub delta_c: f64,
    pub kappa: f64,
    pub j_xx: f64,
    pub j_z: f64,
    pub n_sites: usize,
    pub n_max: usize,
    pub t_end: f64,
    pub dt: f64,
    pub record_every: usize,
    /// Initial spin configuration as a bit string, site 0 rightmost.
    pub initial: String,
    pub include_dissipator: bool,
}

impl Default for CavitySection {
    fn default() -> Self {
        Self {
            g: 1.0,
            delta_c: 400.0,
            kappa: 20.0,
            j_xx: 1.0,
            j_z: 1.0,
            n_sites: 2,
            n_max: 4,
            t_end: 10.0,
            dt: 2e-4,
            record_every: 500,
            initial: "01".into(),
            include_dissipator: true,
        }
    }
}

impl CavitySection {
    pub fn params(&self) -> CavityParams {
        CavityParams {
            g: self.g,
            delta_c: self.delta_c,
            kappa: self.kappa,
            j_xx: self.j_xx,
            j_z: self.j_z,
            n_sites: self.n_sites,
        }
    }

    pub fn grid(&self) -> TimeGrid {
        TimeGrid { t_end: self.t_end, dt: self.dt, record_every: self.record_every }
    }

    pub fn initial_spins(&self) -> ConfigResult<u64> {
        if self.initial.len() != self.n_sites {
            return Err(ConfigError::Invalid(format!(
                "[cavity] initial has {} characters for {} sites",
                self.initial.len(),
                self.n_sites
            )));
        }
        u64::from_str_radix(&self.initial, 2)
            .map_err(|_| ConfigError::Invalid(format!("[cavity] initial {:?} is not a bit string", self.initial)))
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> ConfigResult<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        if cfg.workers == 0 {
            return Err(ConfigError::Invalid("workers must be at least 1".into()));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> ConfigResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn dmrg_config(&self) -> DmrgConfig {
        self.dmrg.to_config(self.seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_gets_defaults() {
        let cfg = RunConfig::from_toml("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(
            cfg.dmrg_config(),
            DmrgConfig { seed: 1, truncation_cut: PHASE_TRUNCATION_CUT, ..DmrgConfig::default() }
        );
    }

    #[test]
    fn round_trip_through_emitter() {
        let mut cfg = RunConfig::default();
        cfg.seed = 99;
        cfg.sweep.sizes = vec![8, 12];
        cfg.format = OutputFormat::Json;
        let back = RunConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = RunConfig::from_toml("[model]\nalpa = 1.0\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("alpa"), "{msg}");
        let err = RunConfig::from_toml("sed = 3\n").unwrap_err();
        assert!(err.to_string().contains("sed"));
    }

    #[test]
    fn default_grid_cardinality() {
        let g = SweepGrid::default();
        assert_eq!(g.alphas.len(), 11);
        assert_eq!(g.j_values.len(), 13);
        assert_eq!(g.cardinality(), 143);
        assert_eq!(g.points().len(), 143);
        assert_eq!(g.points()[1], (0.0, -0.75));
        g.validate().unwrap();
        let bad = SweepGrid { sizes: vec![16, 16], ..g };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn cavity_initial_bits() {
        let c = CavitySection { initial: "10".into(), ..Default::default() };
        assert_eq!(c.initial_spins().unwrap(), 0b10);
        let c = CavitySection { initial: "1x".into(), ..Default::default() };
        assert!(c.initial_spins().is_err());
        let c = CavitySection { initial: "101".into(), ..Default::default() };
        assert!(c.initial_spins().is_err());
    }
}
