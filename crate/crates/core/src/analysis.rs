//! Entanglement scaling, effective central charge, order parameters and the
//! three-phase classification.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exactdiag::Correlators;
use crate::tensornet::Mps;

/// Largest c still labelled FM.
pub const C_FM_THRESHOLD: f64 = 0.2;
/// Allowed distance of c from 1 for TLL; SSB needs c above 1 by more.
pub const C_MARGIN: f64 = 0.2;
/// Bulk |⟨σᶻ⟩| above which a point counts as polarized.
pub const SIGMA_Z_FM: f64 = 0.5;
/// Bulk |⟨σᶻ⟩| below which a point counts as unpolarized.
pub const SIGMA_Z_SMALL: f64 = 0.1;
pub const MIN_SERIES_POINTS: usize = 2;
pub const MIN_SERIES_LENGTH: usize = 8;
const BOOTSTRAP_SAMPLES: usize = 400;
const BOOTSTRAP_SEED: u64 = 0x5eed;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("need at least {need} points with distinct L, got {got}")]
    InsufficientPoints { need: usize, got: usize },
    #[error("chain lengths must be strictly increasing and at least {MIN_SERIES_LENGTH}")]
    InvalidLengths,
    #[error("non-finite entropy at L = {0}")]
    NonFinite(usize),
}

pub type AnalysisResult<T> = Result<T, AnalysisError>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyScalingSeries {
    pub alpha: f64,
    pub j_lr: f64,
    /// `(L, S_half)`
    pub points: Vec<(usize, f64)>,
}

impl EntropyScalingSeries {
    pub fn validate(&self) -> AnalysisResult<()> {
        if self.points.len() < MIN_SERIES_POINTS {
            return Err(AnalysisError::InsufficientPoints { need: MIN_SERIES_POINTS, got: self.points.len() });
        }
        if self.points[0].0 < MIN_SERIES_LENGTH || self.points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(AnalysisError::InvalidLengths);
        }
        if let Some(&(l, _)) = self.points.iter().find(|p| !p.1.is_finite()) {
            return Err(AnalysisError::NonFinite(l));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CentralChargeFit {
    pub c: f64,
    pub offset: f64,
    /// RMS deviation of the data from the fitted line.
    pub residual: f64,
    /// Half-width of the central 95% bootstrap interval of c.
    pub ci_halfwidth: f64,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PhaseLabel {
    FM,
    TLL,
    #[serde(rename = "XY_SSB")]
    XySsb,
    Boundary,
}

impl std::fmt::Display for PhaseLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PhaseLabel::FM => "FM",
            PhaseLabel::TLL => "TLL",
            PhaseLabel::XySsb => "XY_SSB",
            PhaseLabel::Boundary => "Boundary",
        })
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderParameters {
    /// Mean |⟨σᶻᵢ⟩| over the middle half of the chain.
    pub sigma_z_mean: f64,
    /// ⟨S⁺S⁻⟩ between the two ends of the bulk window.
    pub xy_plateau: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub alpha: f64,
    pub j_lr: f64,
    pub c_fit: CentralChargeFit,
    pub sigma_z_mean: f64,
    pub xy_plateau: f64,
    pub label: PhaseLabel,
}

impl PhasePoint {
    pub fn new(alpha: f64, j_lr: f64, c_fit: CentralChargeFit, order: OrderParameters) -> Self {
        let label = classify_phase(c_fit.c, order.sigma_z_mean);
        Self { alpha, j_lr, c_fit, sigma_z_mean: order.sigma_z_mean, xy_plateau: order.xy_plateau, label }
    }
}

/// Least-squares line through `(x, y)`: `(slope, intercept, rms residual)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - slope * a - intercept).powi(2)).sum();
    (slope, intercept, (rss / n).sqrt())
}

/// Fits `S = (c/6) ln L + offset`.
pub fn fit_central_charge(series: &EntropyScalingSeries) -> AnalysisResult<CentralChargeFit> {
    series.validate()?;
    let x: Vec<f64> = series.points.iter().map(|p| (p.0 as f64).ln()).collect();
    let y: Vec<f64> = series.points.iter().map(|p| p.1).collect();
    let (slope, offset, residual) = linear_fit(&x, &y);

    let mut rng = ChaCha8Rng::seed_from_u64(BOOTSTRAP_SEED);
    let n = x.len();
    let mut cs = Vec::with_capacity(BOOTSTRAP_SAMPLES);
    while cs.len() < BOOTSTRAP_SAMPLES && n > 2 {
        let idx: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
        if idx.iter().all(|&i| x[i] == x[idx[0]]) {
            continue;
        }
        let bx: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
        let by: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
        cs.push(6.0 * linear_fit(&bx, &by).0);
    }
    let ci_halfwidth = if cs.is_empty() {
        0.0
    } else {
        cs.sort_by(f64::total_cmp);
        let q = |p: f64| cs[((cs.len() - 1) as f64 * p).round() as usize];
        0.5 * (q(0.975) - q(0.025))
    };
    Ok(CentralChargeFit { c: 6.0 * slope, offset, residual, ci_halfwidth })
}

/// Order parameters from a site profile and a correlation accessor.
pub fn order_parameters<F>(sigma_z: &[f64], pm: F) -> OrderParameters
where
    F: Fn(usize, usize) -> f64,
{
    let n = sigma_z.len();
    let (lo, hi) = bulk_window(n);
    let sigma_z_mean = sigma_z[lo..hi].iter().map(|z| z.abs()).sum::<f64>() / (hi - lo) as f64;
    let xy_plateau = if hi - lo >= 2 { pm(lo, hi - 1) } else { 0.0 };
    OrderParameters { sigma_z_mean, xy_plateau }
}

pub fn order_parameters_ed(c: &Correlators) -> OrderParameters {
    order_parameters(&c.sigma_z, |i, j| c.pm[[i, j]])
}

pub fn order_parameters_mps(mps: &Mps) -> OrderParameters {
    order_parameters(&mps.sigma_z_profile(), |i, j| mps.pm_correlation(i, j))
}

/// Middle half of an `n`-site chain as a half-open range, at least one site.
pub fn bulk_window(n: usize) -> (usize, usize) {
    let lo = n / 4;
    let hi = (n - n / 4).max(lo + 1).min(n);
    (lo, hi)
}

/// Phase label from the effective central charge and bulk polarization.
pub fn classify_phase(c: f64, sigma_z_mean: f64) -> PhaseLabel {
    if sigma_z_mean > SIGMA_Z_FM && c <= C_FM_THRESHOLD {
        PhaseLabel::FM
    } else if c > 1.0 + C_MARGIN {
        PhaseLabel::XySsb
    } else if (c - 1.0).abs() <= C_MARGIN && sigma_z_mean < SIGMA_Z_SMALL {
        PhaseLabel::TLL
    } else {
        PhaseLabel::Boundary
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(c: f64, b: f64, ls: &[usize]) -> EntropyScalingSeries {
        EntropyScalingSeries {
            alpha: 1.0,
            j_lr: 0.0,
            points: ls.iter().map(|&l| (l, c / 6.0 * (l as f64).ln() + b)).collect(),
        }
    }

    #[test]
    fn fit_recovers_generator() {
        for &c0 in &[0.0, 0.5, 1.0, 1.5, 2.0] {
            let fit = fit_central_charge(&synthetic(c0, 0.3, &[16, 24, 32, 48, 64])).unwrap();
            assert!((fit.c - c0).abs() < 1e-8);
            assert!((fit.offset - 0.3).abs() < 1e-8);
            assert!(fit.residual < 1e-10);
            assert!(fit.ci_halfwidth < 1e-8);
        }
        let fit = fit_central_charge(&synthetic(1.0, 0.0, &[16, 32])).unwrap();
        assert!((fit.c - 1.0).abs() < 1e-10 && fit.offset.abs() < 1e-10);
    }

    #[test]
    fn bad_series_rejected() {
        let one = synthetic(1.0, 0.0, &[16]);
        assert!(matches!(fit_central_charge(&one), Err(AnalysisError::InsufficientPoints { .. })));
        let unsorted = synthetic(1.0, 0.0, &[32, 16]);
        assert_eq!(fit_central_charge(&unsorted), Err(AnalysisError::InvalidLengths));
        let short = synthetic(1.0, 0.0, &[4, 16]);
        assert_eq!(fit_central_charge(&short), Err(AnalysisError::InvalidLengths));
        let mut nan = synthetic(1.0, 0.0, &[16, 32]);
        nan.points[1].1 = f64::NAN;
        assert_eq!(fit_central_charge(&nan), Err(AnalysisError::NonFinite(32)));
    }

    #[test]
    fn noisy_fit_has_interval() {
        let mut s = synthetic(1.0, 0.2, &[16, 24, 32, 48, 64]);
        for (k, p) in s.points.iter_mut().enumerate() {
            p.1 += if k % 2 == 0 { 0.01 } else { -0.01 };
        }
        let fit = fit_central_charge(&s).unwrap();
        assert!((fit.c - 1.0).abs() < 0.2);
        assert!(fit.residual > 0.0 && fit.ci_halfwidth > 0.0);
        assert_eq!(fit_central_charge(&s).unwrap(), fit);
    }

    #[test]
    fn classification_rules() {
        assert_eq!(classify_phase(0.0, 1.0), PhaseLabel::FM);
        assert_eq!(classify_phase(1.05, 0.0), PhaseLabel::TLL);
        assert_eq!(classify_phase(1.6, 0.0), PhaseLabel::XySsb);
        assert_eq!(classify_phase(0.6, 0.0), PhaseLabel::Boundary);
        assert_eq!(classify_phase(0.1, 0.3), PhaseLabel::Boundary);
    }

    #[test]
    fn bulk_window_is_middle_half() {
        assert_eq!(bulk_window(16), (4, 12));
        assert_eq!(bulk_window(10), (2, 8));
        assert_eq!(bulk_window(2), (0, 2));
        assert_eq!(bulk_window(1), (0, 1));
    }

    #[test]
    fn polarized_order_parameters() {
        let op = order_parameters(&[1.0; 8], |_, _| 0.0);
        assert_eq!(op, OrderParameters { sigma_z_mean: 1.0, xy_plateau: 0.0 });
    }
}
