//! Linear spin-wave theory about the two classical vacua.
//!
//! * z-polarized vacuum: Holstein-Primakoff magnons with dispersion
//!   `ω_k = 1 − α cos θ_k + (J/N) Σ_{r=1}^{N/2} cos(θ_k r)`, θ_k = 2πk/N.
//!   The vacuum is stable while `min_k ω_k ≥ 0`.
//! * x-polarized vacuum: a quadratic boson Hamiltonian with normal part ω_k
//!   and anomalous (pairing) part μ_k, diagonalized by a Bogoliubov rotation
//!   to `E_k = 2√(ω_k² − μ_k²)`. The density of excitations carried by the
//!   vacuum, `(1/2N) Σ_{k≠0} ([1 − μ_k²/ω_k²]^{−1/2} − 1)`, grows like ln N
//!   when the transverse order is only quasi-long-ranged.
//!
//! All momenta are integer mode indices `k ∈ (−N/2, N/2]` on a periodic ring
//! of even length.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Boundary, ModelParams};

/// Stability tolerance on the lowest mode energy.
pub const STABILITY_TOL: f64 = 1e-12;
/// Fitted ln N slope of the excitation density above which it is called
/// log-divergent.
pub const LOG_SLOPE_THRESHOLD: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpinWaveError {
    #[error("spin-wave formulas need an even periodic ring, got N={n_sites} ({boundary:?})")]
    InvalidParams { n_sites: usize, boundary: Boundary },
    #[error("mode k={k} at N={n_sites} has ω² < μ² (ω={omega}, μ={mu})")]
    ModeInstability { n_sites: usize, k: i64, omega: f64, mu: f64 },
    #[error("need at least two even sizes in increasing order to fit the density series")]
    BadSizeList,
    #[error("x-polarized expansion is invalid at α={alpha}, J={j_lr}: {reason}")]
    Unclassifiable { alpha: f64, j_lr: f64, reason: String },
}

pub type SpinWaveResult<T> = Result<T, SpinWaveError>;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Vacuum {
    #[serde(rename = "FM_z")]
    FmZ,
    #[serde(rename = "XY_x")]
    XyX,
}

/// Quasiparticle energy of a Bogoliubov mode, or a marker when the
/// expansion breaks down.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum BogoliubovEnergy {
    Real(f64),
    Unstable { omega: f64, mu: f64 },
}

impl BogoliubovEnergy {
    pub fn value(&self) -> Option<f64> {
        match *self {
            Self::Real(e) => Some(e),
            Self::Unstable { .. } => None,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub k: i64,
    pub omega: f64,
    pub mu: f64,
    /// `None` flags ω² < μ².
    pub energy: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinWaveSpectrum {
    pub params: ModelParams,
    pub vacuum: Vacuum,
    pub modes: Vec<Mode>,
    /// Lowest real mode energy.
    pub min_energy: f64,
    pub unstable_modes: usize,
    pub stable: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityClass {
    Convergent,
    LogDivergent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExcitationDensityResult {
    /// Density at the largest N when convergent; `None` marks divergence.
    pub value: Option<f64>,
    pub finite_n_series: Vec<(usize, f64)>,
    /// Slope of density against ln N over the largest decade of sizes.
    pub log_slope: f64,
    pub classification: DensityClass,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpinWavePhase {
    FM,
    TLL,
    #[serde(rename = "XY_SSB")]
    XySsb,
}

fn check_ring(p: &ModelParams) -> SpinWaveResult<()> {
    if p.boundary != Boundary::Periodic || !p.n_sites.is_multiple_of(2) || p.n_sites < 2 {
        return Err(SpinWaveError::InvalidParams { n_sites: p.n_sites, boundary: p.boundary });
    }
    Ok(())
}

/// Single-cover Brillouin zone `−N/2+1 ..= N/2`.
pub fn brillouin_zone(n_sites: usize) -> impl Iterator<Item = i64> {
    let half = (n_sites / 2) as i64;
    (1 - half)..=half
}

/// Σ_{r=1}^{N/2} cos(2πk r/N), summed directly.
pub fn long_range_sum(n_sites: usize, k: i64) -> f64 {
    let theta = 2.0 * PI * k as f64 / n_sites as f64;
    (1..=n_sites / 2).map(|r| (theta * r as f64).cos()).sum()
}

fn theta(n_sites: usize, k: i64) -> f64 {
    2.0 * PI * k as f64 / n_sites as f64
}

pub fn fm_dispersion(p: &ModelParams, k: i64) -> SpinWaveResult<f64> {
    check_ring(p)?;
    let n = p.n_sites;
    Ok(1.0 - p.alpha * theta(n, k).cos() + p.j_lr / n as f64 * long_range_sum(n, k))
}

pub fn fm_spectrum(p: &ModelParams) -> SpinWaveResult<SpinWaveSpectrum> {
    check_ring(p)?;
    let modes: Vec<Mode> = brillouin_zone(p.n_sites)
        .map(|k| {
            let w = fm_dispersion(p, k).unwrap();
            Mode { k, omega: w, mu: 0.0, energy: Some(w) }
        })
        .collect();
    let min_energy = modes.iter().map(|m| m.omega).fold(f64::INFINITY, f64::min);
    Ok(SpinWaveSpectrum {
        params: *p,
        vacuum: Vacuum::FmZ,
        modes,
        min_energy,
        unstable_modes: 0,
        stable: min_energy >= -STABILITY_TOL,
    })
}

/// Lowest magnon energy about the z-polarized state and whether it is
/// non-negative.
pub fn fm_stability(p: &ModelParams) -> SpinWaveResult<(f64, bool)> {
    let s = fm_spectrum(p)?;
    Ok((s.min_energy, s.stable))
}

/// Anisotropy α* at which the z-polarized vacuum loses stability in the
/// thermodynamic limit.
pub fn fm_phase_boundary(j_lr: f64) -> f64 {
    if j_lr >= 0.0 {
        1.0
    } else {
        1.0 + 0.5 * j_lr
    }
}

/// Root in α of `min_k ω_k` at fixed J and N, by bisection on `[lo, hi]`.
pub fn fm_stability_root(j_lr: f64, n_sites: usize, lo: f64, hi: f64) -> SpinWaveResult<f64> {
    let f = |a: f64| -> SpinWaveResult<f64> {
        Ok(fm_stability(&ModelParams::periodic(a, j_lr, n_sites).map_err(|_| {
            SpinWaveError::InvalidParams { n_sites, boundary: Boundary::Periodic }
        })?)?
        .0)
    };
    let (mut a, mut b) = (lo, hi);
    let (fa, fb) = (f(a)?, f(b)?);
    assert!(fa * fb <= 0.0, "root not bracketed: f({a})={fa}, f({b})={fb}");
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if f(m)? > 0.0 {
            a = m;
        } else {
            b = m;
        }
        if b - a < 1e-14 {
            break;
        }
    }
    Ok(0.5 * (a + b))
}

/// Normal and anomalous coefficients (ω_k, μ_k) about the x-polarized vacuum.
pub fn xy_coefficients(p: &ModelParams, k: i64) -> SpinWaveResult<(f64, f64)> {
    check_ring(p)?;
    let n = p.n_sites;
    let c = theta(n, k).cos();
    let lr = p.j_lr / (2.0 * n as f64) * long_range_sum(n, k);
    let omega = (p.alpha - 0.5 * p.j_lr) - 0.5 * (1.0 + p.alpha) * c + lr;
    let mu = 0.5 * (1.0 - p.alpha) * c - lr;
    Ok((omega, mu))
}

pub fn bogoliubov_energy(omega: f64, mu: f64) -> BogoliubovEnergy {
    let d = omega * omega - mu * mu;
    if d >= 0.0 {
        BogoliubovEnergy::Real(2.0 * d.sqrt())
    } else {
        BogoliubovEnergy::Unstable { omega, mu }
    }
}

pub fn xy_spectrum(p: &ModelParams) -> SpinWaveResult<SpinWaveSpectrum> {
    check_ring(p)?;
    let modes: Vec<Mode> = brillouin_zone(p.n_sites)
        .map(|k| {
            let (omega, mu) = xy_coefficients(p, k).unwrap();
            Mode { k, omega, mu, energy: bogoliubov_energy(omega, mu).value() }
        })
        .collect();
    let unstable_modes = modes.iter().filter(|m| m.energy.is_none()).count();
    let min_energy = modes.iter().filter_map(|m| m.energy).fold(f64::INFINITY, f64::min);
    Ok(SpinWaveSpectrum {
        params: *p,
        vacuum: Vacuum::XyX,
        modes,
        min_energy,
        unstable_modes,
        stable: unstable_modes == 0 && min_energy >= -STABILITY_TOL,
    })
}

/// `(1/2N) Σ_{k≠0} ([1 − μ_k²/ω_k²]^{−1/2} − 1)` on an N-site ring.
pub fn finite_size_density(alpha: f64, j_lr: f64, n_sites: usize) -> SpinWaveResult<f64> {
    let p = ModelParams::periodic(alpha, j_lr, n_sites)
        .map_err(|_| SpinWaveError::InvalidParams { n_sites, boundary: Boundary::Periodic })?;
    check_ring(&p)?;
    let mut sum = 0.0;
    for k in brillouin_zone(n_sites).filter(|&k| k != 0) {
        let (omega, mu) = xy_coefficients(&p, k)?;
        let x = 1.0 - (mu * mu) / (omega * omega);
        if !(x > 0.0) {
            return Err(SpinWaveError::ModeInstability { n_sites, k, omega, mu });
        }
        sum += x.powf(-0.5) - 1.0;
    }
    Ok(sum / (2.0 * n_sites as f64))
}

/// Default size ladder 64, 128, …, 4096.
pub fn default_density_sizes() -> Vec<usize> {
    (6..=12).map(|e| 1usize << e).collect()
}

/// Evaluates the density on every size of `n_list` and classifies its growth
/// from a least-squares fit `d_N = a ln N + b` over the largest decade of N.
pub fn excitation_density(alpha: f64, j_lr: f64, n_list: &[usize]) -> SpinWaveResult<ExcitationDensityResult> {
    if n_list.len() < 2 || n_list.windows(2).any(|w| w[1] <= w[0]) || n_list.iter().any(|n| n % 2 != 0) {
        return Err(SpinWaveError::BadSizeList);
    }
    let series = n_list
        .iter()
        .map(|&n| finite_size_density(alpha, j_lr, n).map(|d| (n, d)))
        .collect::<SpinWaveResult<Vec<_>>>()?;
    let n_max = *n_list.last().unwrap() as f64;
    let mut window: Vec<(f64, f64)> = series
        .iter()
        .filter(|(n, _)| *n as f64 >= n_max / 10.0)
        .map(|&(n, d)| ((n as f64).ln(), d))
        .collect();
    if window.len() < 2 {
        window = series.iter().rev().take(2).map(|&(n, d)| ((n as f64).ln(), d)).collect();
    }
    let log_slope = least_squares_slope(&window);
    let classification =
        if log_slope > LOG_SLOPE_THRESHOLD { DensityClass::LogDivergent } else { DensityClass::Convergent };
    let value = match classification {
        DensityClass::Convergent => Some(series.last().unwrap().1),
        DensityClass::LogDivergent => None,
    };
    Ok(ExcitationDensityResult { value, finite_n_series: series, log_slope, classification })
}

fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Thermodynamic-limit integrand 𝓘(q) = [1 − μ(q)²/ω(q)²]^{−1/2} − 1.
///
/// For q ≠ 0 the long-range r-sum contributes only O(1/N) and drops out,
/// leaving ω(q) = (α − J/2) − (1+α)/2 cos q and μ(q) = (1−α)/2 cos q.
/// Returns `None` where ω² ≤ μ².
pub fn density_integrand(alpha: f64, j_lr: f64, q: f64) -> Option<f64> {
    let c = q.cos();
    let omega = (alpha - 0.5 * j_lr) - 0.5 * (1.0 + alpha) * c;
    let mu = 0.5 * (1.0 - alpha) * c;
    let x = 1.0 - mu * mu / (omega * omega);
    (x > 0.0).then(|| x.powf(-0.5) - 1.0)
}

/// Log-log slope of 𝓘(q) over `q ∈ [q_lo, q_hi]`, from `n_points`
/// logarithmically spaced samples.
pub fn integrand_loglog_slope(alpha: f64, j_lr: f64, q_lo: f64, q_hi: f64, n_points: usize) -> Option<f64> {
    let mut pts = Vec::with_capacity(n_points);
    for i in 0..n_points {
        let t = i as f64 / (n_points - 1) as f64;
        let q = (q_lo.ln() + t * (q_hi.ln() - q_lo.ln())).exp();
        let v = density_integrand(alpha, j_lr, q)?;
        if v <= 0.0 {
            return None;
        }
        pts.push((q.ln(), v.ln()));
    }
    Some(least_squares_slope(&pts))
}

/// Phase predicted by spin-wave theory: FM below the z-vacuum stability
/// boundary, TLL at J = 0, and U(1)-broken XY where the x-vacuum excitation
/// density stays finite.
pub fn classify_spinwave(alpha: f64, j_lr: f64) -> SpinWaveResult<SpinWavePhase> {
    if alpha <= fm_phase_boundary(j_lr) {
        return Ok(SpinWavePhase::FM);
    }
    if j_lr == 0.0 {
        return Ok(SpinWavePhase::TLL);
    }
    match excitation_density(alpha, j_lr, &default_density_sizes()) {
        Ok(r) => Ok(match r.classification {
            DensityClass::Convergent => SpinWavePhase::XySsb,
            DensityClass::LogDivergent => SpinWavePhase::TLL,
        }),
        Err(e @ SpinWaveError::ModeInstability { .. }) => {
            Err(SpinWaveError::Unclassifiable { alpha, j_lr, reason: e.to_string() })
        }
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring(a: f64, j: f64, n: usize) -> ModelParams {
        ModelParams::periodic(a, j, n).unwrap()
    }

    /// Closed form of Σ_{r=1}^{M} cos(rθ) via the Dirichlet kernel.
    fn geometric_sum(n: usize, k: i64) -> f64 {
        let m = (n / 2) as f64;
        let th = theta(n, k);
        if (th / (2.0 * PI)).fract().abs() < 1e-15 {
            return m;
        }
        ((m + 0.5) * th).sin() / (2.0 * (0.5 * th).sin()) - 0.5
    }

    #[test]
    fn long_range_sum_matches_closed_form() {
        for &n in &[2usize, 4, 6, 10, 64, 100, 1000, 4096] {
            for k in brillouin_zone(n) {
                let d = long_range_sum(n, k);
                let g = geometric_sum(n, k);
                assert!((d - g).abs() < 1e-10, "n={n} k={k}: {d} vs {g}");
            }
        }
    }

    #[test]
    fn fm_dispersion_values() {
        for &(a, j) in &[(0.3, 0.0), (1.2, 0.7), (0.9, -1.5)] {
            let w0 = fm_dispersion(&ring(a, j, 32), 0).unwrap();
            assert!((w0 - (1.0 - a + j / 2.0)).abs() < 1e-12);
        }
        assert!(fm_dispersion(&ring(1.0, 0.0, 16), 0).unwrap().abs() < 1e-15);
        for k in brillouin_zone(20) {
            assert!((fm_dispersion(&ring(0.0, 0.0, 20), k).unwrap() - 1.0).abs() < 1e-15);
            let p = ring(0.7, 0.0, 20);
            assert!((fm_dispersion(&p, k).unwrap() - (1.0 - 0.7 * theta(20, k).cos())).abs() < 1e-15);
        }
    }

    #[test]
    fn odd_or_open_chains_rejected() {
        assert!(matches!(fm_dispersion(&ring(1.0, 0.0, 7), 0), Err(SpinWaveError::InvalidParams { .. })));
        let open = ModelParams::new(1.0, 0.0, 8).unwrap();
        assert!(xy_coefficients(&open, 1).is_err());
    }

    #[test]
    fn fm_stability_examples() {
        assert!(fm_stability(&ring(0.9, 1.0, 512)).unwrap().1);
        assert!(!fm_stability(&ring(1.1, 1.0, 512)).unwrap().1);
        assert!(!fm_stability(&ring(0.8, -0.6, 512)).unwrap().1);
        assert!(fm_stability(&ring(0.6, -0.6, 512)).unwrap().1);
    }

    #[test]
    fn phase_boundary_branches() {
        assert_eq!(fm_phase_boundary(2.0), 1.0);
        assert_eq!(fm_phase_boundary(-1.0), 0.5);
        assert_eq!(fm_phase_boundary(0.0), 1.0);
        assert!((fm_phase_boundary(-1e-12) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn xy_coefficient_values() {
        for k in brillouin_zone(24) {
            let (w, m) = xy_coefficients(&ring(1.0, 0.0, 24), k).unwrap();
            assert_eq!(m, 0.0);
            assert!((w - (1.0 - theta(24, k).cos())).abs() < 1e-15);
        }
        for &(a, j) in &[(1.5, 0.5), (2.0, -1.0)] {
            let (w, m) = xy_coefficients(&ring(a, j, 40), 0).unwrap();
            assert!((w - ((a - 1.0) / 2.0 - j / 4.0)).abs() < 1e-12);
            assert!((m - ((1.0 - a) / 2.0 - j / 4.0)).abs() < 1e-12);
        }
        // α=2, J=1, N=100, k=1 against an independent loop over the r-sum
        let (w, m) = xy_coefficients(&ring(2.0, 1.0, 100), 1).unwrap();
        let mut rs = 0.0;
        for r in 1..=50 {
            rs += (2.0 * PI * r as f64 / 100.0).cos();
        }
        let c = (2.0 * PI / 100.0).cos();
        assert!((w - (1.5 - 1.5 * c + rs / 200.0)).abs() < 1e-12);
        assert!((m - (-0.5 * c - rs / 200.0)).abs() < 1e-12);
    }

    #[test]
    fn bogoliubov_examples() {
        assert_eq!(bogoliubov_energy(1.5, 0.0), BogoliubovEnergy::Real(3.0));
        assert_eq!(bogoliubov_energy(0.7, 0.7), BogoliubovEnergy::Real(0.0));
        assert_eq!(bogoliubov_energy(5.0, 3.0), BogoliubovEnergy::Real(8.0));
        assert!(matches!(bogoliubov_energy(1.0, 2.0), BogoliubovEnergy::Unstable { .. }));
    }

    #[test]
    fn spectra_cover_zone_once() {
        let s = xy_spectrum(&ring(1.5, 0.0, 16)).unwrap();
        let ks: Vec<i64> = s.modes.iter().map(|m| m.k).collect();
        assert_eq!(ks, (-7..=8).collect::<Vec<_>>());
        let f = fm_spectrum(&ring(0.5, 0.0, 16)).unwrap();
        assert!(f.stable && f.modes.iter().all(|m| m.mu == 0.0 && m.energy == Some(m.omega)));
    }

    #[test]
    fn unstable_modes_are_flagged() {
        let s = xy_spectrum(&ring(1.5, 0.5, 64)).unwrap();
        assert!(s.unstable_modes > 0);
        assert!(!s.stable);
        assert_eq!(s.modes.len(), 64);
    }

    #[test]
    fn isotropic_point_has_zero_density() {
        let r = excitation_density(1.0, 0.0, &default_density_sizes()).unwrap();
        assert!(r.finite_n_series.iter().all(|&(_, d)| d == 0.0));
        assert_eq!(r.classification, DensityClass::Convergent);
    }

    #[test]
    fn density_dichotomy() {
        let tll = excitation_density(1.5, 0.0, &default_density_sizes()).unwrap();
        assert_eq!(tll.classification, DensityClass::LogDivergent);
        assert!(tll.value.is_none());
        // the ferromagnetic long-range sign gaps the q → 0 modes
        let ssb = excitation_density(1.5, -0.5, &default_density_sizes()).unwrap();
        assert_eq!(ssb.classification, DensityClass::Convergent);
        assert!(ssb.log_slope.abs() < 0.005);
    }

    #[test]
    fn bad_size_lists() {
        assert_eq!(excitation_density(1.5, 0.0, &[64]), Err(SpinWaveError::BadSizeList));
        assert_eq!(excitation_density(1.5, 0.0, &[128, 64]), Err(SpinWaveError::BadSizeList));
        assert_eq!(excitation_density(1.5, 0.0, &[63, 128]), Err(SpinWaveError::BadSizeList));
    }

    #[test]
    fn integrand_small_q_scaling() {
        let s = integrand_loglog_slope(1.5, 0.0, 1e-4, 1e-2, 20).unwrap();
        assert!((s + 1.0).abs() < 0.05, "slope {s}");
        // gapped case: bounded as q → 0
        let a = density_integrand(1.5, -0.5, 1e-6).unwrap();
        let b = density_integrand(1.5, -0.5, 1e-3).unwrap();
        assert!(a.is_finite() && (a - b).abs() < 1e-3);
    }

    #[test]
    fn classification() {
        assert_eq!(classify_spinwave(0.5, 1.0).unwrap(), SpinWavePhase::FM);
        assert_eq!(classify_spinwave(1.5, 0.0).unwrap(), SpinWavePhase::TLL);
        assert_eq!(classify_spinwave(1.5, -0.5).unwrap(), SpinWavePhase::XySsb);
        assert_eq!(classify_spinwave(1.0, 0.0).unwrap(), SpinWavePhase::FM);
        assert_eq!(classify_spinwave(1.0 + 1e-9, 0.0).unwrap(), SpinWavePhase::TLL);
    }
}
