//! Cavity-QED realization: effective chain parameters from the atom-cavity
//! couplings, and small-N Lindblad integrators for the full spin-cavity
//! system and for the spin-only model left after eliminating the cavity.
//!
//! Rates are given in angular-frequency units. Internally every rate is
//! divided by |J_z| and time is the dimensionless τ = |J_z|·t.

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAX_FULL_SITES: usize = 4;
pub const MAX_PHOTONS: usize = 8;
pub const MAX_EFFECTIVE_SITES: usize = 6;
pub const TRACE_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CavityError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("trace drifted by {0:e} even after halving the step")]
    TraceDrift(f64),
    #[error("trajectories have different time grids")]
    GridMismatch,
}

pub type CavityResult<T> = Result<T, CavityError>;

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CavityParams {
    pub g: f64,
    pub delta_c: f64,
    pub kappa: f64,
    pub j_xx: f64,
    pub j_z: f64,
    pub n_sites: usize,
}

impl CavityParams {
    pub fn validate(&self) -> CavityResult<()> {
        let bad = |m: &str| Err(CavityError::InvalidParams(m.to_string()));
        if [self.g, self.delta_c, self.kappa, self.j_xx, self.j_z].iter().any(|x| !x.is_finite()) {
            return bad("parameters must be finite");
        }
        if self.kappa <= 0.0 {
            return bad("kappa must be positive");
        }
        if self.j_z == 0.0 {
            return bad("j_z must be non-zero");
        }
        if self.n_sites == 0 {
            return bad("n_sites must be positive");
        }
        Ok(())
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveParams {
    /// J_xx / J_z
    pub alpha: f64,
    /// Long-range coupling per pair in chain units, 4g²/(Δ_c J_z).
    pub j_over_n: f64,
    /// Prefactor 4g²Δ_c/(4Δ_c² + κ²) of the cavity-mediated flip-flop term.
    pub coherent_coupling: f64,
    /// Prefactor 2g²κ/(4Δ_c² + κ²) of the collective dissipator.
    pub gamma_collective: f64,
    /// Δ_c/(κ/2); large values mean nearly unitary spin dynamics.
    pub unitarity_ratio: f64,
    /// κ/g; large values mean the bad-cavity limit.
    pub bad_cavity_ratio: f64,
}

pub fn effective_params(cp: &CavityParams) -> CavityResult<EffectiveParams> {
    cp.validate()?;
    let g2 = cp.g * cp.g;
    let den = 4.0 * cp.delta_c * cp.delta_c + cp.kappa * cp.kappa;
    let j_over_n = if cp.delta_c == 0.0 { f64::INFINITY } else { 4.0 * g2 / (cp.delta_c * cp.j_z) };
    Ok(EffectiveParams {
        alpha: cp.j_xx / cp.j_z,
        j_over_n,
        coherent_coupling: 4.0 * g2 * cp.delta_c / den,
        gamma_collective: 2.0 * g2 * cp.kappa / den,
        unitarity_ratio: cp.delta_c / (0.5 * cp.kappa),
        bad_cavity_ratio: if cp.g == 0.0 { f64::INFINITY } else { cp.kappa / cp.g.abs() },
    })
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    /// Final dimensionless time.
    pub t_end: f64,
    pub dt: f64,
    /// Record observables every this many steps.
    pub record_every: usize,
}

impl TimeGrid {
    fn validate(&self) -> CavityResult<()> {
        if !(self.dt > 0.0 && self.t_end >= 0.0 && self.record_every > 0) {
            return Err(CavityError::InvalidParams("time grid needs dt > 0, t_end ≥ 0, record_every > 0".into()));
        }
        Ok(())
    }

    fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    fn halved(&self) -> Self {
        Self { t_end: self.t_end, dt: self.dt / 2.0, record_every: self.record_every * 2 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// `sigma_z[k][i]` = ⟨σᶻᵢ⟩ at `times[k]`.
    pub sigma_z: Vec<Vec<f64>>,
    /// ⟨a†a⟩, only for the full model.
    pub photon_number: Option<Vec<f64>>,
    /// |Tr ρ − 1| at each record.
    pub trace_error: Vec<f64>,
    /// Largest anti-Hermitian entry of ρ seen at a record.
    pub max_hermiticity_error: f64,
    #[serde(skip)]
    pub final_state: Array2<Complex64>,
    /// Spin dimension and photon levels of `final_state`.
    pub spin_dim: usize,
    pub photon_levels: usize,
}

impl Trajectory {
    /// Spin density matrix at the final time, with the cavity traced out.
    pub fn final_spin_state(&self) -> Array2<Complex64> {
        let ds = self.spin_dim;
        let mut out = Array2::<Complex64>::zeros((ds, ds));
        for n in 0..self.photon_levels {
            for a in 0..ds {
                for b in 0..ds {
                    out[[a, b]] += self.final_state[[n * ds + a, n * ds + b]];
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryDeviation {
    pub times: Vec<f64>,
    /// Largest |Δ⟨σᶻᵢ⟩| over time, per site.
    pub max_sigma_z: Vec<f64>,
    /// Largest |Δ⟨σᶻ⟩| over sites at each time.
    pub per_time: Vec<f64>,
    pub max_abs_deviation: f64,
}

pub fn compare_trajectories(a: &Trajectory, b: &Trajectory) -> CavityResult<TrajectoryDeviation> {
    let same_grid = a.times.len() == b.times.len()
        && a.times.iter().zip(&b.times).all(|(x, y)| (x - y).abs() <= 1e-12 * (1.0 + x.abs()))
        && a.sigma_z.first().map(Vec::len) == b.sigma_z.first().map(Vec::len);
    if !same_grid {
        return Err(CavityError::GridMismatch);
    }
    let n = a.sigma_z.first().map_or(0, Vec::len);
    let mut max_sigma_z = vec![0.0f64; n];
    let mut per_time = Vec::with_capacity(a.times.len());
    for (ra, rb) in a.sigma_z.iter().zip(&b.sigma_z) {
        let mut worst = 0.0f64;
        for i in 0..n {
            let d = (ra[i] - rb[i]).abs();
            max_sigma_z[i] = max_sigma_z[i].max(d);
            worst = worst.max(d);
        }
        per_time.push(worst);
    }
    let max_abs_deviation = per_time.iter().copied().fold(0.0, f64::max);
    Ok(TrajectoryDeviation { times: a.times.clone(), max_sigma_z, per_time, max_abs_deviation })
}

/// Real sparse matrix as a list of non-zero entries.
#[derive(Clone, Debug, Default)]
struct Sparse {
    entries: Vec<(usize, usize, f64)>,
}

impl Sparse {
    fn push(&mut self, r: usize, c: usize, v: f64) {
        if v != 0.0 {
            self.entries.push((r, c, v));
        }
    }

    fn transpose(&self) -> Sparse {
        Sparse { entries: self.entries.iter().map(|&(r, c, v)| (c, r, v)).collect() }
    }

    /// `out += coef · S · x`
    fn left_acc(&self, coef: Complex64, x: &Array2<Complex64>, out: &mut Array2<Complex64>) {
        for &(r, c, v) in &self.entries {
            let f = coef * v;
            let src = x.row(c);
            let mut dst = out.row_mut(r);
            dst.zip_mut_with(&src, |d, s| *d += f * s);
        }
    }

    /// `out += coef · x · S`
    fn right_acc(&self, coef: Complex64, x: &Array2<Complex64>, out: &mut Array2<Complex64>) {
        for &(r, c, v) in &self.entries {
            let f = coef * v;
            let src = x.column(r);
            let mut dst = out.column_mut(c);
            dst.zip_mut_with(&src, |d, s| *d += f * s);
        }
    }

    /// `S · x · Sᵀ`
    fn sandwich(&self, x: &Array2<Complex64>, dim: usize) -> Array2<Complex64> {
        let mut tmp = Array2::<Complex64>::zeros((dim, dim));
        self.left_acc(Complex64::new(1.0, 0.0), x, &mut tmp);
        let mut out = Array2::<Complex64>::zeros((dim, dim));
        self.transpose().right_acc(Complex64::new(1.0, 0.0), &tmp, &mut out);
        out
    }
}

/// Spin part of the nearest-neighbour chain, rates already scaled.
fn xxz_entries(n: usize, j_xx: f64, j_z: f64, offset: usize, out: &mut Sparse) {
    let dim = 1usize << n;
    for s in 0..dim {
        let mut diag = 0.0;
        for i in 0..n.saturating_sub(1) {
            let (a, b) = ((s >> i) & 1, (s >> (i + 1)) & 1);
            diag += if a == b { -0.25 * j_z } else { 0.25 * j_z };
            if a != b {
                let t = s ^ (0b11 << i);
                out.push(offset + t, offset + s, -0.5 * j_xx);
            }
        }
        out.push(offset + s, offset + s, diag);
    }
}

/// Lindblad generator `−i(Hρ − ρH) + rate·(2LρL† − L†Lρ − ρL†L)` for a real
/// Hamiltonian and a single real jump operator.
struct Lindblad {
    dim: usize,
    h: Sparse,
    jump: Sparse,
    jump_dag_jump: Sparse,
    rate: f64,
}

impl Lindblad {
    fn apply(&self, rho: &Array2<Complex64>) -> Array2<Complex64> {
        let i = Complex64::new(0.0, 1.0);
        let mut out = Array2::<Complex64>::zeros((self.dim, self.dim));
        self.h.left_acc(-i, rho, &mut out);
        self.h.right_acc(i, rho, &mut out);
        if self.rate != 0.0 {
            let r = Complex64::new(self.rate, 0.0);
            self.jump_dag_jump.left_acc(-r, rho, &mut out);
            self.jump_dag_jump.right_acc(-r, rho, &mut out);
            out.scaled_add(Complex64::new(2.0 * self.rate, 0.0), &self.jump.sandwich(rho, self.dim));
        }
        out
    }

    fn rk4_step(&self, rho: &mut Array2<Complex64>, dt: f64) {
        let h = Complex64::new(dt, 0.0);
        let k1 = self.apply(rho);
        let k2 = self.apply(&(&*rho + &(&k1 * (h * 0.5))));
        let k3 = self.apply(&(&*rho + &(&k2 * (h * 0.5))));
        let k4 = self.apply(&(&*rho + &(&k3 * h)));
        let incr = (k1 + &k2 * 2.0 + &k3 * 2.0 + k4) * (h / 6.0);
        *rho += &incr;
    }
}

fn product_state(dim: usize, index: usize) -> Array2<Complex64> {
    let mut rho = Array2::<Complex64>::zeros((dim, dim));
    rho[[index, index]] = Complex64::new(1.0, 0.0);
    rho
}

/// Runs the integrator, recording ⟨σᶻᵢ⟩ from the diagonal. Basis index is
/// `photons · 2^N + spins`.
fn integrate(gen: &Lindblad, mut rho: Array2<Complex64>, n_sites: usize, levels: usize, grid: &TimeGrid) -> Trajectory {
    let ds = 1usize << n_sites;
    let record = |rho: &Array2<Complex64>| {
        let mut sz = vec![0.0; n_sites];
        let mut photons = 0.0;
        let mut trace = 0.0;
        for n in 0..levels {
            for s in 0..ds {
                let p = rho[[n * ds + s, n * ds + s]].re;
                trace += p;
                photons += n as f64 * p;
                for (i, z) in sz.iter_mut().enumerate() {
                    *z += if (s >> i) & 1 == 1 { p } else { -p };
                }
            }
        }
        let herm = rho.iter().zip(rho.t().iter()).map(|(a, b)| (a - b.conj()).norm()).fold(0.0, f64::max);
        (sz, photons, (trace - 1.0).abs(), herm)
    };
    let mut times = Vec::new();
    let mut sigma_z = Vec::new();
    let mut photon_number = Vec::new();
    let mut trace_error = Vec::new();
    let mut max_herm = 0.0f64;
    let steps = grid.steps();
    for step in 0..=steps {
        if step % grid.record_every == 0 {
            let (sz, ph, tr, he) = record(&rho);
            times.push(step as f64 * grid.dt);
            sigma_z.push(sz);
            photon_number.push(ph);
            trace_error.push(tr);
            max_herm = max_herm.max(he);
        }
        if step < steps {
            gen.rk4_step(&mut rho, grid.dt);
        }
    }
    Trajectory {
        times,
        sigma_z,
        photon_number: (levels > 1).then_some(photon_number),
        trace_error,
        max_hermiticity_error: max_herm,
        final_state: rho,
        spin_dim: ds,
        photon_levels: levels,
    }
}

fn with_retry<F>(grid: &TimeGrid, run: F) -> CavityResult<Trajectory>
where
    F: Fn(&TimeGrid) -> Trajectory,
{
    grid.validate()?;
    let first = run(grid);
    let drift = |t: &Trajectory| t.trace_error.iter().copied().fold(0.0, f64::max);
    if drift(&first) <= TRACE_TOL {
        return Ok(first);
    }
    let second = run(&grid.halved());
    let d = drift(&second);
    if d <= TRACE_TOL {
        Ok(second)
    } else {
        Err(CavityError::TraceDrift(d))
    }
}

/// Spin chain plus one lossy cavity mode truncated at `n_max` photons, from
/// the spin configuration `initial_spins` (bit i set = site i up) and the
/// cavity vacuum.
///
/// The cavity term is −Δ_c a†a, so Δ_c > 0 yields the positive
/// cavity-mediated coupling of [`simulate_effective`].
pub fn simulate_full(cp: &CavityParams, n_max: usize, grid: &TimeGrid, initial_spins: u64) -> CavityResult<Trajectory> {
    cp.validate()?;
    let n = cp.n_sites;
    if n > MAX_FULL_SITES || n_max > MAX_PHOTONS {
        return Err(CavityError::InvalidParams(format!(
            "full model limited to {MAX_FULL_SITES} sites and {MAX_PHOTONS} photons"
        )));
    }
    check_initial(n, initial_spins)?;
    let scale = cp.j_z.abs();
    let ds = 1usize << n;
    let levels = n_max + 1;
    let dim = ds * levels;
    let mut h = Sparse::default();
    let mut a = Sparse::default();
    for p in 0..levels {
        xxz_entries(n, cp.j_xx / scale, cp.j_z / scale, p * ds, &mut h);
        for s in 0..ds {
            h.push(p * ds + s, p * ds + s, -cp.delta_c / scale * p as f64);
            if p > 0 {
                a.push((p - 1) * ds + s, p * ds + s, (p as f64).sqrt());
            }
        }
    }
    // g (a† σ⁻ᵢ + a σ⁺ᵢ)
    let gs = cp.g / scale;
    for p in 0..levels - 1 {
        let amp = gs * ((p + 1) as f64).sqrt();
        for s in 0..ds {
            for i in 0..n {
                if (s >> i) & 1 == 1 {
                    let lowered = s ^ (1 << i);
                    h.push((p + 1) * ds + lowered, p * ds + s, amp);
                    h.push(p * ds + s, (p + 1) * ds + lowered, amp);
                }
            }
        }
    }
    let mut ada = Sparse::default();
    for p in 1..levels {
        for s in 0..ds {
            ada.push(p * ds + s, p * ds + s, p as f64);
        }
    }
    let gen = Lindblad { dim, h, jump: a, jump_dag_jump: ada, rate: 0.5 * cp.kappa / scale };
    with_retry(grid, |g| integrate(&gen, product_state(dim, initial_spins as usize), n, levels, g))
}

/// Spin-only model after adiabatic elimination: the cavity-mediated
/// flip-flop term over pairs i ≠ j plus, optionally, the collective decay.
pub fn simulate_effective(
    cp: &CavityParams,
    grid: &TimeGrid,
    include_dissipator: bool,
    initial_spins: u64,
) -> CavityResult<Trajectory> {
    let eff = effective_params(cp)?;
    let n = cp.n_sites;
    if n > MAX_EFFECTIVE_SITES {
        return Err(CavityError::InvalidParams(format!("effective model limited to {MAX_EFFECTIVE_SITES} sites")));
    }
    check_initial(n, initial_spins)?;
    let scale = cp.j_z.abs();
    let dim = 1usize << n;
    let mut h = Sparse::default();
    xxz_entries(n, cp.j_xx / scale, cp.j_z / scale, 0, &mut h);
    let chi = eff.coherent_coupling / scale;
    let mut jump = Sparse::default();
    for s in 0..dim {
        for i in 0..n {
            if (s >> i) & 1 == 1 {
                jump.push(s ^ (1 << i), s, 1.0);
            }
            for j in 0..n {
                // σ⁺ᵢσ⁻ⱼ, i ≠ j
                if i != j && (s >> j) & 1 == 1 && (s >> i) & 1 == 0 {
                    h.push(s ^ (1 << j) ^ (1 << i), s, chi);
                }
            }
        }
    }
    let jdj = sparse_product(&jump.transpose(), &jump, dim);
    let rate = if include_dissipator { eff.gamma_collective / scale } else { 0.0 };
    let gen = Lindblad { dim, h, jump, jump_dag_jump: jdj, rate };
    with_retry(grid, |g| integrate(&gen, product_state(dim, initial_spins as usize), n, 1, g))
}

fn sparse_product(a: &Sparse, b: &Sparse, dim: usize) -> Sparse {
    let mut dense = Array2::<f64>::zeros((dim, dim));
    for &(r, k, x) in &a.entries {
        for &(k2, c, y) in &b.entries {
            if k == k2 {
                dense[[r, c]] += x * y;
            }
        }
    }
    let mut out = Sparse::default();
    for ((r, c), &v) in dense.indexed_iter() {
        out.push(r, c, v);
    }
    out
}

fn check_initial(n: usize, initial: u64) -> CavityResult<()> {
    if n < 64 && initial >> n != 0 {
        return Err(CavityError::InvalidParams(format!("initial configuration {initial:#b} has bits beyond {n} sites")));
    }
    Ok(())
}
