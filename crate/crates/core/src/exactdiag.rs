//! Sector-resolved exact diagonalization for small chains: ground states,
//! cut entanglement entropies and two-point correlators.

use ndarray::Array2;
use ndarray_linalg::{Eigh, SVD, UPLO};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{lowest_eigenpair, LanczosError, LanczosOptions};
use crate::model::{sector_block, ModelError, ModelParams, SectorBasis, SectorOperator};

/// Sectors up to this dimension go through the dense eigensolver in
/// [`Method::Auto`].
pub const AUTO_DENSE_MAX_DIM: usize = 400;
/// Basis states are 64-bit masks; sector dimensions cap practical use far
/// below this.
pub const MAX_SITES: usize = 40;
pub const DENSE_MAX_DIM: usize = 4096;
pub const LANCZOS_MAX_DIM: usize = 200_000;
/// Two sector energies closer than this are reported as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EdError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("Lanczos failed to converge after {0} iterations")]
    NoConvergence(usize),
    #[error("sector dimension {dim} too large for the {method} path (max {max})")]
    SectorTooLarge { dim: usize, max: usize, method: &'static str },
    #[error("n_up = {n_up} is outside 0..={n_sites}")]
    InvalidSector { n_up: usize, n_sites: usize },
    #[error("cut {cut} must lie in 1..={max}")]
    InvalidCut { cut: usize, max: usize },
}

pub type EdResult<T> = Result<T, EdError>;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Default)]
pub enum Method {
    #[default]
    Auto,
    Dense,
    Lanczos { seed: u64 },
}

/// Lowest eigenpair of one total-σᶻ block.
#[derive(Clone, Debug)]
pub struct SectorState {
    pub params: ModelParams,
    pub n_up: usize,
    pub energy: f64,
    pub amplitudes: Vec<f64>,
    pub basis: SectorBasis,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Correlators {
    /// ⟨σᶻᵢ⟩
    pub sigma_z: Vec<f64>,
    /// ⟨σᶻᵢσᶻⱼ⟩
    pub zz: Array2<f64>,
    /// ⟨S⁺ᵢS⁻ⱼ⟩, with S⁺S⁻ = (1+σᶻ)/2 on the diagonal
    pub pm: Array2<f64>,
}

#[derive(Clone, Debug)]
pub struct GroundStateReport {
    pub energy: f64,
    /// Sector holding the representative state (highest `n_up` among the
    /// degenerate ones).
    pub sector: usize,
    pub degenerate_sectors: Vec<usize>,
    pub sector_energies: Vec<f64>,
    pub state: SectorState,
    pub observables: Correlators,
}

pub fn sector_ground_state(p: &ModelParams, n_up: usize, method: Method) -> EdResult<SectorState> {
    p.validate()?;
    if n_up > p.n_sites {
        return Err(EdError::InvalidSector { n_up, n_sites: p.n_sites });
    }
    if p.n_sites > MAX_SITES {
        return Err(EdError::Model(ModelError::SizeExceeded { n_sites: p.n_sites, max: MAX_SITES }));
    }
    let basis = SectorBasis::new(p.n_sites, n_up);
    let dim = basis.dim();
    let method = match method {
        Method::Auto if dim <= AUTO_DENSE_MAX_DIM => Method::Dense,
        Method::Auto => Method::Lanczos { seed: 0 },
        m => m,
    };
    let (energy, amplitudes) = match method {
        Method::Dense => {
            if dim > DENSE_MAX_DIM {
                return Err(EdError::SectorTooLarge { dim, max: DENSE_MAX_DIM, method: "dense" });
            }
            let h = sector_block(p, &basis)?;
            let (e, v) = h.eigh(UPLO::Lower).expect("symmetric eigensolver");
            (e[0], v.column(0).to_vec())
        }
        Method::Lanczos { seed } => {
            if dim > LANCZOS_MAX_DIM {
                return Err(EdError::SectorTooLarge { dim, max: LANCZOS_MAX_DIM, method: "Lanczos" });
            }
            let op = SectorOperator::new(p, &basis);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let start: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let opts = LanczosOptions { tol: 1e-10, max_iter: 500, krylov_dim: 100, accept_unconverged: false };
            let pair = lowest_eigenpair(dim, |x, y| op.apply(x, y), &start, &opts).map_err(|e| match e {
                LanczosError::NoConvergence { iterations, .. } => EdError::NoConvergence(iterations),
                LanczosError::ZeroStart => EdError::NoConvergence(0),
            })?;
            (pair.value, pair.vector)
        }
        Method::Auto => unreachable!(),
    };
    Ok(SectorState { params: *p, n_up, energy, amplitudes: fix_sign(amplitudes), basis })
}

/// Make the largest-magnitude amplitude positive so results are reproducible.
fn fix_sign(mut v: Vec<f64>) -> Vec<f64> {
    let pivot = v.iter().cloned().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
    if pivot < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    v
}

/// Scans every sector and returns the global minimum.
///
/// Sectors within [`DEGENERACY_TOL`] of the minimum are all listed; the state
/// kept is the one with the most up spins, which is the branch selected by a
/// positive pinning field along +z.
pub fn global_ground_state(p: &ModelParams, method: Method) -> EdResult<GroundStateReport> {
    let states = (0..=p.n_sites)
        .map(|k| sector_ground_state(p, k, method))
        .collect::<EdResult<Vec<_>>>()?;
    let energy = states.iter().map(|s| s.energy).fold(f64::INFINITY, f64::min);
    let degenerate_sectors: Vec<usize> =
        states.iter().filter(|s| s.energy - energy <= DEGENERACY_TOL).map(|s| s.n_up).collect();
    let sector = *degenerate_sectors.last().expect("at least one sector");
    let sector_energies = states.iter().map(|s| s.energy).collect();
    let state = states.into_iter().nth(sector).unwrap();
    let observables = correlators(&state);
    Ok(GroundStateReport { energy, sector, degenerate_sectors, sector_energies, state, observables })
}

/// ψ reshaped as a `2^cut × 2^(N−cut)` matrix; left block = sites `0..cut`.
fn bipartite_matrix(state: &SectorState, cut: usize) -> Array2<f64> {
    let n = state.params.n_sites;
    let mut psi = Array2::<f64>::zeros((1 << cut, 1 << (n - cut)));
    let low = (1u64 << cut) - 1;
    for (&s, &a) in state.basis.states.iter().zip(&state.amplitudes) {
        psi[[(s & low) as usize, (s >> cut) as usize]] = a;
    }
    psi
}

/// Schmidt coefficients squared across the cut between sites `cut-1` and `cut`.
pub fn schmidt_weights(state: &SectorState, cut: usize) -> EdResult<Vec<f64>> {
    let n = state.params.n_sites;
    if cut == 0 || cut >= n {
        return Err(EdError::InvalidCut { cut, max: n - 1 });
    }
    let psi = bipartite_matrix(state, cut);
    let (_, s, _) = psi.svd(false, false).expect("svd");
    Ok(s.iter().map(|x| x * x).collect())
}

/// Von Neumann entropy −Σ λ ln λ (natural log) of the reduced state on
/// either side of `cut`.
pub fn cut_entanglement_entropy(state: &SectorState, cut: usize) -> EdResult<f64> {
    Ok(von_neumann(&schmidt_weights(state, cut)?))
}

pub fn von_neumann(weights: &[f64]) -> f64 {
    weights
        .iter()
        .filter(|&&w| w > 1e-300)
        .map(|&w| -w * w.ln())
        .sum::<f64>()
        .max(0.0)
}

pub fn correlators(state: &SectorState) -> Correlators {
    let n = state.params.n_sites;
    let basis = &state.basis;
    let amps = &state.amplitudes;
    let mut sigma_z = vec![0.0; n];
    let mut zz = Array2::<f64>::zeros((n, n));
    let mut pm = Array2::<f64>::zeros((n, n));
    for (&s, &a) in basis.states.iter().zip(amps) {
        let w = a * a;
        let z: Vec<f64> = (0..n).map(|i| if (s >> i) & 1 == 1 { 1.0 } else { -1.0 }).collect();
        for i in 0..n {
            sigma_z[i] += w * z[i];
            for j in 0..n {
                zz[[i, j]] += w * z[i] * z[j];
            }
        }
        // S⁺ᵢS⁻ⱼ|s⟩ is nonzero when j is up and i is down
        for j in 0..n {
            if (s >> j) & 1 == 0 {
                continue;
            }
            for i in 0..n {
                if i == j || (s >> i) & 1 == 1 {
                    continue;
                }
                let t = s ^ (1 << i) ^ (1 << j);
                let k = basis.index_of(t).expect("same sector");
                pm[[i, j]] += amps[k] * a;
            }
        }
    }
    for i in 0..n {
        pm[[i, i]] = 0.5 * (1.0 + sigma_z[i]);
    }
    Correlators { sigma_z, zz, pm }
}
