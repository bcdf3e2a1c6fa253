//! The spin-1/2 chain Hamiltonian
//!
//! ```text
//! H = -1/4 Σ_bonds [σᶻσᶻ + α(σˣσˣ + σʸσʸ)] + J/(4N) Σ_{i<j} (σˣσˣ + σʸσʸ)
//! ```
//!
//! in dense and matrix-free form, together with the total-σᶻ sector
//! bookkeeping shared by every backend.
//!
//! Basis convention: site 0 is the least-significant bit of a basis bitmask,
//! a set bit is spin-up, and σᶻ|↑⟩ = +|↑⟩. With this convention the number of
//! up spins is the popcount of the mask.

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest chain handled by the dense `2^N × 2^N` builder.
pub const DENSE_MAX_SITES: usize = 14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),
    #[error("dense Hamiltonian for {n_sites} sites exceeds the {max}-site limit")]
    SizeExceeded { n_sites: usize, max: usize },
    #[error("vector length {got} does not match sector dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

pub type ModelResult<T> = Result<T, ModelError>;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    #[default]
    Open,
    Periodic,
}

/// A point (α, J, N, boundary) of the model.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub alpha: f64,
    pub j_lr: f64,
    pub n_sites: usize,
    pub boundary: Boundary,
}

impl ModelParams {
    /// Open chain, the default for exact diagonalization and DMRG.
    pub fn new(alpha: f64, j_lr: f64, n_sites: usize) -> ModelResult<Self> {
        Self::with_boundary(alpha, j_lr, n_sites, Boundary::Open)
    }

    /// Periodic chain, as assumed by the spin-wave expansions.
    pub fn periodic(alpha: f64, j_lr: f64, n_sites: usize) -> ModelResult<Self> {
        Self::with_boundary(alpha, j_lr, n_sites, Boundary::Periodic)
    }

    pub fn with_boundary(
        alpha: f64,
        j_lr: f64,
        n_sites: usize,
        boundary: Boundary,
    ) -> ModelResult<Self> {
        let p = Self { alpha, j_lr, n_sites, boundary };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> ModelResult<()> {
        if self.n_sites < 2 {
            return Err(ModelError::InvalidParams(format!(
                "n_sites must be at least 2, got {}",
                self.n_sites
            )));
        }
        if !self.alpha.is_finite() || !self.j_lr.is_finite() {
            return Err(ModelError::InvalidParams("alpha and j_lr must be finite".into()));
        }
        Ok(())
    }

    /// Nearest-neighbour bonds `(i, i+1)`, plus the wrap bond for periodic
    /// chains longer than two sites.
    pub fn bonds(&self) -> Vec<(usize, usize)> {
        let n = self.n_sites;
        let mut bonds: Vec<(usize, usize)> = (0..n - 1).map(|i| (i, i + 1)).collect();
        if self.boundary == Boundary::Periodic && n > 2 {
            bonds.push((0, n - 1));
        }
        bonds
    }

    fn is_bond(&self, i: usize, j: usize) -> bool {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        j == i + 1
            || (self.boundary == Boundary::Periodic && self.n_sites > 2 && i == 0 && j == self.n_sites - 1)
    }

    /// Amplitude of the pair flip |…↑ᵢ…↓ⱼ…⟩ ↔ |…↓ᵢ…↑ⱼ…⟩ for `i != j`.
    ///
    /// σˣσˣ + σʸσʸ = 2(σ⁺σ⁻ + σ⁻σ⁺), so a bond contributes −α/2 and every
    /// pair contributes J/(2N).
    pub fn flip_amplitude(&self, i: usize, j: usize) -> f64 {
        let long_range = self.j_lr / (2.0 * self.n_sites as f64);
        if self.is_bond(i, j) {
            long_range - 0.5 * self.alpha
        } else {
            long_range
        }
    }

    /// Diagonal (σᶻσᶻ) energy of a basis state.
    pub fn diagonal_energy(&self, mask: u64) -> f64 {
        self.bonds()
            .iter()
            .map(|&(i, j)| {
                let same = ((mask >> i) & 1) == ((mask >> j) & 1);
                if same { -0.25 } else { 0.25 }
            })
            .sum()
    }
}

/// Basis of one total-σᶻ block: all masks with exactly `n_up` set bits, in
/// increasing order.
#[derive(Clone, Debug, PartialEq)]
pub struct SectorBasis {
    pub n_sites: usize,
    pub n_up: usize,
    pub states: Vec<u64>,
}

impl SectorBasis {
    pub fn new(n_sites: usize, n_up: usize) -> Self {
        assert!(n_up <= n_sites && n_sites <= 63);
        let mut states = Vec::with_capacity(binomial(n_sites, n_up) as usize);
        if n_up == 0 {
            states.push(0);
        } else {
            // Gosper's hack enumerates equal-popcount masks in increasing order.
            let mut s: u64 = (1u64 << n_up) - 1;
            let limit = 1u64 << n_sites;
            while s < limit {
                states.push(s);
                let c = s & s.wrapping_neg();
                let r = s + c;
                s = (((r ^ s) >> 2) / c) | r;
            }
        }
        Self { n_sites, n_up, states }
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn index_of(&self, mask: u64) -> Option<usize> {
        self.states.binary_search(&mask).ok()
    }
}

pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i as u64 + 1))
}

/// All blocks `n_up = 0..=N`.
pub fn magnetization_sectors(n_sites: usize) -> Vec<SectorBasis> {
    (0..=n_sites).map(|k| SectorBasis::new(n_sites, k)).collect()
}

/// Full `2^N × 2^N` Hamiltonian in the computational basis.
pub fn build_dense_hamiltonian(p: &ModelParams) -> ModelResult<Array2<f64>> {
    p.validate()?;
    if p.n_sites > DENSE_MAX_SITES {
        return Err(ModelError::SizeExceeded { n_sites: p.n_sites, max: DENSE_MAX_SITES });
    }
    let n = p.n_sites;
    let dim = 1usize << n;
    let mut h = Array2::<f64>::zeros((dim, dim));
    for s in 0..dim as u64 {
        h[[s as usize, s as usize]] = p.diagonal_energy(s);
        for i in 0..n {
            for j in i + 1..n {
                if ((s >> i) & 1) != ((s >> j) & 1) {
                    let t = s ^ (1 << i) ^ (1 << j);
                    h[[t as usize, s as usize]] += p.flip_amplitude(i, j);
                }
            }
        }
    }
    Ok(h)
}

/// Dense block of the Hamiltonian restricted to `sector`.
pub fn sector_block(p: &ModelParams, sector: &SectorBasis) -> ModelResult<Array2<f64>> {
    p.validate()?;
    let dim = sector.dim();
    let mut h = Array2::<f64>::zeros((dim, dim));
    for (col, &s) in sector.states.iter().enumerate() {
        h[[col, col]] = p.diagonal_energy(s);
        for_each_flip(p, s, |t, amp| {
            let row = sector.index_of(t).expect("flip preserves popcount");
            h[[row, col]] += amp;
        });
    }
    Ok(h)
}

fn for_each_flip(p: &ModelParams, s: u64, mut f: impl FnMut(u64, f64)) {
    let n = p.n_sites;
    for i in 0..n {
        for j in i + 1..n {
            if ((s >> i) & 1) != ((s >> j) & 1) {
                f(s ^ (1 << i) ^ (1 << j), p.flip_amplitude(i, j));
            }
        }
    }
}

/// Matrix-free product of the sector block with `v`.
pub fn apply_hamiltonian(p: &ModelParams, sector: &SectorBasis, v: &[f64]) -> ModelResult<Vec<f64>> {
    if v.len() != sector.dim() {
        return Err(ModelError::DimensionMismatch { expected: sector.dim(), got: v.len() });
    }
    let mut out = vec![0.0; v.len()];
    apply_into(p, sector, v, &mut out);
    Ok(out)
}

/// Precomputed sparse form of a sector block, for repeated products.
#[derive(Clone, Debug)]
pub struct SectorOperator {
    diag: Vec<f64>,
    // (row, col, amplitude) for the off-diagonal flips, grouped by column
    offdiag: Vec<(u32, u32, f64)>,
}

impl SectorOperator {
    pub fn new(p: &ModelParams, sector: &SectorBasis) -> Self {
        let mut diag = Vec::with_capacity(sector.dim());
        let mut offdiag = Vec::new();
        for (col, &s) in sector.states.iter().enumerate() {
            diag.push(p.diagonal_energy(s));
            for_each_flip(p, s, |t, amp| {
                if amp != 0.0 {
                    let row = sector.index_of(t).expect("flip preserves popcount");
                    offdiag.push((row as u32, col as u32, amp));
                }
            });
        }
        Self { diag, offdiag }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        for ((o, d), x) in out.iter_mut().zip(&self.diag).zip(v) {
            *o = d * x;
        }
        for &(r, c, a) in &self.offdiag {
            out[r as usize] += a * v[c as usize];
        }
    }
}

fn apply_into(p: &ModelParams, sector: &SectorBasis, v: &[f64], out: &mut [f64]) {
    for (col, &s) in sector.states.iter().enumerate() {
        let x = v[col];
        out[col] += p.diagonal_energy(s) * x;
        if x == 0.0 {
            continue;
        }
        for_each_flip(p, s, |t, amp| {
            let row = sector.index_of(t).expect("flip preserves popcount");
            out[row] += amp * x;
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray_linalg::{Eigh, UPLO};
    use rand::{Rng, SeedableRng};

    fn params(alpha: f64, j: f64, n: usize) -> ModelParams {
        ModelParams::new(alpha, j, n).unwrap()
    }

    #[test]
    fn two_site_ising_limit() {
        let h = build_dense_hamiltonian(&params(0.0, 0.0, 2)).unwrap();
        // masks: 0=↓↓, 1=↑↓ (site0 up), 2=↓↑, 3=↑↑
        assert_eq!(h[[0, 0]], -0.25);
        assert_eq!(h[[3, 3]], -0.25);
        assert_eq!(h[[1, 1]], 0.25);
        assert_eq!(h[[2, 2]], 0.25);
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    assert_eq!(h[[i, j]], 0.0);
                }
            }
        }
    }

    #[test]
    fn two_site_isotropic_block() {
        let p = params(1.0, 0.0, 2);
        let block = sector_block(&p, &SectorBasis::new(2, 1)).unwrap();
        assert_eq!(block, ndarray::array![[0.25, -0.5], [-0.5, 0.25]]);
        let (e, _) = block.eigh(UPLO::Lower).unwrap();
        assert!((e[0] + 0.25).abs() < 1e-14);
        assert!((e[1] - 0.75).abs() < 1e-14);
    }

    #[test]
    fn two_site_offdiagonal_and_spectrum() {
        for &(a, j) in &[(0.3, 0.7), (1.5, -1.0), (2.0, 2.5)] {
            let h = build_dense_hamiltonian(&params(a, j, 2)).unwrap();
            assert!((h[[1, 2]] - (-a / 2.0 + j / 4.0)).abs() < 1e-15);
            let (mut e, _) = h.eigh(UPLO::Lower).unwrap();
            let mut expect = [-0.25, -0.25, 0.25 + (a / 2.0 - j / 4.0), 0.25 - (a / 2.0 - j / 4.0)];
            expect.sort_by(|x, y| x.partial_cmp(y).unwrap());
            e.as_slice_mut().unwrap().sort_by(|x, y| x.partial_cmp(y).unwrap());
            for (x, y) in e.iter().zip(expect) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(matches!(ModelParams::new(1.0, 0.0, 1), Err(ModelError::InvalidParams(_))));
        let p = params(1.0, 0.0, 15);
        assert!(matches!(build_dense_hamiltonian(&p), Err(ModelError::SizeExceeded { .. })));
    }

    #[test]
    fn sector_sizes() {
        let sizes = |n| magnetization_sectors(n).iter().map(|s| s.dim()).collect::<Vec<_>>();
        assert_eq!(sizes(2), vec![1, 2, 1]);
        assert_eq!(sizes(4), vec![1, 4, 6, 4, 1]);
        assert_eq!(SectorBasis::new(10, 5).dim(), 252);
        let total: usize = sizes(9).iter().sum();
        assert_eq!(total, 512);
    }

    #[test]
    fn sector_index_roundtrip() {
        let b = SectorBasis::new(9, 4);
        assert!(b.states.windows(2).all(|w| w[0] < w[1]));
        for (i, &s) in b.states.iter().enumerate() {
            assert_eq!(s.count_ones(), 4);
            assert_eq!(b.index_of(s), Some(i));
        }
        assert_eq!(b.index_of(0b1), None);
    }

    #[test]
    fn polarized_state_is_eigenvector() {
        let n = 7;
        let p = params(0.8, 1.3, n);
        let sector = SectorBasis::new(n, n);
        let out = apply_hamiltonian(&p, &sector, &[1.0]).unwrap();
        assert!((out[0] + (n as f64 - 1.0) / 4.0).abs() < 1e-14);
    }

    #[test]
    fn matvec_matches_dense_block() {
        let p = params(1.3, 0.7, 8);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let h = build_dense_hamiltonian(&p).unwrap();
        for sector in magnetization_sectors(8) {
            let v: Vec<f64> = (0..sector.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let got = apply_hamiltonian(&p, &sector, &v).unwrap();
            let op = SectorOperator::new(&p, &sector);
            let mut got2 = vec![0.0; v.len()];
            op.apply(&v, &mut got2);
            for (row, &r) in sector.states.iter().enumerate() {
                let expect: f64 = sector
                    .states
                    .iter()
                    .zip(&v)
                    .map(|(&c, x)| h[[r as usize, c as usize]] * x)
                    .sum();
                assert!((got[row] - expect).abs() < 1e-12);
                assert!((got2[row] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dense_is_block_diagonal_and_symmetric() {
        let p = params(1.7, -0.4, 6);
        let h = build_dense_hamiltonian(&p).unwrap();
        let dim = h.nrows();
        for r in 0..dim {
            for c in 0..dim {
                assert!((h[[r, c]] - h[[c, r]]).abs() <= 1e-12);
                if (r as u64).count_ones() != (c as u64).count_ones() {
                    assert_eq!(h[[r, c]], 0.0);
                }
            }
        }
    }

    #[test]
    fn global_spin_flip_symmetry() {
        let p = params(0.6, 1.1, 6);
        let h = build_dense_hamiltonian(&p).unwrap();
        let mask = (1usize << 6) - 1;
        for r in 0..h.nrows() {
            for c in 0..h.ncols() {
                assert!((h[[r ^ mask, c ^ mask]] - h[[r, c]]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn dimension_mismatch() {
        let p = params(1.0, 0.0, 4);
        let s = SectorBasis::new(4, 2);
        assert!(matches!(
            apply_hamiltonian(&p, &s, &[1.0; 5]),
            Err(ModelError::DimensionMismatch { expected: 6, got: 5 })
        ));
    }

    #[test]
    fn periodic_adds_wrap_bond() {
        let p = ModelParams::periodic(1.0, 0.0, 4).unwrap();
        assert_eq!(p.bonds().len(), 4);
        assert_eq!(p.flip_amplitude(0, 3), -0.5);
        assert_eq!(params(1.0, 0.0, 4).flip_amplitude(0, 3), 0.0);
    }
}
