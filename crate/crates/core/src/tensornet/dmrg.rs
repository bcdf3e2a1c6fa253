use ndarray::{s, Array1, Array2, Array3, Array4, Axis, Ix3, Ix4};
use serde::{Deserialize, Serialize};

use super::mpo::{build_mpo, build_pinned_mpo, Mpo};
use super::mps::{expectation, mpo_transfer, random_mps, Mps};
use super::{permute, svd_thin, truncation_rank, TensorError, TensorResult};
use crate::linalg::{lowest_eigenpair, LanczosOptions};
use crate::model::ModelParams;
use crate::spinwave::fm_phase_boundary;

/// Pinning field applied to site 0 for the final sweeps of an FM-phase run.
pub const FM_PIN_FIELD: f64 = 1e-8;
/// Field used in the first sweeps of an FM-phase run to select the +z state.
const FM_SEED_FIELD: f64 = 0.1;
/// Threshold below which a state counts as free of spin-flip mixing.
const DOUBLET_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DmrgConfig {
    /// Maximum bond dimension per sweep; the last entry repeats.
    pub bond_dims: Vec<usize>,
    /// Largest discarded Schmidt weight allowed at a split.
    pub truncation_cut: f64,
    /// Convergence threshold on the change of the sweep energy.
    pub energy_tol: f64,
    pub max_sweeps: usize,
    pub seed: u64,
    /// Bond dimension of the random starting state.
    pub initial_bond_dim: usize,
    /// Residual target of the local eigensolver.
    pub local_tol: f64,
    /// Matrix-vector products allowed per local problem.
    pub local_max_iter: usize,
}

impl Default for DmrgConfig {
    fn default() -> Self {
        Self {
            bond_dims: vec![16, 32, 64, 128],
            truncation_cut: 1e-6,
            energy_tol: 1e-9,
            max_sweeps: 20,
            seed: 1,
            initial_bond_dim: 16,
            local_tol: 1e-11,
            local_max_iter: 30,
        }
    }
}

impl DmrgConfig {
    pub fn validate(&self) -> TensorResult<()> {
        let bad = |m: &str| Err(TensorError::InvalidParams(m.to_string()));
        if self.bond_dims.is_empty() || self.bond_dims.contains(&0) {
            return bad("bond dimension schedule must be non-empty and positive");
        }
        if !(self.truncation_cut >= 0.0 && self.truncation_cut <= 1e-6) {
            return bad("truncation cut must lie in [0, 1e-6]");
        }
        if !(self.energy_tol > 0.0) {
            return bad("energy tolerance must be positive");
        }
        if self.max_sweeps == 0 || self.initial_bond_dim == 0 || self.local_max_iter == 0 {
            return bad("sweep and iteration counts must be positive");
        }
        Ok(())
    }

    fn bond_dim_at(&self, sweep: usize) -> usize {
        self.bond_dims[sweep.min(self.bond_dims.len() - 1)]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DmrgReport {
    pub energy: f64,
    pub energies_per_sweep: Vec<f64>,
    /// Largest discarded weight during the final sweep.
    pub max_truncation_error: f64,
    pub converged: bool,
    pub sweeps: usize,
    pub max_bond_dim: usize,
    pub entropy_profile: Vec<f64>,
    /// Worst canonical-form deviation seen at the end of any sweep.
    pub max_canonical_error: f64,
}

impl DmrgReport {
    pub fn ensure_converged(&self) -> TensorResult<()> {
        if self.converged {
            Ok(())
        } else {
            Err(TensorError::NotConverged(self.sweeps))
        }
    }

    /// Entropy at the central cut.
    pub fn half_chain_entropy(&self) -> f64 {
        let n = self.entropy_profile.len() + 1;
        self.entropy_profile.get(n / 2 - 1).copied().unwrap_or(0.0)
    }
}

/// Two-site DMRG from a seeded random state.
pub fn dmrg_ground_state(mpo: &Mpo, config: &DmrgConfig) -> TensorResult<(Mps, DmrgReport)> {
    config.validate()?;
    let mps = random_mps(mpo.n_sites(), config.initial_bond_dim, config.seed);
    dmrg_from_state(mpo, mps, config)
}

/// Two-site DMRG starting from `mps`.
pub fn dmrg_from_state(mpo: &Mpo, mut mps: Mps, config: &DmrgConfig) -> TensorResult<(Mps, DmrgReport)> {
    config.validate()?;
    let n = mps.n_sites();
    if n != mpo.n_sites() {
        return Err(TensorError::SiteMismatch { mps: n, mpo: mpo.n_sites() });
    }
    if n < 2 {
        return Err(TensorError::InvalidParams("DMRG needs at least two sites".into()));
    }
    mps.move_center(0);

    let mut left = vec![Array3::<f64>::ones((1, 1, 1)); n + 1];
    let mut right = vec![Array3::<f64>::ones((1, 1, 1)); n + 1];
    for i in (1..n).rev() {
        right[i] = right_transfer(&right[i + 1], &mps.tensors[i], &mpo.tensors[i]);
    }

    let opts = LanczosOptions {
        tol: config.local_tol,
        max_iter: config.local_max_iter,
        krylov_dim: config.local_max_iter.min(30),
        accept_unconverged: true,
    };
    let mut energies = Vec::new();
    let mut converged = false;
    let mut max_trunc = 0.0;
    let mut max_canon = 0.0f64;
    let mut sweeps = 0;

    for sweep in 0..config.max_sweeps {
        let chi = config.bond_dim_at(sweep);
        let mut energy = f64::INFINITY;
        let mut sweep_trunc = 0.0f64;
        for i in 0..n - 1 {
            let (e, tr) = optimize_bond(&mut mps, mpo, &left[i], &right[i + 2], i, chi, config, &opts, true)?;
            energy = e;
            sweep_trunc = sweep_trunc.max(tr);
            left[i + 1] = mpo_transfer(&left[i], &mps.tensors[i], &mpo.tensors[i]);
        }
        for i in (0..n - 1).rev() {
            let (e, tr) = optimize_bond(&mut mps, mpo, &left[i], &right[i + 2], i, chi, config, &opts, false)?;
            energy = e;
            sweep_trunc = sweep_trunc.max(tr);
            right[i + 1] = right_transfer(&right[i + 2], &mps.tensors[i + 1], &mpo.tensors[i + 1]);
        }
        mps.center = Some(0);
        max_canon = max_canon.max(mps.canonical_error().unwrap_or(0.0));
        sweeps = sweep + 1;
        max_trunc = sweep_trunc;
        let previous = energies.last().copied();
        energies.push(energy);
        let schedule_done = sweep + 1 >= config.bond_dims.len();
        if let Some(prev) = previous {
            if schedule_done && (prev - energy).abs() < config.energy_tol {
                converged = true;
                break;
            }
        }
    }

    let report = DmrgReport {
        energy: *energies.last().unwrap(),
        energies_per_sweep: energies,
        max_truncation_error: max_trunc,
        converged,
        sweeps,
        max_bond_dim: mps.max_bond_dim(),
        entropy_profile: mps.entropy_profile(),
        max_canonical_error: max_canon,
    };
    Ok((mps, report))
}

/// Optimizes sites `i, i+1` and splits the result, leaving the center on
/// `i + 1` when sweeping right and on `i` otherwise. Returns the local
/// energy and the discarded weight.
#[allow(clippy::too_many_arguments)]
fn optimize_bond(
    mps: &mut Mps,
    mpo: &Mpo,
    l: &Array3<f64>,
    r: &Array3<f64>,
    i: usize,
    chi: usize,
    config: &DmrgConfig,
    opts: &LanczosOptions,
    to_right: bool,
) -> TensorResult<(f64, f64)> {
    let a = &mps.tensors[i];
    let b = &mps.tensors[i + 1];
    let (dl, d, _) = a.dim();
    let dr = b.shape()[2];
    let theta = a
        .to_shape((dl * d, a.shape()[2]))
        .unwrap()
        .dot(&b.to_shape((b.shape()[0], d * dr)).unwrap());
    let start: Vec<f64> = theta.iter().copied().collect();
    let w1 = permute(&mpo.tensors[i], Ix4(0, 2, 1, 3));
    let w2 = permute(&mpo.tensors[i + 1], Ix4(0, 2, 1, 3));
    let op = TwoSiteOperator::new(l, &w1, &w2, r, dl, d, dr);
    let pair = lowest_eigenpair(start.len(), |x, y| op.apply(x, y), &start, opts)
        .map_err(|e| TensorError::InvalidParams(format!("local eigensolver: {e}")))?;

    let m = Array2::from_shape_vec((dl * d, d * dr), pair.vector).unwrap();
    let (u, sv, vt) = svd_thin(&m);
    let (keep, discarded) = truncation_rank(&sv, config.truncation_cut, chi);
    let norm = sv.iter().take(keep).map(|x| x * x).sum::<f64>().sqrt();
    let sv: Array1<f64> = sv.slice(s![..keep]).mapv(|x| x / norm);
    let u = u.slice(s![.., ..keep]);
    let vt = vt.slice(s![..keep, ..]);
    if to_right {
        mps.tensors[i] = u.to_owned().to_shape((dl, d, keep)).unwrap().into_owned();
        let svt = &vt * &sv.view().insert_axis(Axis(1));
        mps.tensors[i + 1] = svt.to_shape((keep, d, dr)).unwrap().into_owned();
        mps.center = Some(i + 1);
    } else {
        let us = &u * &sv.view().insert_axis(Axis(0));
        mps.tensors[i] = us.to_shape((dl, d, keep)).unwrap().into_owned();
        mps.tensors[i + 1] = vt.to_owned().to_shape((keep, d, dr)).unwrap().into_owned();
        mps.center = Some(i);
    }
    Ok((pair.value, discarded))
}

/// Right environment update, `(bra, w, ket)` layout, via the mirrored left
/// update.
fn right_transfer(r: &Array3<f64>, b: &Array3<f64>, w: &Array4<f64>) -> Array3<f64> {
    let bm = permute(b, Ix3(2, 1, 0));
    let wm = permute(w, Ix4(3, 1, 2, 0));
    mpo_transfer(r, &bm, &wm)
}

/// Effective Hamiltonian on a two-site block `θ(a, s1, s2, b)`.
struct TwoSiteOperator<'a> {
    l: &'a Array3<f64>,
    /// `(w, s, t, w')`, input index before output index.
    w1: &'a Array4<f64>,
    w2: &'a Array4<f64>,
    /// `(ket, w, bra)` for a direct contraction on the ket index.
    r: Array3<f64>,
    dl: usize,
    d: usize,
    dr: usize,
}

impl<'a> TwoSiteOperator<'a> {
    fn new(
        l: &'a Array3<f64>,
        w1: &'a Array4<f64>,
        w2: &'a Array4<f64>,
        r: &Array3<f64>,
        dl: usize,
        d: usize,
        dr: usize,
    ) -> Self {
        Self { l, w1, w2, r: permute(r, Ix3(2, 1, 0)), dl, d, dr }
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let (dl, d, dr) = (self.dl, self.d, self.dr);
        let wl = self.l.shape()[1];
        let wm = self.w1.shape()[3];
        let wr = self.w2.shape()[3];
        let theta = ndarray::ArrayView2::from_shape((dl, d * d * dr), x).unwrap();
        // X(a', w, s1, s2, b)
        let lx = self.l.to_shape((dl * wl, dl)).unwrap().dot(&theta);
        let lx = lx.to_shape((dl, wl, d, d, dr)).unwrap().into_owned();
        // (a', s2, b | w, s1) · W1(w s1 | t1 w')
        let xp = lx
            .view()
            .permuted_axes([0, 3, 4, 1, 2])
            .as_standard_layout()
            .into_owned()
            .to_shape((dl * d * dr, wl * d)).unwrap().into_owned();
        let y1 = xp.dot(&self.w1.to_shape((wl * d, d * wm)).unwrap());
        // Y(a', s2, b, t1, w') → (a', b, t1 | w', s2)
        let y1 = y1.to_shape((dl, d, dr, d, wm)).unwrap().into_owned();
        let yp = y1
            .view()
            .permuted_axes([0, 2, 3, 4, 1])
            .as_standard_layout()
            .into_owned()
            .to_shape((dl * dr * d, wm * d)).unwrap().into_owned();
        let z = yp.dot(&self.w2.to_shape((wm * d, d * wr)).unwrap());
        // Z(a', b, t1, t2, w'') → (a', t1, t2 | w'', b)
        let z = z.to_shape((dl, dr, d, d, wr)).unwrap().into_owned();
        let zp = z
            .view()
            .permuted_axes([0, 2, 3, 4, 1])
            .as_standard_layout()
            .into_owned()
            .to_shape((dl * d * d, wr * dr)).unwrap().into_owned();
        // R as (w'' b | b'): stored (ket, w, bra) → need (w, ket, bra)
        let rp = self.r.view().permuted_axes([1, 0, 2]);
        let rp = rp.as_standard_layout();
        let out = zp.dot(&rp.to_shape((wr * dr, dr)).unwrap());
        y.copy_from_slice(out.as_slice().unwrap());
    }
}

/// Result of the phase-aware ground-state protocol.
#[derive(Clone, Debug)]
pub struct GroundStateRun {
    pub mps: Mps,
    pub report: DmrgReport,
    /// Energy of the returned state under the unpinned Hamiltonian.
    pub energy: f64,
    pub pinned: bool,
}

/// DMRG ground state of the open chain. At or below the FM boundary the Z₂
/// tie is broken toward +z: a strong field on site 0 seeds the polarization
/// and the run continues with the weak [`FM_PIN_FIELD`]. Because the boundary
/// shifts at finite N, an unpinned run is also made there and wins if its
/// energy is lower.
pub fn ground_state(p: &ModelParams, config: &DmrgConfig) -> TensorResult<GroundStateRun> {
    config.validate()?;
    let bare = build_mpo(p)?;
    let (mps, report) = dmrg_ground_state(&bare, config)?;
    let energy = expectation(&mps, &bare)?;
    let free = GroundStateRun { mps, report, energy, pinned: false };
    let run = if p.alpha > fm_phase_boundary(p.j_lr) {
        free
    } else {
        let seed_cfg = DmrgConfig { bond_dims: vec![config.bond_dims[0]], max_sweeps: 2, ..config.clone() };
        let (mps, _) = dmrg_ground_state(&build_pinned_mpo(p, FM_SEED_FIELD)?, &seed_cfg)?;
        let (mps, report) = dmrg_from_state(&build_pinned_mpo(p, FM_PIN_FIELD)?, mps, config)?;
        let energy = expectation(&mps, &bare)?;
        if free.energy < energy - PIN_ENERGY_SLACK * p.n_sites as f64 {
            free
        } else {
            GroundStateRun { mps, report, energy, pinned: true }
        }
    };
    positive_member(run, &bare, config)
}

/// A state mixing the two members `|+⟩`, `Π σˣ|+⟩` of a spin-flip doublet is
/// replaced by `|+⟩`, the member with positive magnetization. With
/// `ψ = a|+⟩ + b Πσˣ|+⟩`, the flip overlap is `2ab` and the sign of
/// `a² − b²` is that of `⟨Σσᶻ⟩`.
fn positive_member(run: GroundStateRun, bare: &Mpo, config: &DmrgConfig) -> TensorResult<GroundStateRun> {
    let n = run.mps.n_sites();
    let m: f64 = run.mps.sigma_z_profile().iter().sum();
    let flipped = run.mps.spin_flipped();
    let x = run.mps.overlap(&flipped) / run.mps.norm_sq();
    if m.abs() < DOUBLET_TOL * n as f64 || x.abs() < DOUBLET_TOL || 1.0 - x.abs() < DOUBLET_TOL {
        return Ok(run);
    }
    let s1 = (1.0 + x).sqrt();
    let s2 = m.signum() * (1.0 - x).sqrt();
    let (a, b) = (0.5 * (s1 + s2), 0.5 * (s1 - s2));
    let mut mps = Mps::linear_combination(a, &run.mps, -b, &flipped);
    let chi = *config.bond_dims.last().unwrap();
    mps.compress(config.truncation_cut, chi);
    let energy = expectation(&mps, bare)?;
    if energy > run.energy + PIN_ENERGY_SLACK * n as f64 {
        return Ok(run);
    }
    let mut report = run.report;
    report.entropy_profile = mps.entropy_profile();
    report.max_bond_dim = mps.max_bond_dim();
    Ok(GroundStateRun { mps, report, energy, pinned: run.pinned })
}

/// Per-site energy margin by which an unpinned run must beat the pinned one.
const PIN_ENERGY_SLACK: f64 = 1e-10;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactdiag::{cut_entanglement_entropy, global_ground_state, Method};
    use crate::tensornet::energy_variance;

    fn tight() -> DmrgConfig {
        DmrgConfig { bond_dims: vec![16, 64], truncation_cut: 1e-12, energy_tol: 1e-11, ..Default::default() }
    }

    #[test]
    fn two_site_operator_matches_projected_hamiltonian() {
        let p = ModelParams::new(1.2, 0.7, 4).unwrap();
        let mpo = build_mpo(&p).unwrap();
        let h = mpo.to_dense();
        let mut mps = random_mps(4, 4, 3);
        mps.move_center(1);
        let l = mpo_transfer(&Array3::ones((1, 1, 1)), &mps.tensors[0], &mpo.tensors[0]);
        let r = right_transfer(&Array3::ones((1, 1, 1)), &mps.tensors[3], &mpo.tensors[3]);
        let w1 = permute(&mpo.tensors[1], Ix4(0, 2, 1, 3));
        let w2 = permute(&mpo.tensors[2], Ix4(0, 2, 1, 3));
        let (dl, dr) = (mps.tensors[1].shape()[0], mps.tensors[2].shape()[2]);
        let op = TwoSiteOperator::new(&l, &w1, &w2, &r, dl, 2, dr);
        let dim = dl * 4 * dr;
        let embed = |v: &[f64]| {
            let mut m = mps.clone();
            m.tensors[1] = Array3::from_shape_vec((dl, 2, 2 * dr), v.to_vec()).unwrap();
            m.tensors[2] = Array2::<f64>::eye(2 * dr).to_shape((2 * dr, 2, dr)).unwrap().into_owned();
            Array1::from(m.to_dense())
        };
        let basis: Vec<Array1<f64>> = (0..dim)
            .map(|k| {
                let mut e = vec![0.0; dim];
                e[k] = 1.0;
                embed(&e)
            })
            .collect();
        for k in 0..dim {
            let mut e = vec![0.0; dim];
            e[k] = 1.0;
            let mut y = vec![0.0; dim];
            op.apply(&e, &mut y);
            for (m, bm) in basis.iter().enumerate() {
                let want = bm.dot(&h.dot(&basis[k]));
                assert!((y[m] - want).abs() < 1e-12, "({m},{k}) {} vs {want}", y[m]);
            }
        }
    }

    #[test]
    fn matches_exact_diagonalization() {
        for &(a, j) in &[(1.5, 0.5), (0.7, -0.4), (1.0, 1.0), (2.0, -0.5)] {
            let p = ModelParams::new(a, j, 10).unwrap();
            let ed = global_ground_state(&p, Method::Dense).unwrap();
            let run = ground_state(&p, &tight()).unwrap();
            assert!(run.report.converged, "{a} {j}");
            assert!((run.energy - ed.energy).abs() < 1e-8, "{a} {j}: {} vs {}", run.energy, ed.energy);
            let s_ed = cut_entanglement_entropy(&ed.state, 5).unwrap();
            assert!((run.report.half_chain_entropy() - s_ed).abs() < 1e-5, "{a} {j}");
        }
    }

    #[test]
    fn sweeps_are_monotone_and_canonical() {
        let p = ModelParams::new(1.5, 0.5, 12).unwrap();
        let (mps, report) = dmrg_ground_state(&build_mpo(&p).unwrap(), &tight()).unwrap();
        for w in report.energies_per_sweep.windows(2) {
            assert!(w[1] <= w[0] + 1e-10);
        }
        assert!(report.max_canonical_error < 1e-10);
        let var = energy_variance(&mps, &build_mpo(&p).unwrap()).unwrap();
        assert!(var < 1e-6 && var > -1e-10, "{var}");
        let prof = &report.entropy_profile;
        for k in 0..prof.len() {
            assert!((prof[k] - prof[prof.len() - 1 - k]).abs() < 1e-3);
        }
    }

    #[test]
    fn flip_doublet_resolves_to_positive_member() {
        // ground states in sectors n_up = 9 and 3 are degenerate here
        let p = ModelParams::new(1.0, 1.0, 12).unwrap();
        let ed = global_ground_state(&p, Method::Auto).unwrap();
        assert_eq!(ed.degenerate_sectors, vec![3, 9]);
        let run = ground_state(&p, &tight()).unwrap();
        let m: f64 = run.mps.sigma_z_profile().iter().sum();
        assert!((m - 6.0).abs() < 1e-6, "{m}");
        let s_ed = cut_entanglement_entropy(&ed.state, 6).unwrap();
        assert!((run.report.half_chain_entropy() - s_ed).abs() < 1e-5);
        assert!((run.energy - ed.energy).abs() < 1e-8);
    }

    #[test]
    fn ferromagnet_is_polarized_product_state() {
        let p = ModelParams::new(0.5, 0.0, 12).unwrap();
        let run = ground_state(&p, &DmrgConfig::default()).unwrap();
        assert!(run.pinned);
        assert!((run.energy + 2.75).abs() < 1e-8);
        assert!(run.report.entropy_profile.iter().all(|&s| s <= 1e-8));
        assert!(run.mps.sigma_z_profile().iter().all(|&z| z > 1.0 - 1e-6));
    }

    #[test]
    fn rejects_loose_truncation_and_mismatch() {
        let cfg = DmrgConfig { truncation_cut: 1e-4, ..Default::default() };
        assert!(cfg.validate().is_err());
        let mpo = build_mpo(&ModelParams::new(1.0, 0.0, 4).unwrap()).unwrap();
        let mps = random_mps(5, 2, 0);
        assert!(matches!(
            dmrg_from_state(&mpo, mps, &DmrgConfig::default()),
            Err(TensorError::SiteMismatch { .. })
        ));
    }
}
