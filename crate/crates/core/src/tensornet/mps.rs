use ndarray::{s, Array1, Array2, Array3, Array4, Axis, Ix4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::mpo::{ops, Mpo};
use super::{permute, svd_thin, truncation_rank, TensorError, TensorResult};
use crate::exactdiag::von_neumann;

/// Open-boundary matrix-product state with site tensors `(left, phys, right)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mps {
    pub tensors: Vec<Array3<f64>>,
    /// Orthogonality center, when the tensors are in mixed canonical form.
    pub center: Option<usize>,
}

/// Seeded random state with bond dimensions `min(χ, 2^i, 2^(N−i))`, right
/// canonicalized and normalized.
pub fn random_mps(n_sites: usize, bond_dim: usize, seed: u64) -> Mps {
    assert!(n_sites >= 1 && bond_dim >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = bounded_bond_dims(n_sites, bond_dim);
    let tensors = (0..n_sites)
        .map(|i| Array3::from_shape_simple_fn((dims[i], 2, dims[i + 1]), || rng.gen_range(-1.0..1.0)))
        .collect();
    let mut mps = Mps { tensors, center: None };
    mps.right_canonicalize();
    mps
}

fn bounded_bond_dims(n: usize, chi: usize) -> Vec<usize> {
    (0..=n)
        .map(|b| {
            let edge = b.min(n - b).min(62) as u32;
            chi.min(1usize << edge)
        })
        .collect()
}

impl Mps {
    /// Product state from per-site amplitudes `(a_↓, a_↑)`.
    pub fn product(states: &[[f64; 2]]) -> Self {
        let tensors = states
            .iter()
            .map(|st| Array3::from_shape_vec((1, 2, 1), st.to_vec()).unwrap())
            .collect();
        let mut mps = Mps { tensors, center: None };
        mps.right_canonicalize();
        mps
    }

    pub fn n_sites(&self) -> usize {
        self.tensors.len()
    }

    /// Dimensions of the N+1 bonds, boundaries included.
    pub fn bond_dims(&self) -> Vec<usize> {
        let mut d: Vec<usize> = self.tensors.iter().map(|t| t.shape()[0]).collect();
        d.push(self.tensors.last().map_or(1, |t| t.shape()[2]));
        d
    }

    pub fn max_bond_dim(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    /// Brings every site into right-canonical form, normalizes, and puts the
    /// center on site 0.
    pub fn right_canonicalize(&mut self) {
        let n = self.n_sites();
        for i in (1..n).rev() {
            self.shift_left(i);
        }
        let nrm = self.tensors[0].iter().map(|x| x * x).sum::<f64>().sqrt();
        if nrm > 0.0 {
            self.tensors[0].mapv_inplace(|x| x / nrm);
        }
        self.center = Some(0);
    }

    /// Moves the orthogonality center from site `i` to `i − 1`.
    fn shift_left(&mut self, i: usize) {
        let t = &self.tensors[i];
        let (dl, d, dr) = t.dim();
        let m = t.to_shape((dl, d * dr)).unwrap().to_owned();
        let (u, s, vt) = svd_thin(&m);
        let k = s.len();
        self.tensors[i] = vt.to_shape((k, d, dr)).unwrap().into_owned();
        let us = &u * &s.view().insert_axis(Axis(0));
        let prev = &self.tensors[i - 1];
        let (pl, pd, _) = prev.dim();
        let pm = prev.to_shape((pl * pd, dl)).unwrap();
        self.tensors[i - 1] = pm.dot(&us).to_shape((pl, pd, k)).unwrap().into_owned();
    }

    /// Moves the orthogonality center from site `i` to `i + 1`.
    fn shift_right(&mut self, i: usize) -> Array1<f64> {
        let t = &self.tensors[i];
        let (dl, d, dr) = t.dim();
        let m = t.to_shape((dl * d, dr)).unwrap().to_owned();
        let (u, s, vt) = svd_thin(&m);
        let k = s.len();
        self.tensors[i] = u.to_shape((dl, d, k)).unwrap().into_owned();
        let svt = &vt * &s.view().insert_axis(Axis(1));
        let next = &self.tensors[i + 1];
        let (_, nd, nr) = next.dim();
        let nm = next.to_shape((dr, nd * nr)).unwrap();
        self.tensors[i + 1] = svt.dot(&nm).to_shape((k, nd, nr)).unwrap().into_owned();
        s
    }

    /// Moves the center to `site`, canonicalizing from scratch if needed.
    pub fn move_center(&mut self, site: usize) {
        if self.center.is_none() {
            self.right_canonicalize();
        }
        let mut c = self.center.unwrap();
        while c < site {
            self.shift_right(c);
            c += 1;
        }
        while c > site {
            self.shift_left(c);
            c -= 1;
        }
        self.center = Some(site);
    }

    pub fn norm_sq(&self) -> f64 {
        let mut e = Array2::<f64>::ones((1, 1));
        for a in &self.tensors {
            e = transfer(&e, a, None);
        }
        e[[0, 0]]
    }

    /// Squared Schmidt values across the cut after `bond` sites.
    pub fn schmidt_weights(&self, bond: usize) -> TensorResult<Vec<f64>> {
        let n = self.n_sites();
        if bond == 0 || bond >= n {
            return Err(TensorError::InvalidBond { bond, max: n - 1 });
        }
        let s = match self.center {
            Some(c) if c == bond - 1 => {
                let (dl, d, dr) = self.tensors[c].dim();
                svd_thin(&self.tensors[c].to_shape((dl * d, dr)).unwrap().to_owned()).1
            }
            Some(c) if c == bond => {
                let (dl, d, dr) = self.tensors[c].dim();
                svd_thin(&self.tensors[c].to_shape((dl, d * dr)).unwrap().to_owned()).1
            }
            _ => {
                let mut m = self.clone();
                m.move_center(bond - 1);
                return m.schmidt_weights(bond);
            }
        };
        let total: f64 = s.iter().map(|x| x * x).sum();
        Ok(s.iter().map(|x| x * x / total).collect())
    }

    /// Von Neumann entropy −Σ λ² ln λ² at the cut after `bond` sites.
    pub fn entropy(&self, bond: usize) -> TensorResult<f64> {
        Ok(von_neumann(&self.schmidt_weights(bond)?))
    }

    /// Entropies at every internal bond, cuts 1..N−1.
    pub fn entropy_profile(&self) -> Vec<f64> {
        let n = self.n_sites();
        let mut m = self.clone();
        m.move_center(0);
        let mut out = Vec::with_capacity(n.saturating_sub(1));
        for i in 0..n - 1 {
            let s = m.shift_right(i);
            let total: f64 = s.iter().map(|x| x * x).sum();
            let w: Vec<f64> = s.iter().map(|x| x * x / total).collect();
            out.push(von_neumann(&w));
        }
        m.center = Some(n - 1);
        out
    }

    /// Left environments `E_i` (contraction of sites `< i` with identity).
    fn left_envs(&self) -> Vec<Array2<f64>> {
        let mut envs = vec![Array2::<f64>::ones((1, 1))];
        for a in &self.tensors {
            let e = transfer(envs.last().unwrap(), a, None);
            envs.push(e);
        }
        envs
    }

    /// Right environments `F_i` (contraction of sites `≥ i` with identity).
    fn right_envs(&self) -> Vec<Array2<f64>> {
        let n = self.n_sites();
        let mut envs = vec![Array2::<f64>::ones((1, 1)); n + 1];
        for i in (0..n).rev() {
            envs[i] = transfer_right(&envs[i + 1], &self.tensors[i]);
        }
        envs
    }

    /// ⟨σᶻᵢ⟩ for every site.
    pub fn sigma_z_profile(&self) -> Vec<f64> {
        let left = self.left_envs();
        let right = self.right_envs();
        let norm = left.last().unwrap()[[0, 0]];
        let sz = ops::sigma_z();
        (0..self.n_sites())
            .map(|i| close(&transfer(&left[i], &self.tensors[i], Some(&sz)), &right[i + 1]) / norm)
            .collect()
    }

    /// ⟨A_i B_j⟩ for one `i` and every `j > i`; entry `j − i − 1` of the result.
    pub fn correlation_row(&self, op_i: &Array2<f64>, i: usize, op_j: &Array2<f64>) -> Vec<f64> {
        let left = self.left_envs();
        let right = self.right_envs();
        let norm = left.last().unwrap()[[0, 0]];
        let mut x = transfer(&left[i], &self.tensors[i], Some(op_i));
        let mut out = Vec::with_capacity(self.n_sites() - i - 1);
        for j in i + 1..self.n_sites() {
            let y = transfer(&x, &self.tensors[j], Some(op_j));
            out.push(close(&y, &right[j + 1]) / norm);
            x = transfer(&x, &self.tensors[j], None);
        }
        out
    }

    /// ⟨A_i B_j⟩ for arbitrary `i`, `j` (operators on distinct sites commute;
    /// for `i == j` the product `A·B` is used).
    pub fn two_point(&self, op_i: &Array2<f64>, i: usize, op_j: &Array2<f64>, j: usize) -> f64 {
        let left = self.left_envs();
        let right = self.right_envs();
        let norm = left.last().unwrap()[[0, 0]];
        if i == j {
            let prod = op_i.dot(op_j);
            return close(&transfer(&left[i], &self.tensors[i], Some(&prod)), &right[i + 1]) / norm;
        }
        let (a, oa, b, ob) = if i < j { (i, op_i, j, op_j) } else { (j, op_j, i, op_i) };
        let mut x = transfer(&left[a], &self.tensors[a], Some(oa));
        for k in a + 1..b {
            x = transfer(&x, &self.tensors[k], None);
        }
        close(&transfer(&x, &self.tensors[b], Some(ob)), &right[b + 1]) / norm
    }

    /// ⟨S⁺ᵢS⁻ⱼ⟩
    pub fn pm_correlation(&self, i: usize, j: usize) -> f64 {
        self.two_point(&ops::s_plus(), i, &ops::s_minus(), j)
    }

    /// ⟨σᶻᵢσᶻⱼ⟩
    pub fn zz_correlation(&self, i: usize, j: usize) -> f64 {
        self.two_point(&ops::sigma_z(), i, &ops::sigma_z(), j)
    }

    /// Dense amplitude vector of length 2^N, site 0 least significant.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.n_sites();
        assert!(n <= 24, "dense conversion is for small chains");
        // acc[(config, bond)]
        let first = &self.tensors[0];
        let mut acc: Array2<f64> = first.index_axis(Axis(0), 0).to_owned();
        let mut dim = 2;
        for a in &self.tensors[1..] {
            let (dl, _, dr) = a.dim();
            let mut next = Array2::<f64>::zeros((dim * 2, dr));
            for s in 0..2 {
                let block = acc.dot(&a.slice(s![.., s, ..]));
                next.slice_mut(s![s * dim..(s + 1) * dim, ..]).assign(&block);
            }
            debug_assert_eq!(acc.ncols(), dl);
            acc = next;
            dim *= 2;
        }
        acc.column(0).to_vec()
    }

    /// Largest deviation of the canonical-form isometry conditions from
    /// identity (left of the center: A†A = 1, right of it: AA† = 1).
    pub fn canonical_error(&self) -> Option<f64> {
        let c = self.center?;
        let mut err = 0.0f64;
        for (i, a) in self.tensors.iter().enumerate() {
            let (dl, d, dr) = a.dim();
            let g = if i < c {
                let m = a.to_shape((dl * d, dr)).unwrap();
                m.t().dot(&m) - Array2::<f64>::eye(dr)
            } else if i > c {
                let m = a.to_shape((dl, d * dr)).unwrap();
                m.dot(&m.t()) - Array2::<f64>::eye(dl)
            } else {
                continue;
            };
            err = err.max(g.iter().fold(0.0f64, |m, x| m.max(x.abs())));
        }
        Some(err)
    }
}

impl Mps {
    /// The state with every spin flipped, `Π σˣ |ψ⟩`.
    pub fn spin_flipped(&self) -> Mps {
        let tensors = self
            .tensors
            .iter()
            .map(|a| {
                let mut b = a.clone();
                b.index_axis_mut(Axis(1), 0).assign(&a.index_axis(Axis(1), 1));
                b.index_axis_mut(Axis(1), 1).assign(&a.index_axis(Axis(1), 0));
                b
            })
            .collect();
        Mps { tensors, center: self.center }
    }

    /// `⟨self|other⟩`.
    pub fn overlap(&self, other: &Mps) -> f64 {
        assert_eq!(self.n_sites(), other.n_sites());
        let mut e = Array2::<f64>::ones((1, 1));
        for (a, b) in self.tensors.iter().zip(&other.tensors) {
            let (bl, d, br) = b.dim();
            // x(a, s, k') = Σ_k E(a, k) B(k, s, k')
            let x = e.dot(&b.to_shape((bl, d * br)).unwrap()).to_shape((a.shape()[0] * d, br)).unwrap().into_owned();
            let am = a.to_shape((a.shape()[0] * d, a.shape()[2])).unwrap();
            e = am.t().dot(&x);
        }
        e[[0, 0]]
    }

    /// `ca |x⟩ + cb |y⟩` with block-diagonal tensors (bond dimensions add).
    pub fn linear_combination(ca: f64, x: &Mps, cb: f64, y: &Mps) -> Mps {
        let n = x.n_sites();
        assert_eq!(n, y.n_sites());
        if n == 1 {
            return Mps { tensors: vec![&x.tensors[0] * ca + &y.tensors[0] * cb], center: None };
        }
        let tensors = (0..n)
            .map(|i| {
                let (a, b) = (&x.tensors[i], &y.tensors[i]);
                let (al, d, ar) = a.dim();
                let (bl, _, br) = b.dim();
                if i == 0 {
                    let mut t = Array3::<f64>::zeros((1, d, ar + br));
                    t.slice_mut(s![.., .., ..ar]).assign(&(a * ca));
                    t.slice_mut(s![.., .., ar..]).assign(&(b * cb));
                    t
                } else if i == n - 1 {
                    let mut t = Array3::<f64>::zeros((al + bl, d, 1));
                    t.slice_mut(s![..al, .., ..]).assign(a);
                    t.slice_mut(s![al.., .., ..]).assign(b);
                    t
                } else {
                    let mut t = Array3::<f64>::zeros((al + bl, d, ar + br));
                    t.slice_mut(s![..al, .., ..ar]).assign(a);
                    t.slice_mut(s![al.., .., ar..]).assign(b);
                    t
                }
            })
            .collect();
        Mps { tensors, center: None }
    }

    /// Truncates every bond to at most `chi` Schmidt values, dropping weight
    /// up to `cut` per bond, and normalizes. Returns the largest discarded
    /// weight. The center ends on the last site.
    pub fn compress(&mut self, cut: f64, chi: usize) -> f64 {
        self.right_canonicalize();
        let n = self.n_sites();
        let mut worst = 0.0f64;
        for i in 0..n - 1 {
            let t = &self.tensors[i];
            let (dl, d, dr) = t.dim();
            let (u, sv, vt) = svd_thin(&t.to_shape((dl * d, dr)).unwrap().into_owned());
            let (keep, discarded) = truncation_rank(&sv, cut, chi);
            worst = worst.max(discarded);
            self.tensors[i] = u.slice(s![.., ..keep]).to_owned().to_shape((dl, d, keep)).unwrap().into_owned();
            let svt = &vt.slice(s![..keep, ..]) * &sv.slice(s![..keep]).insert_axis(Axis(1));
            let next = &self.tensors[i + 1];
            let (_, nd, nr) = next.dim();
            let nm = next.to_shape((dr, nd * nr)).unwrap();
            self.tensors[i + 1] = svt.dot(&nm).to_shape((keep, nd, nr)).unwrap().into_owned();
        }
        let last = &mut self.tensors[n - 1];
        let nrm = last.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nrm > 0.0 {
            last.mapv_inplace(|x| x / nrm);
        }
        self.center = Some(n - 1);
        worst
    }
}

/// `E'(b', k') = Σ A(b,t,b') O(t,s) A(k,s,k') E(b,k)`.
pub(crate) fn transfer(e: &Array2<f64>, a: &Array3<f64>, op: Option<&Array2<f64>>) -> Array2<f64> {
    let (dl, d, dr) = a.dim();
    let am = a.to_shape((dl, d * dr)).unwrap();
    // x(b, s, k')
    let x = e.dot(&am).to_shape((dl, d, dr)).unwrap().into_owned();
    let x = match op {
        None => x,
        Some(o) => {
            let mut y = Array3::<f64>::zeros((dl, d, dr));
            for t in 0..d {
                for s in 0..d {
                    let c = o[[t, s]];
                    if c != 0.0 {
                        y.index_axis_mut(Axis(1), t).scaled_add(c, &x.index_axis(Axis(1), s));
                    }
                }
            }
            y
        }
    };
    let am2 = a.to_shape((dl * d, dr)).unwrap();
    am2.t().dot(&x.to_shape((dl * d, dr)).unwrap())
}

/// `F(b, k) = Σ A(b,s,b') A(k,s,k') F'(b',k')`.
fn transfer_right(f: &Array2<f64>, a: &Array3<f64>) -> Array2<f64> {
    let (dl, d, dr) = a.dim();
    let am = a.to_shape((dl * d, dr)).unwrap();
    // x(k, s, b') = Σ_k' A(k,s,k') F(b',k')
    let x = am.dot(&f.t());
    let x = x.to_shape((dl, d * dr)).unwrap().into_owned();
    let bm = a.to_shape((dl, d * dr)).unwrap();
    bm.dot(&x.t())
}

fn close(e: &Array2<f64>, f: &Array2<f64>) -> f64 {
    (e * f).sum()
}

/// Left environment of an MPO sandwich: `(bra, w, ket)`.
pub(crate) fn mpo_transfer(l: &Array3<f64>, a: &Array3<f64>, w: &Array4<f64>) -> Array3<f64> {
    let (b, wl, k) = l.dim();
    let (_, d, kr) = a.dim();
    let wr = w.shape()[3];
    debug_assert_eq!(a.shape()[0], k);
    // X(b, wl, s, k') = Σ_k L(b,wl,k) A(k,s,k')
    let x = l
        .to_shape((b * wl, k))
        .unwrap()
        .dot(&a.to_shape((k, d * kr)).unwrap())
        .to_shape((b, wl, d, kr)).unwrap().into_owned();
    // Y(b, k', t, wr) = Σ_{wl,s} X(b,wl,s,k') W(wl,t,s,wr)
    let xp = permute(&x, Ix4(0, 3, 1, 2)).to_shape((b * kr, wl * d)).unwrap().into_owned();
    let wp = permute(w, Ix4(0, 2, 1, 3)).to_shape((wl * d, d * wr)).unwrap().into_owned();
    let y = xp.dot(&wp).to_shape((b, kr, d, wr)).unwrap().into_owned();
    // L'(b', wr, k') = Σ_{b,t} A(b,t,b') Y(b,k',t,wr)
    let yp = permute(&y, Ix4(0, 2, 3, 1)).to_shape((b * d, wr * kr)).unwrap().into_owned();
    let bra = a.to_shape((b * d, a.shape()[2])).unwrap();
    let br = bra.ncols();
    bra.t().dot(&yp).to_shape((br, wr, kr)).unwrap().into_owned()
}

/// ⟨ψ|O|ψ⟩ / ⟨ψ|ψ⟩ for an MPO `O`.
pub fn expectation(mps: &Mps, mpo: &Mpo) -> TensorResult<f64> {
    if mps.n_sites() != mpo.n_sites() {
        return Err(TensorError::SiteMismatch { mps: mps.n_sites(), mpo: mpo.n_sites() });
    }
    let mut l = Array3::<f64>::ones((1, 1, 1));
    for (a, w) in mps.tensors.iter().zip(&mpo.tensors) {
        l = mpo_transfer(&l, a, w);
    }
    Ok(l[[0, 0, 0]] / mps.norm_sq())
}

/// ⟨H²⟩ − ⟨H⟩² for normalized expectation values.
pub fn energy_variance(mps: &Mps, mpo: &Mpo) -> TensorResult<f64> {
    if mps.n_sites() != mpo.n_sites() {
        return Err(TensorError::SiteMismatch { mps: mps.n_sites(), mpo: mpo.n_sites() });
    }
    // environment (bra, w_top, w_bottom, ket)
    let mut env = Array4::<f64>::ones((1, 1, 1, 1));
    for (a, w) in mps.tensors.iter().zip(&mpo.tensors) {
        env = double_mpo_transfer(&env, a, w);
    }
    let h2 = env[[0, 0, 0, 0]] / mps.norm_sq();
    let h = expectation(mps, mpo)?;
    Ok(h2 - h * h)
}

fn double_mpo_transfer(env: &Array4<f64>, a: &Array3<f64>, w: &Array4<f64>) -> Array4<f64> {
    let (b, w1, w2, k) = env.dim();
    let (_, d, kr) = a.dim();
    let wr = w.shape()[3];
    let x = env
        .to_shape((b * w1 * w2, k))
        .unwrap()
        .dot(&a.to_shape((k, d * kr)).unwrap())
        .to_shape((b, w1, w2, d, kr)).unwrap().into_owned();
    // bottom layer: contract (w2, s) with W(w2, u, s, w2')
    let xp = x
        .view()
        .permuted_axes([0, 1, 4, 2, 3])
        .as_standard_layout()
        .into_owned()
        .to_shape((b * w1 * kr, w2 * d)).unwrap().into_owned();
    let wp = permute(w, Ix4(0, 2, 1, 3)).to_shape((w2 * d, d * wr)).unwrap().into_owned();
    // y(b, w1, k', u, w2')
    let y = xp.dot(&wp).to_shape((b, w1, kr, d, wr)).unwrap().into_owned();
    // top layer: contract (w1, u) with W(w1, t, u, w1')
    let yp = y
        .view()
        .permuted_axes([0, 2, 4, 1, 3])
        .as_standard_layout()
        .into_owned()
        .to_shape((b * kr * wr, w1 * d)).unwrap().into_owned();
    // z(b, k', w2', t, w1')
    let z = yp.dot(&wp).to_shape((b, kr, wr, d, wr)).unwrap().into_owned();
    // bra: Σ_{b,t} A(b,t,b') z(b,k',w2',t,w1')
    let zp = z
        .view()
        .permuted_axes([0, 3, 4, 2, 1])
        .as_standard_layout()
        .into_owned()
        .to_shape((b * d, wr * wr * kr)).unwrap().into_owned();
    let bra = a.to_shape((b * d, a.shape()[2])).unwrap();
    let br = bra.ncols();
    bra.t().dot(&zp).to_shape((br, wr, wr, kr)).unwrap().into_owned()
}
