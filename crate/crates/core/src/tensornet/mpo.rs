//! Exact matrix-product operator for the chain Hamiltonian.
//!
//! The operator is written as a finite-state machine with lower-triangular
//! site tensors `W[w_left, out, in, w_right]`. Channel 0 means "nothing placed
//! yet" and the last channel means "term complete". The nearest-neighbour part
//! uses the usual three open channels (σᶻ, S⁺, S⁻). The uniform all-to-all
//! part adds two channels that carry Σᵢ S⁺ᵢ and Σᵢ S⁻ᵢ forward with an
//! identity, so the bond dimension stays at 7 for any N (5 when J = 0).

use ndarray::{Array2, Array4};

use super::{TensorError, TensorResult};
use crate::model::{Boundary, ModelParams};

pub const PHYS_DIM: usize = 2;

/// Local operators in the (↓, ↑) = (0, 1) basis.
pub mod ops {
    use ndarray::{array, Array2};

    pub fn identity() -> Array2<f64> {
        Array2::eye(2)
    }
    pub fn sigma_z() -> Array2<f64> {
        array![[-1.0, 0.0], [0.0, 1.0]]
    }
    /// S⁺ = |↑⟩⟨↓|
    pub fn s_plus() -> Array2<f64> {
        array![[0.0, 0.0], [1.0, 0.0]]
    }
    /// S⁻ = |↓⟩⟨↑|
    pub fn s_minus() -> Array2<f64> {
        array![[0.0, 1.0], [0.0, 0.0]]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mpo {
    /// `(w_left, out, in, w_right)`; the first tensor has `w_left = 1` and the
    /// last has `w_right = 1`.
    pub tensors: Vec<Array4<f64>>,
}

impl Mpo {
    pub fn n_sites(&self) -> usize {
        self.tensors.len()
    }

    /// Largest internal bond dimension.
    pub fn bond_dim(&self) -> usize {
        self.tensors.iter().map(|w| w.shape()[3]).max().unwrap_or(1).max(
            self.tensors.iter().map(|w| w.shape()[0]).max().unwrap_or(1),
        )
    }

    /// Contracts the operator into a `2^N × 2^N` matrix (site 0 is the
    /// least-significant bit). Only sensible for small N.
    pub fn to_dense(&self) -> Array2<f64> {
        let n = self.n_sites();
        // acc[(w, out, in)] over the sites contracted so far
        let first = &self.tensors[0];
        let w0 = first.shape()[3];
        let mut acc = vec![0.0; w0 * 2 * 2];
        let mut dim = 2usize;
        for o in 0..2 {
            for i in 0..2 {
                for w in 0..w0 {
                    acc[(w * dim + o) * dim + i] = first[[0, o, i, w]];
                }
            }
        }
        let mut wl = w0;
        for site in 1..n {
            let t = &self.tensors[site];
            let wr = t.shape()[3];
            let nd = dim * 2;
            let mut next = vec![0.0; wr * nd * nd];
            for w in 0..wl {
                for w2 in 0..wr {
                    for o in 0..2 {
                        for i in 0..2 {
                            let c = t[[w, o, i, w2]];
                            if c == 0.0 {
                                continue;
                            }
                            for po in 0..dim {
                                for pi in 0..dim {
                                    let v = acc[(w * dim + po) * dim + pi];
                                    if v != 0.0 {
                                        let no = po + o * dim;
                                        let ni = pi + i * dim;
                                        next[(w2 * nd + no) * nd + ni] += c * v;
                                    }
                                }
                            }
                        }
                    }
                }
            }
            acc = next;
            dim = nd;
            wl = wr;
        }
        assert_eq!(wl, 1);
        Array2::from_shape_vec((dim, dim), acc).unwrap()
    }
}

/// MPO of the open-chain Hamiltonian.
pub fn build_mpo(p: &ModelParams) -> TensorResult<Mpo> {
    build_pinned_mpo(p, 0.0)
}

/// Same as [`build_mpo`] plus an on-site term `−h σᶻ` on the first site.
pub fn build_pinned_mpo(p: &ModelParams, pin_field: f64) -> TensorResult<Mpo> {
    p.validate().map_err(|e| TensorError::InvalidParams(e.to_string()))?;
    if p.boundary != Boundary::Open {
        return Err(TensorError::InvalidParams("the MPO supports open chains only".into()));
    }
    let n = p.n_sites;
    let long_range = p.j_lr != 0.0;
    let w = if long_range { 7 } else { 5 };
    let done = w - 1;
    let (id, sz, sp, sm) = (ops::identity(), ops::sigma_z(), ops::s_plus(), ops::s_minus());
    let c_lr = p.j_lr / (2.0 * n as f64);
    let c_nn = -0.5 * p.alpha;

    let bulk = |onsite: f64| {
        let mut t = Array4::<f64>::zeros((w, 2, 2, w));
        let mut put = |a: usize, b: usize, op: &Array2<f64>, c: f64| {
            for o in 0..2 {
                for i in 0..2 {
                    t[[a, o, i, b]] += c * op[[o, i]];
                }
            }
        };
        put(0, 0, &id, 1.0);
        put(0, 1, &sz, 1.0);
        put(0, 2, &sp, 1.0);
        put(0, 3, &sm, 1.0);
        put(1, done, &sz, -0.25);
        put(2, done, &sm, c_nn);
        put(3, done, &sp, c_nn);
        if long_range {
            put(0, 4, &sp, 1.0);
            put(0, 5, &sm, 1.0);
            put(4, 4, &id, 1.0);
            put(5, 5, &id, 1.0);
            put(4, done, &sm, c_lr);
            put(5, done, &sp, c_lr);
        }
        if onsite != 0.0 {
            put(0, done, &sz, -onsite);
        }
        put(done, done, &id, 1.0);
        t
    };

    let mut tensors = Vec::with_capacity(n);
    for site in 0..n {
        let t = bulk(if site == 0 { pin_field } else { 0.0 });
        let t = if site == 0 { t.slice(ndarray::s![0..1, .., .., ..]).to_owned() } else { t };
        let t = if site == n - 1 { t.slice(ndarray::s![.., .., .., done..done + 1]).to_owned() } else { t };
        tensors.push(t);
    }
    Ok(Mpo { tensors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_dense_hamiltonian;

    #[test]
    fn contraction_matches_dense_hamiltonian() {
        for n in 2..=6 {
            for &a in &[0.0, 0.9, 1.7] {
                for &j in &[-0.8, 0.0, 1.3] {
                    let p = ModelParams::new(a, j, n).unwrap();
                    let dense = build_dense_hamiltonian(&p).unwrap();
                    let mpo = build_mpo(&p).unwrap().to_dense();
                    let err = (&dense - &mpo).iter().fold(0.0f64, |m, x| m.max(x.abs()));
                    assert!(err <= 1e-12, "n={n} a={a} j={j} err={err}");
                }
            }
        }
    }

    #[test]
    fn bond_dimensions() {
        let p = ModelParams::new(1.0, 0.0, 10).unwrap();
        assert_eq!(build_mpo(&p).unwrap().bond_dim(), 5);
        let p = ModelParams::new(1.0, 0.4, 40).unwrap();
        assert_eq!(build_mpo(&p).unwrap().bond_dim(), 7);
    }

    #[test]
    fn ising_limit_is_diagonal() {
        let p = ModelParams::new(0.0, 0.0, 5).unwrap();
        let h = build_mpo(&p).unwrap().to_dense();
        for r in 0..h.nrows() {
            for c in 0..h.ncols() {
                if r != c {
                    assert_eq!(h[[r, c]], 0.0);
                }
            }
        }
    }

    #[test]
    fn pinning_shifts_first_site() {
        let p = ModelParams::new(0.7, 0.3, 3).unwrap();
        let h0 = build_mpo(&p).unwrap().to_dense();
        let h1 = build_pinned_mpo(&p, 0.1).unwrap().to_dense();
        for s in 0..8 {
            let z0 = if s & 1 == 1 { 1.0 } else { -1.0 };
            assert!((h1[[s, s]] - h0[[s, s]] + 0.1 * z0).abs() < 1e-15);
        }
    }

    #[test]
    fn periodic_rejected() {
        let p = ModelParams::periodic(1.0, 0.0, 4).unwrap();
        assert!(matches!(build_mpo(&p), Err(TensorError::InvalidParams(_))));
    }
}
