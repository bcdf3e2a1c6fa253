//! Matrix-product states, the exact long-range MPO and a two-site DMRG
//! ground-state solver.

mod checkpoint;
mod dmrg;
mod mpo;
mod mps;

pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use dmrg::{
    dmrg_from_state, dmrg_ground_state, ground_state, DmrgConfig, DmrgReport, GroundStateRun,
    FM_PIN_FIELD,
};
pub use mpo::{build_mpo, build_pinned_mpo, ops, Mpo, PHYS_DIM};
pub use mps::{energy_variance, expectation, random_mps, Mps};

use ndarray::{Array, Array1, Array2, ArrayBase, Data, Dimension};
use ndarray_linalg::{JobSvd, SVDDC};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("bond {bond} outside 1..={max}")]
    InvalidBond { bond: usize, max: usize },
    #[error("site count mismatch: MPS has {mps}, MPO has {mpo}")]
    SiteMismatch { mps: usize, mpo: usize },
    #[error("DMRG did not converge within {0} sweeps")]
    NotConverged(usize),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

pub type TensorResult<T> = Result<T, TensorError>;

/// Copy of `a` with axes reordered, in standard layout.
pub(crate) fn permute<S, D>(a: &ArrayBase<S, D>, axes: D) -> Array<f64, D>
where
    S: Data<Elem = f64>,
    D: Dimension,
{
    a.view().permuted_axes(axes).as_standard_layout().into_owned()
}

/// Thin SVD `a = u · diag(s) · vt`.
pub(crate) fn svd_thin(a: &Array2<f64>) -> (Array2<f64>, Array1<f64>, Array2<f64>) {
    let (u, s, vt) = a.svddc(JobSvd::Some).expect("SVD failed");
    (u.unwrap(), s, vt.unwrap())
}

/// Number of singular values to keep so the discarded weight stays within
/// `cut` (relative to the total) and at most `max_keep` are kept. Returns
/// `(keep, discarded_weight)`.
pub(crate) fn truncation_rank(s: &Array1<f64>, cut: f64, max_keep: usize) -> (usize, f64) {
    let total: f64 = s.iter().map(|x| x * x).sum();
    if total == 0.0 {
        return (1, 0.0);
    }
    let mut keep = s.len();
    let mut tail = 0.0;
    while keep > 1 {
        let w = s[keep - 1] * s[keep - 1] / total;
        if tail + w > cut {
            break;
        }
        tail += w;
        keep -= 1;
    }
    if keep > max_keep {
        tail += s.iter().skip(max_keep).take(keep - max_keep).map(|x| x * x / total).sum::<f64>();
        keep = max_keep;
    }
    (keep, tail)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn truncation_rank_respects_cut_and_cap() {
        let s = array![0.9f64.sqrt(), 0.09f64.sqrt(), 0.009f64.sqrt(), 0.001f64.sqrt()];
        assert_eq!(truncation_rank(&s, 0.0, 10).0, 4);
        let (k, d) = truncation_rank(&s, 0.002, 10);
        assert_eq!(k, 3);
        assert!((d - 0.001).abs() < 1e-12);
        let (k, d) = truncation_rank(&s, 0.0, 2);
        assert_eq!(k, 2);
        assert!((d - 0.01).abs() < 1e-12);
    }
}
