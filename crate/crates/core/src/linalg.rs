//! Lanczos extremal eigensolver shared by exact diagonalization and the DMRG
//! local problem.

use ndarray::Array2;
use ndarray_linalg::{Eigh, UPLO};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LanczosError {
    #[error("Lanczos did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("start vector has zero norm")]
    ZeroStart,
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct LanczosOptions {
    /// Stop when ‖Hv − Ev‖ falls below this.
    pub tol: f64,
    /// Total matrix-vector products allowed, across restarts.
    pub max_iter: usize,
    /// Krylov dimension before restarting from the current Ritz vector.
    pub krylov_dim: usize,
    /// Return the best Ritz pair instead of an error when `max_iter` runs out.
    pub accept_unconverged: bool,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 500, krylov_dim: 100, accept_unconverged: false }
    }
}

#[derive(Clone, Debug)]
pub struct Eigenpair {
    pub value: f64,
    pub vector: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Lowest eigenpair of the symmetric operator `matvec`, with full
/// reorthogonalization and restarts from the current Ritz vector.
pub fn lowest_eigenpair<F>(
    dim: usize,
    mut matvec: F,
    start: &[f64],
    opts: &LanczosOptions,
) -> Result<Eigenpair, LanczosError>
where
    F: FnMut(&[f64], &mut [f64]),
{
    assert_eq!(start.len(), dim);
    let n0 = norm(start);
    if n0 == 0.0 || !n0.is_finite() {
        return Err(LanczosError::ZeroStart);
    }
    let mut v: Vec<f64> = start.iter().map(|x| x / n0).collect();
    let mut iterations = 0;
    let mut best = Eigenpair { value: f64::INFINITY, vector: v.clone(), residual: f64::INFINITY, iterations: 0 };

    loop {
        let m_cap = opts.krylov_dim.min(dim).max(1);
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m_cap + 1);
        let mut alphas: Vec<f64> = Vec::with_capacity(m_cap);
        let mut betas: Vec<f64> = Vec::with_capacity(m_cap);
        basis.push(v.clone());
        let mut w = vec![0.0; dim];
        let mut ritz: Option<(f64, Vec<f64>, f64)> = None;

        for j in 0..m_cap {
            matvec(&basis[j], &mut w);
            iterations += 1;
            let a = dot(&w, &basis[j]);
            alphas.push(a);
            // two passes of classical Gram-Schmidt against the whole basis
            for _ in 0..2 {
                for q in &basis {
                    let c = dot(&w, q);
                    axpy(-c, q, &mut w);
                }
            }
            let b = norm(&w);
            betas.push(b);

            let (theta, y) = tridiagonal_lowest(&alphas, &betas[..betas.len() - 1]);
            let res = b * y[j].abs();
            let exhausted = b <= 1e-14 * a.abs().max(1.0) || j + 1 == dim;
            if res <= opts.tol || exhausted || j + 1 == m_cap || iterations >= opts.max_iter {
                ritz = Some((theta, y, res));
                break;
            }
            basis.push(w.iter().map(|x| x / b).collect());
        }

        let (theta, y, res) = ritz.expect("at least one Lanczos step");
        let mut x = vec![0.0; dim];
        for (coef, q) in y.iter().zip(&basis) {
            axpy(*coef, q, &mut x);
        }
        let nx = norm(&x);
        x.iter_mut().for_each(|xi| *xi /= nx);
        if theta <= best.value || res < best.residual {
            best = Eigenpair { value: theta, vector: x.clone(), residual: res, iterations };
        }
        if res <= opts.tol {
            return Ok(Eigenpair { value: theta, vector: x, residual: res, iterations });
        }
        if iterations >= opts.max_iter {
            if opts.accept_unconverged {
                best.iterations = iterations;
                return Ok(best);
            }
            return Err(LanczosError::NoConvergence { iterations, residual: res });
        }
        v = x;
    }
}

/// Lowest eigenpair of the symmetric tridiagonal matrix with diagonal
/// `alphas` and off-diagonal `betas`.
fn tridiagonal_lowest(alphas: &[f64], betas: &[f64]) -> (f64, Vec<f64>) {
    let m = alphas.len();
    if m == 1 {
        return (alphas[0], vec![1.0]);
    }
    let mut t = Array2::<f64>::zeros((m, m));
    for i in 0..m {
        t[[i, i]] = alphas[i];
        if i + 1 < m {
            t[[i, i + 1]] = betas[i];
            t[[i + 1, i]] = betas[i];
        }
    }
    let (e, v) = t.eigh(UPLO::Lower).expect("tridiagonal eigh");
    (e[0], v.column(0).to_vec())
}
