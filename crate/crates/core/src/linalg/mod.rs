//! Dense and sparse kernels shared by every solver: SPD direct and iterative
//! solves, Jacobi eigen/SVD, power-iteration norm estimates and the choice
//! between the `m x m` and `n x n` inner systems.

mod dense;
mod design;
mod eigen;
mod solve;
mod sparse;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use dense::{axpy, dot, norm2, norm_inf, scale, sub, DenseMatrix};
pub use design::Design;
pub use eigen::{psd_power, Svd, SymmetricEigen};
pub use solve::{
    cg_solve, cholesky_solve, default_cg_iterations, Cholesky, SpdSolveReport, CG_DEFAULT_TOL,
    DENSE_DIRECT_LIMIT,
};
pub use sparse::SparseMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not symmetric positive definite (pivot {pivot})")]
    NotSpd { pivot: usize },
    #[error("matrix is not symmetric")]
    NotSymmetric,
    #[error("non-finite value encountered")]
    NonFinite,
    #[error("index ({row}, {col}) out of bounds")]
    IndexOutOfBounds { row: usize, col: usize },
    #[error("column indices not strictly increasing in row {row}")]
    UnsortedIndices { row: usize },
    #[error("conjugate gradient stalled at relative residual {residual:e}")]
    NotConverged { residual: f64 },
}

/// Which inner linear system to solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// `m x m` system on the dual variable.
    DualM,
    /// `n x n` system on the primal variable.
    PrimalN,
}

/// Picks the smaller of the two inner systems; ties go to the dual side.
pub fn woodbury_side(m: usize, n: usize) -> Side {
    if m <= n {
        Side::DualM
    } else {
        Side::PrimalN
    }
}

/// Like [`woodbury_side`], but a constrained problem (`lambda == 0`) has no
/// primal system and always goes dual.
pub fn woodbury_side_for(m: usize, n: usize, lambda: f64) -> Side {
    if lambda == 0.0 {
        Side::DualM
    } else {
        woodbury_side(m, n)
    }
}

const NORM_ESTIMATE_SEED: u64 = 0x5eed_2021;

/// Power iteration on `A^T A`, returning an estimate of the spectral norm
/// `||A||`. Deterministic: the start vector comes from a fixed seed.
pub fn operator_norm_estimate<F, G>(
    mut apply_a: F,
    mut apply_at: G,
    cols: usize,
    iters: usize,
) -> f64
where
    F: FnMut(&[f64]) -> Vec<f64>,
    G: FnMut(&[f64]) -> Vec<f64>,
{
    if cols == 0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(NORM_ESTIMATE_SEED);
    let mut x: Vec<f64> = (0..cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    let nx = norm2(&x);
    x.iter_mut().for_each(|v| *v /= nx);
    let mut estimate = 0.0;
    for _ in 0..iters.max(1) {
        let ax = apply_a(&x);
        estimate = norm2(&ax);
        let w = apply_at(&ax);
        let nw = norm2(&w);
        if nw == 0.0 {
            return 0.0;
        }
        x = w.into_iter().map(|v| v / nw).collect();
    }
    let ax = apply_a(&x);
    norm2(&ax).max(estimate)
}

/// Spectral norm estimate of a design matrix with 100 power iterations.
pub fn design_norm(x: &Design) -> f64 {
    operator_norm_estimate(|v| x.matvec(v), |v| x.matvec_t(v), x.cols(), 100)
}

/// Solves `A x_c = b_c` for each right-hand side.
///
/// Positive definite systems up to [`DENSE_DIRECT_LIMIT`] are factored once by
/// Cholesky. With `singular_ok` (the constrained path) CG from the zero start
/// is used instead, and a non-converged solve is an error.
pub fn solve_spd_multi(
    a: &DenseMatrix,
    rhs: &[Vec<f64>],
    singular_ok: bool,
) -> Result<Vec<SpdSolveReport>, LinalgError> {
    let n = a.rows();
    if !singular_ok && n <= DENSE_DIRECT_LIMIT {
        let chol = Cholesky::factor(a)?;
        return rhs
            .iter()
            .map(|b| {
                let x = chol.solve(b)?;
                let r = sub(&a.matvec(&x), b);
                let bn = norm2(b);
                Ok(SpdSolveReport {
                    relative_residual: if bn > 0.0 { norm2(&r) / bn } else { norm2(&r) },
                    solution: x,
                    iterations: 0,
                    converged: true,
                })
            })
            .collect();
    }
    rhs.iter()
        .map(|b| {
            let rep = cg_solve(|x| a.matvec(x), b, CG_DEFAULT_TOL, default_cg_iterations(n))?;
            if rep.converged {
                Ok(rep)
            } else {
                Err(LinalgError::NotConverged {
                    residual: rep.relative_residual,
                })
            }
        })
        .collect()
}
