use super::dense::{axpy, dot, norm2};
use super::{DenseMatrix, LinalgError};

/// Default relative tolerance for conjugate gradient.
pub const CG_DEFAULT_TOL: f64 = 1e-10;

/// Largest system solved by dense Cholesky when the matrix is materialized.
pub const DENSE_DIRECT_LIMIT: usize = 2000;

/// Outcome of an SPD solve.
#[derive(Clone, Debug, PartialEq)]
pub struct SpdSolveReport {
    pub solution: Vec<f64>,
    /// 0 for direct solves.
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

/// Lower-triangular Cholesky factor `A = L L^T`.
#[derive(Clone, Debug)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    pub fn factor(a: &DenseMatrix) -> Result<Self, LinalgError> {
        let n = a.rows();
        if a.cols() != n {
            return Err(LinalgError::DimensionMismatch {
                expected: n,
                found: a.cols(),
            });
        }
        if !a.is_symmetric(1e-10) {
            return Err(LinalgError::NotSymmetric);
        }
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut d = a.get(j, j);
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if d <= 0.0 || !d.is_finite() {
                return Err(LinalgError::NotSpd { pivot: j });
            }
            let d = d.sqrt();
            l[j * n + j] = d;
            for i in (j + 1)..n {
                let mut s = a.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / d;
            }
        }
        Ok(Self { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        let n = self.n;
        if b.len() != n {
            return Err(LinalgError::DimensionMismatch {
                expected: n,
                found: b.len(),
            });
        }
        let mut z = b.to_vec();
        for i in 0..n {
            let mut s = z[i];
            for k in 0..i {
                s -= self.l[i * n + k] * z[k];
            }
            z[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for k in (i + 1)..n {
                s -= self.l[k * n + i] * z[k];
            }
            z[i] = s / self.l[i * n + i];
        }
        Ok(z)
    }

    /// Inverse of the factored matrix.
    pub fn inverse(&self) -> DenseMatrix {
        let n = self.n;
        let mut inv = DenseMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|x| *x = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e).expect("dimension checked");
            for (i, c) in col.into_iter().enumerate() {
                inv.set(i, j, c);
            }
        }
        inv
    }
}

/// Solves `A x = b` for symmetric positive definite `A` by Cholesky.
pub fn cholesky_solve(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    if b.len() != a.rows() {
        return Err(LinalgError::DimensionMismatch {
            expected: a.rows(),
            found: b.len(),
        });
    }
    Cholesky::factor(a)?.solve(b)
}

/// Conjugate gradient for a symmetric positive semidefinite operator.
///
/// Starting from zero keeps the iterates in the range of `A`, so a consistent
/// singular system returns a solution. When `max_iter` is hit, the
/// minimum-residual iterate is returned with `converged = false`.
pub fn cg_solve<F>(
    mut apply_a: F,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<SpdSolveReport, LinalgError>
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    let n = b.len();
    let b_norm = norm2(b);
    if b.iter().any(|x| !x.is_finite()) {
        return Err(LinalgError::NonFinite);
    }
    if b_norm == 0.0 {
        return Ok(SpdSolveReport {
            solution: vec![0.0; n],
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        });
    }
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let mut best = (x.clone(), 1.0);
    for it in 1..=max_iter {
        let ap = apply_a(&p);
        if ap.len() != n {
            return Err(LinalgError::DimensionMismatch {
                expected: n,
                found: ap.len(),
            });
        }
        let pap = dot(&p, &ap);
        if !pap.is_finite() {
            return Err(LinalgError::NonFinite);
        }
        if pap <= 0.0 {
            // Direction in the null space: nothing left to reduce.
            break;
        }
        let step = rr / pap;
        axpy(step, &p, &mut x);
        axpy(-step, &ap, &mut r);
        // Recompute the true residual periodically to limit drift.
        if it % 50 == 0 {
            let ax = apply_a(&x);
            r = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        }
        let rr_new = dot(&r, &r);
        if !rr_new.is_finite() {
            return Err(LinalgError::NonFinite);
        }
        let rel = rr_new.sqrt() / b_norm;
        if rel < best.1 {
            best = (x.clone(), rel);
        }
        if rel <= tol {
            return Ok(SpdSolveReport {
                solution: x,
                iterations: it,
                relative_residual: rel,
                converged: true,
            });
        }
        let beta = rr_new / rr;
        rr = rr_new;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
    }
    // Report the true residual of the best iterate.
    let (x, _) = best;
    let ax = apply_a(&x);
    let res: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let rel = norm2(&res) / b_norm;
    Ok(SpdSolveReport {
        solution: x,
        iterations: max_iter,
        relative_residual: rel,
        converged: rel <= tol,
    })
}

/// Default iteration cap for CG on an `n`-dimensional system.
pub fn default_cg_iterations(n: usize) -> usize {
    10 * n + 100
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let m = DenseMatrix::new(n, n, data).unwrap();
        let mut a = m.gram();
        a.add_diag(1.0);
        a
    }

    fn residual(a: &DenseMatrix, x: &[f64], b: &[f64]) -> f64 {
        let ax = a.matvec(x);
        norm2(&ax.iter().zip(b).map(|(p, q)| p - q).collect::<Vec<_>>())
    }

    #[test]
    fn cholesky_identity_and_diagonal() {
        let x = cholesky_solve(&DenseMatrix::identity(3), &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(x, vec![1.0, 2.0, 3.0]);
        let x = cholesky_solve(&DenseMatrix::from_diag(&[4.0, 9.0]), &[4.0, 9.0]).unwrap();
        assert_eq!(x, vec![1.0, 1.0]);
    }

    #[test]
    fn cholesky_random_residual() {
        let a = random_spd(8, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let b: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = cholesky_solve(&a, &b).unwrap();
        assert!(residual(&a, &x, &b) <= 1e-8 * (1.0 + norm2(&b)));
    }

    #[test]
    fn cholesky_errors() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(matches!(
            cholesky_solve(&a, &[1.0, 1.0]),
            Err(LinalgError::NotSpd { pivot: 1 })
        ));
        assert!(matches!(
            cholesky_solve(&DenseMatrix::identity(2), &[1.0]),
            Err(LinalgError::DimensionMismatch { .. })
        ));
        let asym = DenseMatrix::from_rows(&[vec![1.0, 0.5], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(
            cholesky_solve(&asym, &[1.0, 1.0]),
            Err(LinalgError::NotSymmetric)
        ));
    }

    #[test]
    fn cg_identity_one_iteration() {
        let b = vec![1.0, -2.0, 0.5];
        let rep = cg_solve(|x| x.to_vec(), &b, 1e-12, 10).unwrap();
        assert_eq!(rep.iterations, 1);
        assert!(rep.converged);
        assert_eq!(rep.solution, b);
    }

    #[test]
    fn cg_two_eigenvalues() {
        let a = DenseMatrix::from_diag(&[1.0, 10.0]);
        let rep = cg_solve(|x| a.matvec(x), &[1.0, 10.0], 1e-10, 10).unwrap();
        assert!(rep.iterations <= 2);
        assert!((rep.solution[0] - 1.0).abs() < 1e-10);
        assert!((rep.solution[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn cg_singular_consistent() {
        let a = DenseMatrix::from_diag(&[1.0, 0.0]);
        let rep = cg_solve(|x| a.matvec(x), &[1.0, 0.0], 1e-12, 10).unwrap();
        assert!(rep.converged);
        assert_eq!(a.matvec(&rep.solution), vec![1.0, 0.0]);
    }

    #[test]
    fn cg_flags_non_finite() {
        let res = cg_solve(|x| x.iter().map(|_| f64::NAN).collect(), &[1.0], 1e-10, 5);
        assert!(matches!(res, Err(LinalgError::NonFinite)));
    }

    #[test]
    fn cg_matches_cholesky_on_random_systems() {
        for (seed, n) in [(1u64, 5usize), (2, 20), (3, 50)] {
            let a = random_spd(n, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
            let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let x1 = cholesky_solve(&a, &b).unwrap();
            let rep = cg_solve(|x| a.matvec(x), &b, CG_DEFAULT_TOL, 10 * n).unwrap();
            assert!(rep.converged);
            assert!(residual(&a, &rep.solution, &b) <= 1e-8 * (1.0 + norm2(&b)));
            let diff: Vec<f64> = x1.iter().zip(&rep.solution).map(|(p, q)| p - q).collect();
            assert!(norm2(&diff) <= 1e-6 * norm2(&x1));
        }
    }
}
