use super::VarProError;
use crate::linalg::{dot, sub, woodbury_side, Cholesky, DenseMatrix, Side};
use crate::problems::MultiTaskProblem;

/// Trace-norm projected function at `V` (`n x r`), with `B = V U`.
#[derive(Clone, Debug)]
pub struct MatrixVarProState {
    pub f: f64,
    /// `n x r`.
    pub grad: DenseMatrix,
    /// `r x T`; column `t` solves `(λI + VᵀX_tᵀX_tV) u_t = VᵀX_tᵀy_t`.
    pub u: DenseMatrix,
    /// `n x T`.
    pub b: DenseMatrix,
}

/// `f(V) = ½||U||² + ½||V||² + 1/(2λ) Σ_t ||X_t V u_t - y_t||²` with `U`
/// eliminated, and `∇f = V + (1/λ) Σ_t X_tᵀ r_t u_tᵀ`.
pub fn evaluate_matrix(
    mt: &MultiTaskProblem,
    v: &DenseMatrix,
    lambda: f64,
) -> Result<MatrixVarProState, VarProError> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(VarProError::Unsupported(
            "trace norm needs lambda > 0".into(),
        ));
    }
    let n = mt.n_features();
    if v.rows() != n {
        return Err(VarProError::DimensionMismatch {
            expected: n,
            found: v.rows(),
        });
    }
    let r = v.cols();
    let t_count = mt.task_count();
    let mut u = DenseMatrix::zeros(r, t_count);
    let mut loss = 0.0;
    let mut grad = v.clone();
    for (t, task) in mt.tasks().iter().enumerate() {
        let a = task.x.matmul(v);
        let ut = match woodbury_side(a.rows(), r) {
            Side::PrimalN => {
                let mut sys = a.gram();
                sys.add_diag(lambda);
                Cholesky::factor(&sys)?.solve(&a.matvec_t(&task.y))?
            }
            Side::DualM => {
                let mut sys = a.weighted_outer_gram(&vec![1.0; r]);
                sys.add_diag(lambda);
                let neg_y: Vec<f64> = task.y.iter().map(|y| -y).collect();
                let alpha = Cholesky::factor(&sys)?.solve(&neg_y)?;
                a.matvec_t(&alpha).iter().map(|x| -x).collect()
            }
        };
        let res = sub(&a.matvec(&ut), &task.y);
        loss += dot(&res, &res);
        let xr = task.x.matvec_t(&res);
        for i in 0..n {
            for k in 0..r {
                grad.add_to(i, k, xr[i] * ut[k] / lambda);
            }
        }
        for (k, val) in ut.into_iter().enumerate() {
            u.set(k, t, val);
        }
    }
    let uf = u.frobenius_norm();
    let vf = v.frobenius_norm();
    let f = 0.5 * uf * uf + 0.5 * vf * vf + loss / (2.0 * lambda);
    let b = v.matmul(&u);
    Ok(MatrixVarProState { f, grad, u, b })
}

pub fn f_and_grad_matrix(
    mt: &MultiTaskProblem,
    v: &DenseMatrix,
    lambda: f64,
) -> Result<(f64, DenseMatrix), VarProError> {
    let s = evaluate_matrix(mt, v, lambda)?;
    Ok((s.f, s.grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::Task;

    #[test]
    fn scalar_reduction() {
        let mt = MultiTaskProblem::new(vec![Task {
            x: DenseMatrix::from_rows(&[vec![1.0]]).unwrap(),
            y: vec![2.0],
        }])
        .unwrap();
        let (f, g) = f_and_grad_matrix(&mt, &DenseMatrix::identity(1), 1.0).unwrap();
        assert!((f - 1.5).abs() < 1e-14);
        assert!(g.get(0, 0).abs() < 1e-14);
        let s = evaluate_matrix(&mt, &DenseMatrix::zeros(1, 1), 1.0).unwrap();
        assert_eq!(s.u.get(0, 0), 0.0);
        assert_eq!(s.grad.get(0, 0), 0.0);
    }
}
