use super::{require_positive_lambda, trace_objective, BaselineError, Budget, Recorder, SolverTrace};
use crate::linalg::{psd_power, Cholesky, DenseMatrix, SymmetricEigen};
use crate::problems::{MultiTaskProblem, Problem};
use crate::regularizers::{dense_to_column_major, GroupStructure, Regularizer};
use crate::varpro::{evaluate, Route};

/// `η_g = sqrt(||β_g||² + ε)`.
pub fn irls_eta_update(groups: &GroupStructure, beta: &[f64], eps: f64, targets: usize) -> Vec<f64> {
    groups
        .group_sq_norms(beta, targets)
        .into_iter()
        .map(|s| (s + eps).sqrt())
        .collect()
}

/// Alternates the weighted ridge step in `β` at fixed `η` (the inner system
/// with `v = √η`) and the closed-form `η` step, for a fixed `ε`.
pub fn irls_vector(
    prob: &Problem,
    eps: f64,
    budget: Budget,
) -> Result<SolverTrace, BaselineError> {
    require_positive_lambda(prob, "irls")?;
    if !(eps > 0.0) {
        return Err(BaselineError::InvalidParameter(format!(
            "irls needs eps > 0, got {eps}"
        )));
    }
    if !matches!(prob.regularizer(), Regularizer::L1 | Regularizer::GroupL2(_)) {
        return Err(BaselineError::Unsupported(
            "irls handles the l1 and group families".into(),
        ));
    }
    let mut rec = Recorder::new("irls", budget);
    rec.param("eps", eps);
    let mut eta: Vec<f64> = vec![1.0; prob.outer_dim()];
    let mut beta = vec![0.0; prob.n_features() * prob.targets()];
    rec.record(0, trace_objective(prob, &beta));
    let mut k = 1;
    while rec.may_continue(k) {
        let v: Vec<f64> = eta.iter().map(|e| e.sqrt()).collect();
        beta = evaluate(prob, &v, Route::Auto)?.beta;
        eta = irls_eta_update(prob.groups(), &beta, eps, prob.targets());
        rec.record(k, trace_objective(prob, &beta));
        k += 1;
    }
    Ok(rec.finish(beta, None))
}

/// `Z = (BBᵀ + εI)^{1/2}`. The shift is applied to the eigenvalues of `BBᵀ`
/// so the `√ε` floor survives rounding when `‖B‖² ≫ ε`.
pub fn irls_z_update(b: &DenseMatrix, eps: f64) -> DenseMatrix {
    let bbt = b.matmul(&b.transpose());
    SymmetricEigen::new(&bbt).map(|x| (x.max(0.0) + eps).sqrt())
}

/// Trace-norm IRLS. With `S = Z^{1/2}` the `B` step solves, per task,
/// `(λI + S X_tᵀX_t S) c_t = S X_tᵀ y_t` and sets `B_t = S c_t`; the `Z` step
/// is [`irls_z_update`].
pub fn irls_matrix(
    mt: &MultiTaskProblem,
    lambda: f64,
    eps: f64,
    budget: Budget,
) -> Result<SolverTrace, BaselineError> {
    if !(eps > 0.0 && lambda > 0.0) {
        return Err(BaselineError::InvalidParameter(format!(
            "irls needs eps > 0 and lambda > 0, got eps = {eps}, lambda = {lambda}"
        )));
    }
    let mut rec = Recorder::new("irls", budget);
    rec.param("eps", eps);
    let n = mt.n_features();
    let t_count = mt.task_count();
    let mut z = DenseMatrix::identity(n);
    let mut b = DenseMatrix::zeros(n, t_count);
    rec.record(0, mt.objective(&b, lambda));
    let mut k = 1;
    while rec.may_continue(k) {
        let s = psd_power(&z, 0.5);
        for (t, task) in mt.tasks().iter().enumerate() {
            let xs = task.x.matmul(&s);
            let mut sys = xs.gram();
            sys.add_diag(lambda);
            let c = Cholesky::factor(&sys)?.solve(&xs.matvec_t(&task.y))?;
            let bt = s.matvec(&c);
            for (i, val) in bt.into_iter().enumerate() {
                b.set(i, t, val);
            }
        }
        z = irls_z_update(&b, eps);
        rec.record(k, mt.objective(&b, lambda));
        k += 1;
    }
    let min_eig = SymmetricEigen::new(&z).min();
    rec.param("final_z_min_eigenvalue", min_eig);
    Ok(rec.finish(dense_to_column_major(&b), None))
}
