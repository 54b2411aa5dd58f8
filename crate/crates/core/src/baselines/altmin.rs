use super::{
    require_norm_family, require_positive_lambda, trace_objective, BaselineError, Budget,
    Recorder, SolverTrace,
};
use crate::linalg::{dot, Cholesky, DenseMatrix};
use crate::problems::Problem;
use crate::varpro::{evaluate, recover_beta_primal, Route};

/// `½||v||² + ½||u||² + 1/(2λ)||X(v̄ ⊙ u) - y||²`.
pub fn joint_objective(prob: &Problem, v: &[f64], u: &[f64]) -> f64 {
    let r = prob.residual(&recover_beta_primal(prob, v, u));
    0.5 * dot(v, v) + 0.5 * dot(u, u) + dot(&r, &r) / (2.0 * prob.lambda())
}

/// `u = -v̄ ⊙ Xᵀα`, the exact minimizer in `u` at fixed `v`.
fn u_step(prob: &Problem, v: &[f64]) -> Result<Vec<f64>, BaselineError> {
    let s = evaluate(prob, v, Route::Auto)?;
    let vbar = prob.groups().expand(v);
    let n = vbar.len();
    Ok(match (s.u, s.xi) {
        (Some(u), _) => u,
        (None, Some(xi)) => xi
            .iter()
            .enumerate()
            .map(|(i, x)| -vbar[i % n] * x)
            .collect(),
        (None, None) => unreachable!("lambda > 0 populates xi"),
    })
}

/// Exact minimizer in `v` at fixed `u`: a ridge regression on the columns
/// `z_g = X_g u_g` (stacked over targets).
fn v_step(prob: &Problem, u: &[f64]) -> Result<Vec<f64>, BaselineError> {
    let groups = prob.groups();
    let (m, n, q) = (prob.n_samples(), prob.n_features(), prob.targets());
    let k = groups.len();
    let mut cols = Vec::with_capacity(k);
    for idx in groups.groups() {
        let mut z = Vec::with_capacity(m * q);
        for c in 0..q {
            let mut ug = vec![0.0; n];
            for &j in idx {
                ug[j] = u[c * n + j];
            }
            z.extend(prob.design().matvec(&ug));
        }
        cols.push(z);
    }
    let zmat = DenseMatrix::from_columns(&cols)?;
    let lambda = prob.lambda();
    let y = prob.y();
    if k <= m * q {
        let mut sys = zmat.gram();
        sys.add_diag(lambda);
        Ok(Cholesky::factor(&sys)?.solve(&zmat.matvec_t(y))?)
    } else {
        let mut sys = zmat.weighted_outer_gram(&vec![1.0; k]);
        sys.add_diag(lambda);
        let w = Cholesky::factor(&sys)?.solve(y)?;
        Ok(zmat.matvec_t(&w))
    }
}

/// Alternating exact minimization of the joint objective in `u` and `v`,
/// starting from `v0`. One iteration is a `u` step followed by a `v` step.
pub fn altmin_noncvx(
    prob: &Problem,
    v0: &[f64],
    budget: Budget,
) -> Result<SolverTrace, BaselineError> {
    require_positive_lambda(prob, "alternating minimization")?;
    require_norm_family(prob, "alternating minimization")?;
    let mut rec = Recorder::new("altmin", budget);
    let mut v = v0.to_vec();
    let mut u = u_step(prob, &v)?;
    let mut beta = recover_beta_primal(prob, &v, &u);
    rec.record(0, trace_objective(prob, &beta));
    let mut k = 1;
    while rec.may_continue(k) {
        v = v_step(prob, &u)?;
        u = u_step(prob, &v)?;
        beta = recover_beta_primal(prob, &v, &u);
        rec.record(k, trace_objective(prob, &beta));
        k += 1;
    }
    rec.param("final_joint_objective", joint_objective(prob, &v, &u));
    Ok(rec.finish(beta, None))
}
