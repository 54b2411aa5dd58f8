use std::cell::RefCell;

use super::{
    require_norm_family, require_positive_lambda, trace_objective, BaselineError, Budget,
    Recorder, SolverTrace,
};
use crate::lbfgs::{minimize_box_observed, LbfgsConfig};
use crate::linalg::dot;
use crate::problems::Problem;
use crate::varpro::inner_solve_dual;

/// `g(η) = ½ Σ η_g + ½ ⟨α, y⟩` with `(λI + X diag(η̄) Xᵀ) α = y`, its
/// gradient `½ - ½ ||X_gᵀα||²` and the coefficients `β = η̄ ⊙ Xᵀα`.
fn quadvar_eval(
    prob: &Problem,
    eta: &[f64],
) -> Result<(f64, Vec<f64>, Vec<f64>), BaselineError> {
    let v: Vec<f64> = eta.iter().map(|e| e.max(0.0).sqrt()).collect();
    let alpha: Vec<f64> = inner_solve_dual(prob, &v)?.into_iter().map(|a| -a).collect();
    let xa = prob.apply_t(&alpha);
    let sq = prob.groups().group_sq_norms(&xa, prob.targets());
    let f = 0.5 * eta.iter().sum::<f64>() + 0.5 * dot(&alpha, prob.y());
    let grad = sq.iter().map(|s| 0.5 - 0.5 * s).collect();
    let etabar = prob.groups().expand(eta);
    let n = etabar.len();
    let beta = xa
        .iter()
        .enumerate()
        .map(|(i, x)| etabar[i % n] * x)
        .collect();
    Ok((f, grad, beta))
}

pub fn quadvar_value_and_grad(
    prob: &Problem,
    eta: &[f64],
) -> Result<(f64, Vec<f64>), BaselineError> {
    quadvar_eval(prob, eta).map(|(f, g, _)| (f, g))
}

/// Bound-constrained quasi-Newton on `g(η)` over `η >= 0`.
pub fn quad_variational(
    prob: &Problem,
    eta0: &[f64],
    config: &LbfgsConfig,
    budget: Budget,
) -> Result<SolverTrace, BaselineError> {
    require_positive_lambda(prob, "quad-variational")?;
    require_norm_family(prob, "quad-variational")?;
    if let Some(i) = eta0.iter().position(|e| !(*e >= 0.0)) {
        return Err(BaselineError::InvalidParameter(format!(
            "eta0[{i}] must be >= 0"
        )));
    }
    let mut rec = Recorder::new("quadvar", budget);
    let last: RefCell<Option<(Vec<f64>, Vec<f64>)>> = RefCell::new(None);
    let oracle = |eta: &[f64]| match quadvar_eval(prob, eta) {
        Ok((f, g, beta)) => {
            *last.borrow_mut() = Some((eta.to_vec(), beta));
            (f, g)
        }
        Err(_) => (f64::INFINITY, vec![f64::NAN; eta.len()]),
    };
    let beta_at = |eta: &[f64]| -> Option<Vec<f64>> {
        if let Some((_, b)) = last.borrow().as_ref().filter(|(e, _)| e == eta) {
            return Some(b.clone());
        }
        quadvar_eval(prob, eta).ok().map(|(_, _, b)| b)
    };
    let cfg = LbfgsConfig {
        max_iters: budget.max_iters,
        max_time_s: rec.remaining_time(),
        ..config.clone()
    };
    let lower = vec![0.0; eta0.len()];
    let mut beta = Vec::new();
    let res = minimize_box_observed(oracle, eta0, &lower, &cfg, |k, eta, _| {
        if let Some(b) = beta_at(eta) {
            rec.record(k, trace_objective(prob, &b));
            beta = b;
        }
        true
    })?;
    rec.param("termination", format!("{:?}", res.termination));
    Ok(rec.finish(beta, None))
}
