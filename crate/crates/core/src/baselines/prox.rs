use super::{require_positive_lambda, trace_objective, BaselineError, Budget, Recorder, SolverTrace};
use crate::linalg::{design_norm, dot};
use crate::problems::Problem;

/// `Xᵀ(Xβ - y) / λ`, the gradient of the smooth part.
fn smooth_grad(prob: &Problem, beta: &[f64]) -> Vec<f64> {
    let lambda = prob.lambda();
    prob.apply_t(&prob.residual(beta))
        .into_iter()
        .map(|g| g / lambda)
        .collect()
}

fn smooth_value(prob: &Problem, beta: &[f64]) -> f64 {
    let r = prob.residual(beta);
    dot(&r, &r) / (2.0 * prob.lambda())
}

/// Proximal gradient: `β ← prox_{γR}(β - (γ/λ) Xᵀ(Xβ - y))`, stable for
/// `γ <= λ / ||X||²`.
pub fn ista(
    prob: &Problem,
    beta0: &[f64],
    step: f64,
    budget: Budget,
) -> Result<SolverTrace, BaselineError> {
    require_positive_lambda(prob, "ista")?;
    let mut rec = Recorder::new("ista", budget);
    rec.param("step", step);
    let targets = prob.targets();
    let reg = prob.regularizer();
    let mut beta = beta0.to_vec();
    rec.record(0, trace_objective(prob, &beta));
    let mut k = 1;
    while rec.may_continue(k) {
        let g = smooth_grad(prob, &beta);
        let z: Vec<f64> = beta.iter().zip(&g).map(|(b, g)| b - step * g).collect();
        beta = reg.prox(&z, step, targets)?;
        rec.record(k, trace_objective(prob, &beta));
        k += 1;
    }
    Ok(rec.finish(beta, None))
}

/// Bounds of the Barzilai–Borwein step, in units of `λ / ||X||²`.
pub const BB_STEP_BOUNDS: (f64, f64) = (1e-8, 1e8);

/// Accelerated proximal gradient with a safeguarded BB1 step, backtracking
/// on the quadratic upper bound at the extrapolated point and a restart of
/// the momentum whenever the objective would increase.
pub fn fista_bb_restart(
    prob: &Problem,
    beta0: &[f64],
    budget: Budget,
) -> Result<SolverTrace, BaselineError> {
    require_positive_lambda(prob, "fista")?;
    let mut rec = Recorder::new("fista", budget);
    let targets = prob.targets();
    let reg = prob.regularizer();
    let norm = design_norm(prob.design());
    let unit = if norm > 0.0 {
        prob.lambda() / (norm * norm)
    } else {
        1.0
    };
    let (lo, hi) = (BB_STEP_BOUNDS.0 * unit, BB_STEP_BOUNDS.1 * unit);
    rec.param("step_bounds", format!("[{lo:e}, {hi:e}]"));

    let mut x = beta0.to_vec();
    let mut f_x = trace_objective(prob, &x);
    rec.record(0, f_x);
    let mut z = x.clone();
    let mut gz = smooth_grad(prob, &z);
    let mut t: f64 = 1.0;
    let mut step = unit;
    let mut k = 1;
    while rec.may_continue(k) {
        let sz = smooth_value(prob, &z);
        let (x_new, _) = loop {
            let w: Vec<f64> = z.iter().zip(&gz).map(|(a, g)| a - step * g).collect();
            let cand = reg.prox(&w, step, targets)?;
            let d: Vec<f64> = cand.iter().zip(&z).map(|(a, b)| a - b).collect();
            let bound = sz + dot(&gz, &d) + dot(&d, &d) / (2.0 * step);
            let s_cand = smooth_value(prob, &cand);
            if s_cand <= bound + 1e-12 * bound.abs() || step <= lo {
                break (cand, s_cand);
            }
            step = (0.5 * step).max(lo);
        };
        let f_new = trace_objective(prob, &x_new);
        if f_new > f_x && t > 1.0 {
            t = 1.0;
            z.clone_from(&x);
            gz = smooth_grad(prob, &z);
            continue;
        }
        let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let mom = (t - 1.0) / t_new;
        let z_new: Vec<f64> = x_new
            .iter()
            .zip(&x)
            .map(|(a, b)| a + mom * (a - b))
            .collect();
        let gz_new = smooth_grad(prob, &z_new);
        let s: Vec<f64> = z_new.iter().zip(&z).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = gz_new.iter().zip(&gz).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &yv);
        if sy > 0.0 {
            step = (dot(&s, &s) / sy).clamp(lo, hi);
        }
        x = x_new;
        f_x = f_new;
        z = z_new;
        gz = gz_new;
        t = t_new;
        rec.record(k, f_x);
        k += 1;
    }
    Ok(rec.finish(x, None))
}
