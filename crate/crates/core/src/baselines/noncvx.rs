use std::cell::RefCell;

use super::{trace_objective, BaselineError, Budget, Recorder, SolverTrace};
use crate::lbfgs::{minimize, minimize_observed, LbfgsConfig, OptimResult, Termination};
use crate::linalg::DenseMatrix;
use crate::problems::{MultiTaskProblem, Problem};
use crate::regularizers::dense_to_column_major;
use crate::varpro::{evaluate, evaluate_lq, evaluate_matrix, f_and_grad_lq, Route, VarProState};

fn lbfgs_config(config: &LbfgsConfig, rec: &Recorder, budget: Budget) -> LbfgsConfig {
    LbfgsConfig {
        max_iters: budget.max_iters,
        max_time_s: rec.remaining_time(),
        ..config.clone()
    }
}

/// L-BFGS on the projected function `f(v)`. Evaluation failures (an
/// inconsistent constrained system for instance) are reported to the
/// optimizer as `f = +∞`.
pub fn noncvx_pro(
    prob: &Problem,
    v0: &[f64],
    config: &LbfgsConfig,
    route: Route,
    budget: Budget,
) -> Result<SolverTrace, BaselineError> {
    let mut rec = Recorder::new("noncvx-pro", budget);
    rec.param("memory", config.memory);
    rec.param("grad_tol", config.grad_tol);
    let last: RefCell<Option<VarProState>> = RefCell::new(None);
    let oracle = |v: &[f64]| match evaluate(prob, v, route) {
        Ok(s) => {
            let out = (s.f, s.grad.clone());
            *last.borrow_mut() = Some(s);
            out
        }
        Err(_) => (f64::INFINITY, vec![f64::NAN; v.len()]),
    };
    let beta_at = |v: &[f64]| -> Option<Vec<f64>> {
        if let Some(s) = last.borrow().as_ref().filter(|s| s.v == v) {
            return Some(s.beta.clone());
        }
        evaluate(prob, v, route).ok().map(|s| s.beta)
    };
    let cfg = lbfgs_config(config, &rec, budget);
    let mut beta = Vec::new();
    let res = minimize_observed(oracle, v0, &cfg, |k, v, _| {
        if let Some(b) = beta_at(v) {
            rec.record(k, trace_objective(prob, &b));
            beta = b;
        }
        true
    })?;
    rec.param("termination", format!("{:?}", res.termination));
    Ok(rec.finish(beta, None))
}

/// L-BFGS on the trace-norm projected function `f(V)` with `V` of size
/// `n x r`; the trace holds `B = V U` column-major.
pub fn noncvx_pro_matrix(
    mt: &MultiTaskProblem,
    lambda: f64,
    v0: &DenseMatrix,
    config: &LbfgsConfig,
    budget: Budget,
) -> Result<SolverTrace, BaselineError> {
    let mut rec = Recorder::new("noncvx-pro", budget);
    rec.param("memory", config.memory);
    rec.param("rank", v0.cols());
    let (n, r) = (v0.rows(), v0.cols());
    let to_matrix = |x: &[f64]| DenseMatrix::new(n, r, x.to_vec());
    let oracle = |x: &[f64]| {
        match to_matrix(x)
            .map_err(BaselineError::from)
            .and_then(|v| Ok(evaluate_matrix(mt, &v, lambda)?))
        {
            Ok(s) => (s.f, s.grad.into_vec()),
            Err(_) => (f64::INFINITY, vec![f64::NAN; x.len()]),
        }
    };
    let cfg = lbfgs_config(config, &rec, budget);
    let mut b_final = DenseMatrix::zeros(n, mt.task_count());
    let res = minimize_observed(oracle, v0.as_slice(), &cfg, |k, x, _| {
        if let Ok(s) = to_matrix(x)
            .map_err(BaselineError::from)
            .and_then(|v| Ok(evaluate_matrix(mt, &v, lambda)?))
        {
            rec.record(k, mt.objective(&s.b, lambda));
            b_final = s.b;
        }
        true
    })?;
    rec.param("termination", format!("{:?}", res.termination));
    Ok(rec.finish(dense_to_column_major(&b_final), None))
}

/// Coordinates of `v` at most this fraction of `max |v|` are set to zero
/// before the polishing restart of [`noncvx_pro_lq`].
pub const LQ_SNAP_TOL: f64 = 1e-8;

/// Outcome of [`noncvx_pro_lq`].
#[derive(Clone, Debug)]
pub struct LqSolution {
    pub v: Vec<f64>,
    pub beta: Vec<f64>,
    pub alpha: Vec<f64>,
    pub f: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub termination: Termination,
    /// Whether the restart from the snapped point was kept.
    pub polished: bool,
}

/// L-BFGS on the `ℓq` projected function, followed by one restart from the
/// point with its negligible coordinates set exactly to zero.
///
/// For `q < 1` the term `|v|^γ` has unbounded curvature at zero, which stalls
/// the line search while off-support coordinates are tiny but nonzero. Zero
/// coordinates have zero gradient and stay fixed under L-BFGS, so the restart
/// works on the support alone. The restart is kept only if it does not
/// increase `f` beyond rounding.
pub fn noncvx_pro_lq(
    prob: &Problem,
    q: f64,
    v0: &[f64],
    config: &LbfgsConfig,
) -> Result<LqSolution, BaselineError> {
    evaluate_lq(prob, v0, q)?;
    let oracle = |v: &[f64]| {
        f_and_grad_lq(prob, v, q).unwrap_or_else(|_| (f64::INFINITY, vec![f64::NAN; v.len()]))
    };
    let first = minimize(oracle, v0, config)?;
    let mut iterations = first.iterations;
    let vmax = first.x.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let snapped: Vec<f64> = first
        .x
        .iter()
        .map(|&x| if x.abs() <= LQ_SNAP_TOL * vmax { 0.0 } else { x })
        .collect();
    let mut best: OptimResult = first;
    let mut polished = false;
    if snapped != best.x {
        if let Ok(res) = minimize(oracle, &snapped, config) {
            iterations += res.iterations;
            let slack = 1e-12 * (1.0 + best.f.abs());
            if res.f <= best.f + slack && res.grad_norm <= best.grad_norm {
                best = res;
                polished = true;
            }
        }
    }
    let state = evaluate_lq(prob, &best.x, q)?;
    Ok(LqSolution {
        v: best.x,
        beta: state.beta,
        alpha: state.alpha.unwrap_or_default(),
        f: best.f,
        grad_norm: best.grad_norm,
        iterations,
        termination: best.termination,
        polished,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regularizers::Regularizer;

    #[test]
    fn scalar_example() {
        let p = Problem::new(
            DenseMatrix::from_rows(&[vec![1.0]]).unwrap(),
            vec![2.0],
            1.0,
            Regularizer::L1,
        )
        .unwrap();
        let t = noncvx_pro(&p, &[0.3], &LbfgsConfig::default(), Route::Auto, Budget::iters(100))
            .unwrap();
        assert!((t.final_objective() - 1.5).abs() < 1e-10);
        assert!((t.beta[0] - 1.0).abs() < 1e-6);
        assert_eq!(t.samples[0].iteration, 0);
    }

    #[test]
    fn constrained_lq_scalar() {
        let p = Problem::new(
            DenseMatrix::from_rows(&[vec![1.0]]).unwrap(),
            vec![2.0],
            0.0,
            Regularizer::L1,
        )
        .unwrap();
        let s = noncvx_pro_lq(&p, 0.8, &[0.5], &LbfgsConfig::default()).unwrap();
        assert!((s.beta[0] - 2.0).abs() < 1e-10);
        assert!((s.alpha[0] + 0.8 * 2f64.powf(-0.2)).abs() < 1e-6);
    }

    #[test]
    fn zero_time_budget_keeps_initial_point() {
        let p = Problem::new(
            DenseMatrix::from_rows(&[vec![1.0]]).unwrap(),
            vec![2.0],
            1.0,
            Regularizer::L1,
        )
        .unwrap();
        let t = noncvx_pro(
            &p,
            &[0.3],
            &LbfgsConfig::default(),
            Route::Auto,
            Budget::iters(100).with_time(0.0),
        )
        .unwrap();
        assert_eq!(t.samples.len(), 1);
    }
}
