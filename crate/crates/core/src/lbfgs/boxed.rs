use std::time::Instant;

use super::{converged, History, LbfgsConfig, LbfgsError, OptimResult, Termination, TraceEntry};
use crate::linalg::{dot, norm2};

fn project(x: &mut [f64], lower: &[f64]) {
    x.iter_mut().zip(lower).for_each(|(xi, li)| *xi = xi.max(*li));
}

/// `||x - P(x - ∇f)||`, zero exactly at KKT points of `min f` s.t. `x >= l`.
pub fn kkt_residual(x: &[f64], g: &[f64], lower: &[f64]) -> f64 {
    x.iter()
        .zip(g)
        .zip(lower)
        .map(|((xi, gi), li)| xi - (xi - gi).max(*li))
        .map(|r| r * r)
        .sum::<f64>()
        .sqrt()
}

/// Projected L-BFGS for `min f(x)` subject to `x >= lower`.
///
/// Variables sitting on their bound with a positive gradient are held fixed;
/// the two-loop recursion runs on the remaining ones and the trial point is
/// projected back onto the box, with Armijo backtracking along the projection
/// arc. Termination uses the projected-gradient residual.
pub fn minimize_box<F>(
    oracle: F,
    x0: &[f64],
    lower: &[f64],
    config: &LbfgsConfig,
) -> Result<OptimResult, LbfgsError>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    minimize_box_observed(oracle, x0, lower, config, |_, _, _| true)
}

pub fn minimize_box_observed<F, O>(
    mut oracle: F,
    x0: &[f64],
    lower: &[f64],
    config: &LbfgsConfig,
    mut observer: O,
) -> Result<OptimResult, LbfgsError>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
    O: FnMut(usize, &[f64], f64) -> bool,
{
    config.validate()?;
    if lower.len() != x0.len() {
        return Err(LbfgsError::DimensionMismatch {
            expected: x0.len(),
            found: lower.len(),
        });
    }
    if let Some(index) = x0.iter().zip(lower).position(|(x, l)| x < l) {
        return Err(LbfgsError::InfeasibleStart { index });
    }
    let start = Instant::now();
    let mut x = x0.to_vec();
    let (mut f, mut g) = oracle(&x);
    let mut evaluations = 1;
    if g.len() != x.len() {
        return Err(LbfgsError::DimensionMismatch {
            expected: x.len(),
            found: g.len(),
        });
    }
    if !(f.is_finite() && g.iter().all(|v| v.is_finite())) {
        return Err(LbfgsError::NonFiniteStart);
    }
    let mut res = kkt_residual(&x, &g, lower);
    let mut trace = vec![TraceEntry {
        iteration: 0,
        time_s: 0.0,
        f,
        grad_norm: res,
    }];
    let mut history = History::new(config.memory, config.scaling);
    let mut iterations = 0;
    let mut keep_going = observer(0, &x, f);
    let termination = loop {
        if converged(f, res, config.grad_tol) {
            break Termination::GradientTolerance;
        }
        if !keep_going {
            break Termination::Stopped;
        }
        if iterations >= config.max_iters {
            break Termination::MaxIterations;
        }
        if config
            .max_time_s
            .is_some_and(|t| start.elapsed().as_secs_f64() >= t)
        {
            break Termination::TimeLimit;
        }
        let free: Vec<bool> = x
            .iter()
            .zip(&g)
            .zip(lower)
            .map(|((xi, gi), li)| !(*xi <= *li && *gi > 0.0))
            .collect();
        let mut d = history.direction(&g, Some(&free));
        if !(dot(&g, &d) < 0.0) {
            history.clear();
            d = g
                .iter()
                .zip(&free)
                .map(|(gi, fr)| if *fr { -gi } else { 0.0 })
                .collect();
        }
        let mut t = if history.is_empty() {
            (1.0 / norm2(&d)).min(1.0)
        } else {
            1.0
        };
        let mut accepted = None;
        for _ in 0..config.max_line_search {
            let mut trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + t * di).collect();
            project(&mut trial, lower);
            let (ft, gt) = oracle(&trial);
            evaluations += 1;
            let step: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
            let finite = ft.is_finite() && gt.iter().all(|v| v.is_finite());
            if finite && ft <= f + config.c1 * dot(&g, &step) {
                accepted = Some((trial, ft, gt, step));
                break;
            }
            t *= 0.5;
        }
        let Some((xn, fn_, gn, s)) = accepted else {
            if !history.is_empty() {
                history.clear();
                continue;
            }
            break Termination::LineSearchFailed;
        };
        let yv: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        history.push(s, yv);
        x = xn;
        f = fn_;
        g = gn;
        res = kkt_residual(&x, &g, lower);
        iterations += 1;
        trace.push(TraceEntry {
            iteration: iterations,
            time_s: start.elapsed().as_secs_f64(),
            f,
            grad_norm: res,
        });
        keep_going = observer(iterations, &x, f);
    };
    Ok(OptimResult {
        grad_norm: res,
        x,
        f,
        grad: g,
        iterations,
        evaluations,
        termination,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lbfgs::minimize;

    #[test]
    fn active_bound() {
        let r = minimize_box(
            |x| (0.5 * (x[0] + 1.0).powi(2), vec![x[0] + 1.0]),
            &[2.0],
            &[0.0],
            &LbfgsConfig::default(),
        )
        .unwrap();
        assert!(r.converged());
        assert_eq!(r.x, vec![0.0]);
        assert!((r.grad[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn interior_matches_unconstrained() {
        let oracle = |x: &[f64]| {
            let d = [x[0] - 3.0, 2.0 * (x[1] - 1.0)];
            (0.5 * d[0] * d[0] + 0.25 * d[1] * d[1], vec![d[0], d[1]])
        };
        let cfg = LbfgsConfig {
            grad_tol: 1e-12,
            ..Default::default()
        };
        let a = minimize_box(oracle, &[0.5, 0.5], &[-10.0, -10.0], &cfg).unwrap();
        let b = minimize(oracle, &[0.5, 0.5], &cfg).unwrap();
        for (p, q) in a.x.iter().zip(&b.x) {
            assert!((p - q).abs() < 1e-9);
        }
    }

    #[test]
    fn infeasible_start_rejected() {
        let r = minimize_box(|x| (x[0], vec![1.0]), &[-1.0], &[0.0], &LbfgsConfig::default());
        assert_eq!(r.unwrap_err(), LbfgsError::InfeasibleStart { index: 0 });
    }
}
