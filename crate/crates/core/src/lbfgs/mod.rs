//! Limited-memory BFGS with a strong-Wolfe line search, and a projected
//! variant for lower bounds.
//!
//! The oracle maps a point to `(f, ∇f)`. A non-finite value marks the point
//! as outside the domain; the line search then shrinks the step.

mod boxed;
mod line_search;

use std::collections::VecDeque;
use std::time::Instant;

use thiserror::Error;

use crate::linalg::{dot, norm2};

pub use boxed::{kkt_residual, minimize_box, minimize_box_observed};
pub use line_search::{strong_wolfe, LineSearchFailure, LineSearchPoint};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LbfgsError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("oracle is not finite at the starting point")]
    NonFiniteStart,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("starting point violates the lower bounds at index {index}")]
    InfeasibleStart { index: usize },
}

/// How the initial inverse Hessian `γ I` of the two-loop recursion is set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum InitialScaling {
    /// `γ = sᵀy / yᵀy` from the most recent pair.
    #[default]
    LatestPair,
    /// `γ` from the first accepted pair, then fixed. With unbounded memory
    /// this reproduces dense BFGS started from `γ I`.
    FirstPair,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LbfgsConfig {
    /// Number of stored pairs; `usize::MAX` keeps all of them.
    pub memory: usize,
    /// Stop when `||∇f|| <= grad_tol (1 + |f|)`.
    pub grad_tol: f64,
    pub max_iters: usize,
    pub c1: f64,
    pub c2: f64,
    pub max_line_search: usize,
    pub scaling: InitialScaling,
    /// Wall-clock limit in seconds.
    pub max_time_s: Option<f64>,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self {
            memory: 10,
            grad_tol: 1e-8,
            max_iters: 1000,
            c1: 1e-4,
            c2: 0.9,
            max_line_search: 40,
            scaling: InitialScaling::LatestPair,
            max_time_s: None,
        }
    }
}

impl LbfgsConfig {
    pub fn validate(&self) -> Result<(), LbfgsError> {
        if !(0.0 < self.c1 && self.c1 < self.c2 && self.c2 < 1.0) {
            return Err(LbfgsError::InvalidConfig(format!(
                "need 0 < c1 < c2 < 1, got c1 = {}, c2 = {}",
                self.c1, self.c2
            )));
        }
        if self.memory == 0 {
            return Err(LbfgsError::InvalidConfig("memory must be >= 1".into()));
        }
        if !(self.grad_tol >= 0.0) {
            return Err(LbfgsError::InvalidConfig(format!(
                "gradient tolerance {} must be >= 0",
                self.grad_tol
            )));
        }
        if self.max_line_search == 0 {
            return Err(LbfgsError::InvalidConfig(
                "at least one line-search step is required".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    GradientTolerance,
    MaxIterations,
    LineSearchFailed,
    TimeLimit,
    /// The observer asked to stop.
    Stopped,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceEntry {
    pub iteration: usize,
    pub time_s: f64,
    pub f: f64,
    pub grad_norm: f64,
}

#[derive(Clone, Debug)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    pub grad_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
    /// One entry per accepted iterate, starting with `x0`.
    pub trace: Vec<TraceEntry>,
}

impl OptimResult {
    pub fn converged(&self) -> bool {
        self.termination == Termination::GradientTolerance
    }
}

/// Bounded history of curvature pairs with the two-loop recursion.
#[derive(Clone, Debug)]
pub(crate) struct History {
    memory: usize,
    pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)>,
    scaling: InitialScaling,
    fixed_gamma: Option<f64>,
}

impl History {
    pub(crate) fn new(memory: usize, scaling: InitialScaling) -> Self {
        Self {
            memory,
            pairs: VecDeque::new(),
            scaling,
            fixed_gamma: None,
        }
    }

    pub(crate) fn clear(&mut self) {
        self.pairs.clear();
        self.fixed_gamma = None;
    }

    pub(crate) fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Stores `(s, y)` unless `sᵀy <= 1e-12 ||s|| ||y||`; returns whether
    /// the pair was kept.
    pub(crate) fn push(&mut self, s: Vec<f64>, y: Vec<f64>) -> bool {
        let sy = dot(&s, &y);
        if !(sy > 1e-12 * norm2(&s) * norm2(&y)) {
            return false;
        }
        if self.scaling == InitialScaling::FirstPair && self.fixed_gamma.is_none() {
            self.fixed_gamma = Some(sy / dot(&y, &y));
        }
        if self.pairs.len() == self.memory {
            self.pairs.pop_front();
        }
        self.pairs.push_back((s, y, 1.0 / sy));
        true
    }

    fn gamma(&self) -> f64 {
        match (self.scaling, self.fixed_gamma) {
            (InitialScaling::FirstPair, Some(g)) => g,
            _ => self
                .pairs
                .back()
                .map_or(1.0, |(s, y, _)| dot(s, y) / dot(y, y)),
        }
    }

    /// `-H g` with `H` the implicit inverse Hessian. `mask`, when given,
    /// restricts every inner product and the result to the free coordinates;
    /// pairs without positive curvature there are skipped.
    pub(crate) fn direction(&self, g: &[f64], mask: Option<&[bool]>) -> Vec<f64> {
        let keep = |i: usize| mask.map_or(true, |m| m[i]);
        let mdot = |a: &[f64], b: &[f64]| -> f64 {
            a.iter()
                .zip(b)
                .enumerate()
                .filter(|(i, _)| keep(*i))
                .map(|(_, (x, y))| x * y)
                .sum()
        };
        let mut q: Vec<f64> = g
            .iter()
            .enumerate()
            .map(|(i, v)| if keep(i) { *v } else { 0.0 })
            .collect();
        let active: Vec<(usize, f64)> = self
            .pairs
            .iter()
            .enumerate()
            .filter_map(|(k, (s, y, rho))| match mask {
                None => Some((k, *rho)),
                Some(_) => {
                    let sy = mdot(s, y);
                    (sy > 0.0).then(|| (k, 1.0 / sy))
                }
            })
            .collect();
        let mut alphas = vec![0.0; active.len()];
        for (idx, &(k, rho)) in active.iter().enumerate().rev() {
            let (s, y, _) = &self.pairs[k];
            let a = rho * mdot(s, &q);
            alphas[idx] = a;
            for (i, qi) in q.iter_mut().enumerate() {
                if keep(i) {
                    *qi -= a * y[i];
                }
            }
        }
        let gamma = match mask {
            None => self.gamma(),
            Some(_) => active.last().map_or(1.0, |&(k, rho)| {
                let y = &self.pairs[k].1;
                1.0 / (rho * mdot(y, y))
            }),
        };
        q.iter_mut().for_each(|v| *v *= gamma);
        for (idx, &(k, rho)) in active.iter().enumerate() {
            let (s, y, _) = &self.pairs[k];
            let b = rho * mdot(y, &q);
            for (i, qi) in q.iter_mut().enumerate() {
                if keep(i) {
                    *qi += (alphas[idx] - b) * s[i];
                }
            }
        }
        q.iter_mut().for_each(|v| *v = -*v);
        q
    }
}

fn is_finite_eval(f: f64, g: &[f64]) -> bool {
    f.is_finite() && g.iter().all(|v| v.is_finite())
}

pub(crate) fn converged(f: f64, gnorm: f64, tol: f64) -> bool {
    gnorm <= tol * (1.0 + f.abs())
}

/// Unconstrained minimization from `x0`.
pub fn minimize<F>(oracle: F, x0: &[f64], config: &LbfgsConfig) -> Result<OptimResult, LbfgsError>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    minimize_observed(oracle, x0, config, |_, _, _| true)
}

/// Like [`minimize`], calling `observer(iteration, x, f)` at `x0` and after
/// every accepted step; returning `false` stops the run.
pub fn minimize_observed<F, O>(
    mut oracle: F,
    x0: &[f64],
    config: &LbfgsConfig,
    mut observer: O,
) -> Result<OptimResult, LbfgsError>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
    O: FnMut(usize, &[f64], f64) -> bool,
{
    config.validate()?;
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
    if !is_finite_eval(f, &g) {
        return Err(LbfgsError::NonFiniteStart);
    }
    let mut gnorm = norm2(&g);
    let mut trace = vec![TraceEntry {
        iteration: 0,
        time_s: 0.0,
        f,
        grad_norm: gnorm,
    }];
    let mut history = History::new(config.memory, config.scaling);
    let mut iterations = 0;
    let mut keep_going = observer(0, &x, f);
    let termination = loop {
        if converged(f, gnorm, config.grad_tol) {
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
        let mut d = history.direction(&g, None);
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            history.clear();
            d = g.iter().map(|v| -v).collect();
            slope = -gnorm * gnorm;
        }
        let alpha0 = if history.is_empty() {
            (1.0 / gnorm).min(1.0)
        } else {
            1.0
        };
        let step = strong_wolfe(
            &mut oracle,
            &x,
            f,
            slope,
            &d,
            alpha0,
            config.c1,
            config.c2,
            config.max_line_search,
        );
        let point = match step {
            Ok(p) => p,
            Err(fail) => {
                evaluations += fail.evaluations;
                if !history.is_empty() {
                    // Retry once along steepest descent with fresh memory.
                    history.clear();
                    continue;
                }
                if let Some(best) = fail.best.filter(|b| b.f < f) {
                    x = best.x;
                    f = best.f;
                    g = best.g;
                    gnorm = norm2(&g);
                    iterations += 1;
                    trace.push(TraceEntry {
                        iteration: iterations,
                        time_s: start.elapsed().as_secs_f64(),
                        f,
                        grad_norm: gnorm,
                    });
                    observer(iterations, &x, f);
                }
                break Termination::LineSearchFailed;
            }
        };
        evaluations += point.evaluations;
        let s: Vec<f64> = point.x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = point.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        history.push(s, yv);
        x = point.x;
        f = point.f;
        g = point.g;
        gnorm = norm2(&g);
        iterations += 1;
        trace.push(TraceEntry {
            iteration: iterations,
            time_s: start.elapsed().as_secs_f64(),
            f,
            grad_norm: gnorm,
        });
        keep_going = observer(iterations, &x, f);
    };
    Ok(OptimResult {
        x,
        f,
        grad: g,
        grad_norm: gnorm,
        iterations,
        evaluations,
        termination,
        trace,
    })
}
