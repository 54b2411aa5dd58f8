//! Reference solvers sharing one trace format, used as correctness oracles
//! and as competitors in benchmark races.
//!
//! Every solver records its starting point as sample 0 and one sample per
//! iteration afterwards. Recorded objectives are the primal objective of the
//! problem; on constrained problems (`λ = 0`) they are `R(β)`, whether or not
//! the iterate is exactly feasible.

mod altmin;
mod cd;
mod irls;
mod noncvx;
mod prox;
mod quadvar;
mod splitting;

use std::time::Instant;

use thiserror::Error;

use crate::lbfgs::LbfgsError;
use crate::linalg::LinalgError;
use crate::problems::{primal_objective, Problem, ProblemError};
use crate::regularizers::RegularizerError;
use crate::varpro::VarProError;

pub use altmin::{altmin_noncvx, joint_objective};
pub use cd::{coordinate_descent_lasso, duality_gap};
pub use irls::{irls_eta_update, irls_matrix, irls_vector, irls_z_update};
pub use noncvx::{noncvx_pro, noncvx_pro_lq, noncvx_pro_matrix, LqSolution, LQ_SNAP_TOL};
pub use prox::{fista_bb_restart, ista};
pub use quadvar::{quad_variational, quadvar_value_and_grad};
pub use splitting::{
    chambolle_pock_bp, douglas_rachford_bp, AffineProjector, CpConfig, DrConfig,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BaselineError {
    #[error("step condition violated: tau * sigma * ||X||^2 = {product} (must be < 1)")]
    StepCondition { product: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unsupported problem: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Regularizer(#[from] RegularizerError),
    #[error(transparent)]
    VarPro(#[from] VarProError),
    #[error(transparent)]
    Lbfgs(#[from] LbfgsError),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample {
    pub iteration: usize,
    pub time_s: f64,
    pub objective: f64,
}

/// Per-iteration history of one solver run.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverTrace {
    pub solver: String,
    pub samples: Vec<Sample>,
    /// Final coefficients, column-major over targets (or tasks).
    pub beta: Vec<f64>,
    /// `(key, value)` pairs describing the run configuration.
    pub config: Vec<(String, String)>,
    /// Final duality gap, for solvers that certify one.
    pub gap: Option<f64>,
}

impl SolverTrace {
    pub fn final_objective(&self) -> f64 {
        self.samples.last().map_or(f64::NAN, |s| s.objective)
    }

    pub fn best_objective(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.objective)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn iterations(&self) -> usize {
        self.samples.last().map_or(0, |s| s.iteration)
    }
}

/// Iteration and wall-clock limits of a run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Budget {
    pub max_iters: usize,
    pub max_time_s: Option<f64>,
}

impl Budget {
    pub fn iters(max_iters: usize) -> Self {
        Self {
            max_iters,
            max_time_s: None,
        }
    }

    pub fn with_time(mut self, seconds: f64) -> Self {
        self.max_time_s = Some(seconds);
        self
    }
}

/// Builds a trace while a solver runs.
pub(crate) struct Recorder {
    solver: String,
    start: Instant,
    budget: Budget,
    samples: Vec<Sample>,
    config: Vec<(String, String)>,
}

impl Recorder {
    pub(crate) fn new(solver: &str, budget: Budget) -> Self {
        let mut config = vec![("max_iters".to_string(), budget.max_iters.to_string())];
        if let Some(t) = budget.max_time_s {
            config.push(("max_time_s".into(), t.to_string()));
        }
        Self {
            solver: solver.to_string(),
            start: Instant::now(),
            budget,
            samples: Vec::new(),
            config,
        }
    }

    pub(crate) fn param(&mut self, key: &str, value: impl ToString) {
        self.config.push((key.into(), value.to_string()));
    }

    pub(crate) fn record(&mut self, iteration: usize, objective: f64) {
        self.samples.push(Sample {
            iteration,
            time_s: self.start.elapsed().as_secs_f64(),
            objective,
        });
    }

    /// Whether iteration `next` may start.
    pub(crate) fn may_continue(&self, next: usize) -> bool {
        next <= self.budget.max_iters
            && self
                .budget
                .max_time_s
                .is_none_or(|t| self.start.elapsed().as_secs_f64() < t)
    }

    pub(crate) fn remaining_time(&self) -> Option<f64> {
        self.budget
            .max_time_s
            .map(|t| (t - self.start.elapsed().as_secs_f64()).max(0.0))
    }

    pub(crate) fn finish(self, beta: Vec<f64>, gap: Option<f64>) -> SolverTrace {
        SolverTrace {
            solver: self.solver,
            samples: self.samples,
            beta,
            config: self.config,
            gap,
        }
    }
}

/// Primal objective, or `R(β)` on constrained problems.
pub fn trace_objective(prob: &Problem, beta: &[f64]) -> f64 {
    if prob.lambda() == 0.0 {
        prob.regularizer().value(beta, prob.targets())
    } else {
        primal_objective(prob, beta).unwrap_or(f64::NAN)
    }
}

pub(crate) fn require_positive_lambda(prob: &Problem, solver: &str) -> Result<(), BaselineError> {
    if prob.lambda() > 0.0 {
        Ok(())
    } else {
        Err(BaselineError::Unsupported(format!(
            "{solver} needs lambda > 0"
        )))
    }
}

pub(crate) fn require_norm_family(prob: &Problem, solver: &str) -> Result<(), BaselineError> {
    use crate::regularizers::Regularizer;
    match prob.regularizer() {
        Regularizer::L1 | Regularizer::GroupL2(_) => Ok(()),
        other => Err(BaselineError::Unsupported(format!(
            "{solver} does not handle the {} family",
            other.family_name()
        ))),
    }
}
