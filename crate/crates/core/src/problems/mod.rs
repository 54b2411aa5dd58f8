//! Regression instances: penalized and constrained group-Lasso problems,
//! multitask trace-norm problems and Beckmann flow problems on graphs, plus
//! LIBSVM ingestion and synthetic generators.

mod graph;
mod libsvm;
mod synth;

use std::sync::OnceLock;

use thiserror::Error;

use crate::linalg::{
    cg_solve, default_cg_iterations, norm2, DenseMatrix, Design, LinalgError, CG_DEFAULT_TOL,
    DENSE_DIRECT_LIMIT,
};
use crate::regularizers::{trace_norm, GroupStructure, Regularizer, RegularizerError};

pub use graph::{
    graph_incidence, parse_edge_list, random_beckmann, random_connected_graph, BeckmannProblem,
};
pub use libsvm::{parse_libsvm, parse_libsvm_str, write_libsvm};
pub use synth::{synth_data, synth_lasso, synth_multitask, SynthData};

/// `||Xβ - y|| <= FEASIBILITY_TOL (1 + ||y||)` counts as feasible at `λ = 0`.
pub const FEASIBILITY_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("lambda must be finite and >= 0, got {0}")]
    InvalidLambda(f64),
    #[error("y is not in the range of X (relative residual {residual:e})")]
    Infeasible { residual: f64 },
    #[error("iterate violates X beta = y at lambda = 0 (residual {residual:e})")]
    InfeasibleAtLambdaZero { residual: f64 },
    #[error("edge {edge} is a self-loop")]
    SelfLoop { edge: usize },
    #[error("edge {edge} references node {node} >= {node_count}")]
    NodeOutOfRange {
        edge: usize,
        node: usize,
        node_count: usize,
    },
    #[error("mass imbalance: sum(a) - sum(b) = {0:e}")]
    MassImbalance(f64),
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Regularizer(#[from] RegularizerError),
}

/// `min_β R(β) + 1/(2λ) ||Xβ - y||²`, or `min R(β)` s.t. `Xβ = y` when
/// `λ = 0`.
///
/// With `targets > 1` the coefficients form an `n x targets` matrix stored
/// column-major, and the loss is the Frobenius norm (multitask layout).
#[derive(Clone, Debug)]
pub struct Problem {
    design: Design,
    y: Vec<f64>,
    targets: usize,
    lambda: f64,
    reg: Regularizer,
    groups: GroupStructure,
    gram: OnceLock<DenseMatrix>,
}

impl Problem {
    pub fn new(
        design: impl Into<Design>,
        y: Vec<f64>,
        lambda: f64,
        reg: Regularizer,
    ) -> Result<Self, ProblemError> {
        Self::multitarget(design, y, 1, lambda, reg)
    }

    /// `y` is column-major `m x targets`.
    pub fn multitarget(
        design: impl Into<Design>,
        y: Vec<f64>,
        targets: usize,
        lambda: f64,
        reg: Regularizer,
    ) -> Result<Self, ProblemError> {
        let design = design.into();
        let (m, n) = (design.rows(), design.cols());
        if targets == 0 || y.len() != m * targets {
            return Err(ProblemError::Dimension(format!(
                "y has {} entries, expected {m} x {targets}",
                y.len()
            )));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(ProblemError::Linalg(LinalgError::NonFinite));
        }
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(ProblemError::InvalidLambda(lambda));
        }
        match &reg {
            Regularizer::TraceNorm => {
                return Err(ProblemError::Unsupported(
                    "trace norm problems use MultiTaskProblem".into(),
                ))
            }
            Regularizer::GroupL2(g) if g.n_features() != n => {
                return Err(ProblemError::Dimension(format!(
                    "group structure covers {} features, design has {n}",
                    g.n_features()
                )))
            }
            Regularizer::L1 | Regularizer::Lq(_) if targets > 1 => {
                return Err(ProblemError::Unsupported(
                    "multiple targets require a group regularizer".into(),
                ))
            }
            _ => {}
        }
        let groups = reg.groups_for(n);
        let prob = Self {
            design,
            y,
            targets,
            lambda,
            reg,
            groups,
            gram: OnceLock::new(),
        };
        if lambda == 0.0 {
            let residual = prob.range_residual()?;
            if residual > FEASIBILITY_TOL {
                return Err(ProblemError::Infeasible { residual });
            }
        }
        Ok(prob)
    }

    /// Relative distance from `y` to `range(X)`, by CG on `X X^T w = y`.
    fn range_residual(&self) -> Result<f64, ProblemError> {
        let m = self.n_samples();
        let dense_gram = (m <= DENSE_DIRECT_LIMIT)
            .then(|| self.design.weighted_outer_gram(&vec![1.0; self.n_features()]));
        let mut worst: f64 = 0.0;
        for c in 0..self.targets {
            let yc = self.target(c);
            let rep = cg_solve(
                |w| match &dense_gram {
                    Some(g) => g.matvec(w),
                    None => self.design.matvec(&self.design.matvec_t(w)),
                },
                yc,
                CG_DEFAULT_TOL,
                default_cg_iterations(m),
            )?;
            worst = worst.max(rep.relative_residual);
        }
        Ok(worst)
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self, ProblemError> {
        Self::multitarget(
            self.design.clone(),
            self.y.clone(),
            self.targets,
            lambda,
            self.reg.clone(),
        )
    }

    pub fn with_regularizer(&self, reg: Regularizer) -> Result<Self, ProblemError> {
        Self::multitarget(
            self.design.clone(),
            self.y.clone(),
            self.targets,
            self.lambda,
            reg,
        )
    }

    pub fn design(&self) -> &Design {
        &self.design
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Column `c` of the target matrix.
    pub fn target(&self, c: usize) -> &[f64] {
        let m = self.n_samples();
        &self.y[c * m..(c + 1) * m]
    }

    pub fn targets(&self) -> usize {
        self.targets
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn regularizer(&self) -> &Regularizer {
        &self.reg
    }

    pub fn groups(&self) -> &GroupStructure {
        &self.groups
    }

    /// `X^T X`, computed on first use.
    pub fn gram(&self) -> &DenseMatrix {
        self.gram.get_or_init(|| self.design.gram())
    }

    pub fn n_samples(&self) -> usize {
        self.design.rows()
    }

    pub fn n_features(&self) -> usize {
        self.design.cols()
    }

    /// Dimension `k` of the outer variable (number of groups).
    pub fn outer_dim(&self) -> usize {
        self.groups.len()
    }

    /// `Xβ` column by column.
    pub fn apply(&self, beta: &[f64]) -> Vec<f64> {
        let n = self.n_features();
        (0..self.targets)
            .flat_map(|c| self.design.matvec(&beta[c * n..(c + 1) * n]))
            .collect()
    }

    /// `X^T r` column by column.
    pub fn apply_t(&self, r: &[f64]) -> Vec<f64> {
        let m = self.n_samples();
        (0..self.targets)
            .flat_map(|c| self.design.matvec_t(&r[c * m..(c + 1) * m]))
            .collect()
    }

    /// `Xβ - y`.
    pub fn residual(&self, beta: &[f64]) -> Vec<f64> {
        let mut r = self.apply(beta);
        r.iter_mut().zip(&self.y).for_each(|(a, b)| *a -= b);
        r
    }

    pub fn lambda_max(&self) -> Result<f64, ProblemError> {
        Ok(crate::regularizers::lambda_max(
            &self.design,
            &self.y,
            self.targets,
            &self.reg,
        )?)
    }

    /// `||Xβ - y|| <= tol (1 + ||y||)` with the crate feasibility tolerance.
    pub fn is_feasible(&self, beta: &[f64]) -> bool {
        norm2(&self.residual(beta)) <= FEASIBILITY_TOL * (1.0 + norm2(&self.y))
    }
}

/// `R(β) + 1/(2λ) ||Xβ - y||²`, or `R(β)` for a feasible `β` at `λ = 0`.
pub fn primal_objective(prob: &Problem, beta: &[f64]) -> Result<f64, ProblemError> {
    if beta.len() != prob.n_features() * prob.targets() {
        return Err(ProblemError::Dimension(format!(
            "beta has {} entries, expected {}",
            beta.len(),
            prob.n_features() * prob.targets()
        )));
    }
    let r = prob.residual(beta);
    let reg = prob.regularizer().value(beta, prob.targets());
    let rn = norm2(&r);
    if prob.lambda() == 0.0 {
        if rn <= FEASIBILITY_TOL * (1.0 + norm2(prob.y())) {
            Ok(reg)
        } else {
            Err(ProblemError::InfeasibleAtLambdaZero { residual: rn })
        }
    } else {
        Ok(reg + rn * rn / (2.0 * prob.lambda()))
    }
}

/// Column-centers `X` and `y`, then scales both by `1/m`.
pub fn standardize(x: &Design, y: &[f64]) -> (DenseMatrix, Vec<f64>) {
    let mut d = x.to_dense();
    let (m, n) = (d.rows(), d.cols());
    let inv_m = 1.0 / m as f64;
    for j in 0..n {
        let mean = (0..m).map(|i| d.get(i, j)).sum::<f64>() * inv_m;
        for i in 0..m {
            d.set(i, j, (d.get(i, j) - mean) * inv_m);
        }
    }
    let ymean = y.iter().sum::<f64>() * inv_m;
    let y = y.iter().map(|v| (v - ymean) * inv_m).collect();
    (d, y)
}

/// One task of a multitask regression.
#[derive(Clone, Debug)]
pub struct Task {
    pub x: DenseMatrix,
    pub y: Vec<f64>,
}

/// Per-task designs `X_t` (`m_t x n`) sharing `n` features; the coefficient
/// matrix `B` is `n x T` with column `t` belonging to task `t`.
#[derive(Clone, Debug)]
pub struct MultiTaskProblem {
    tasks: Vec<Task>,
    n: usize,
}

impl MultiTaskProblem {
    pub fn new(tasks: Vec<Task>) -> Result<Self, ProblemError> {
        let n = tasks
            .first()
            .map(|t| t.x.cols())
            .ok_or_else(|| ProblemError::Dimension("no tasks".into()))?;
        for (t, task) in tasks.iter().enumerate() {
            if task.x.cols() != n {
                return Err(ProblemError::Dimension(format!(
                    "task {t} has {} features, expected {n}",
                    task.x.cols()
                )));
            }
            if task.y.len() != task.x.rows() {
                return Err(ProblemError::Dimension(format!(
                    "task {t}: y has {} entries, X has {} rows",
                    task.y.len(),
                    task.x.rows()
                )));
            }
        }
        Ok(Self { tasks, n })
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn task_count(&self) -> usize {
        self.tasks.len()
    }

    pub fn n_features(&self) -> usize {
        self.n
    }

    /// Rank of the factor `U` (equal to the task count).
    pub fn rank(&self) -> usize {
        self.tasks.len()
    }

    pub fn total_samples(&self) -> usize {
        self.tasks.iter().map(|t| t.x.rows()).sum()
    }

    /// `Σ_t ||X_t B_t - y_t||²`.
    pub fn squared_loss(&self, b: &DenseMatrix) -> f64 {
        self.tasks
            .iter()
            .enumerate()
            .map(|(t, task)| {
                let r = crate::linalg::sub(&task.x.matvec(&b.column(t)), &task.y);
                crate::linalg::dot(&r, &r)
            })
            .sum()
    }

    /// `||B||_* + 1/(2λ) Σ_t ||X_t B_t - y_t||²`.
    pub fn objective(&self, b: &DenseMatrix, lambda: f64) -> f64 {
        trace_norm(b) + self.squared_loss(b) / (2.0 * lambda)
    }
}
