use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use sparse_varpro::baselines::{
    altmin_noncvx, chambolle_pock_bp, coordinate_descent_lasso, douglas_rachford_bp,
    fista_bb_restart, irls_matrix, irls_vector, ista, noncvx_pro, noncvx_pro_matrix,
    quad_variational, Budget, CpConfig, DrConfig, SolverTrace,
};
use sparse_varpro::lbfgs::LbfgsConfig;
use sparse_varpro::linalg::{design_norm, DenseMatrix};
use sparse_varpro::varpro::Route;

use crate::config::{BenchConfig, SolverKind, SolverSpec};
use crate::instance::{load_instance, Instance};
use crate::BenchError;

/// Relative gap between final objectives above which solvers are reported
/// as disagreeing.
pub const DISAGREEMENT_TOL: f64 = 1e-6;

pub const CSV_HEADER: [&str; 5] = ["solver", "iteration", "time_s", "objective", "suboptimality"];

#[derive(Clone, Debug, PartialEq)]
pub struct Disagreement {
    pub best: String,
    pub worst: String,
    pub relative_gap: f64,
}

#[derive(Clone, Debug)]
pub struct BenchReport {
    pub lambda: f64,
    /// One trace per successful solver, labelled by its spec.
    pub traces: Vec<SolverTrace>,
    /// `(label, error)` for solvers that failed.
    pub failures: Vec<(String, String)>,
    /// Minimum objective over every sample of every trace.
    pub f_star: f64,
    pub disagreement: Option<Disagreement>,
    /// On constrained problems, the best final objective among solvers whose
    /// final iterate is feasible. Infeasible iterates can have a smaller
    /// `R(β)` than any feasible point, which then sets `f_star`.
    pub feasible_f_star: Option<f64>,
}

impl BenchReport {
    pub fn from_traces(lambda: f64, traces: Vec<SolverTrace>, failures: Vec<(String, String)>) -> Self {
        let f_star = traces
            .iter()
            .flat_map(|t| t.samples.iter().map(|s| s.objective))
            .filter(|f| f.is_finite())
            .fold(f64::INFINITY, f64::min);
        let finals: Vec<(&str, f64)> = traces
            .iter()
            .map(|t| (t.solver.as_str(), t.final_objective()))
            .filter(|(_, f)| f.is_finite())
            .collect();
        let lo = finals.iter().min_by(|a, b| a.1.total_cmp(&b.1));
        let hi = finals.iter().max_by(|a, b| a.1.total_cmp(&b.1));
        let disagreement = match (lo, hi) {
            (Some(lo), Some(hi)) => {
                let gap = (hi.1 - lo.1) / lo.1.abs().max(1.0);
                (gap > DISAGREEMENT_TOL).then(|| Disagreement {
                    best: lo.0.to_string(),
                    worst: hi.0.to_string(),
                    relative_gap: gap,
                })
            }
            _ => None,
        };
        Self {
            lambda,
            traces,
            failures,
            f_star,
            disagreement,
            feasible_f_star: None,
        }
    }

    /// `f - f*` per sample, in trace order.
    pub fn suboptimality(&self, trace: usize) -> Vec<f64> {
        self.traces[trace]
            .samples
            .iter()
            .map(|s| s.objective - self.f_star)
            .collect()
    }
}

fn lbfgs_from(spec: &SolverSpec) -> Result<LbfgsConfig, BenchError> {
    let mut c = LbfgsConfig::default();
    if let Some(m) = spec.option("memory")? {
        c.memory = m;
    }
    if let Some(t) = spec.option("grad_tol")? {
        c.grad_tol = t;
    }
    Ok(c)
}

fn route_from(spec: &SolverSpec) -> Result<Route, BenchError> {
    match spec.option::<String>("route")?.as_deref() {
        None | Some("auto") => Ok(Route::Auto),
        Some("primal") => Ok(Route::Primal),
        Some("dual") => Ok(Route::Dual),
        Some(other) => Err(BenchError::Config(format!("unknown route {other:?}"))),
    }
}

/// Runs one solver on the instance. Configuration errors are returned as
/// `BenchError::Config`; solver failures as `BenchError::Solver`.
pub fn run_solver(
    instance: &Instance,
    spec: &SolverSpec,
    budget: Budget,
    seed: u64,
) -> Result<SolverTrace, BenchError> {
    let solver = |e: sparse_varpro::baselines::BaselineError| BenchError::Solver(e.to_string());
    let mut trace = match instance {
        Instance::Vector(p) => {
            let k = p.outer_dim();
            let n = p.n_features() * p.targets();
            match spec.kind {
                SolverKind::NoncvxPro => {
                    noncvx_pro(p, &vec![1.0; k], &lbfgs_from(spec)?, route_from(spec)?, budget)
                }
                SolverKind::Ista => {
                    let norm = design_norm(p.design());
                    ista(p, &vec![0.0; n], p.lambda() / (norm * norm).max(f64::MIN_POSITIVE), budget)
                }
                SolverKind::Fista => fista_bb_restart(p, &vec![0.0; n], budget),
                SolverKind::Cd => coordinate_descent_lasso(p, budget, spec.option("tol")?.unwrap_or(1e-12)),
                SolverKind::Irls => irls_vector(p, spec.option("eps")?.unwrap_or(1e-8), budget),
                SolverKind::Altmin => altmin_noncvx(p, &vec![1.0; k], budget),
                SolverKind::Quadvar => quad_variational(p, &vec![1.0; k], &lbfgs_from(spec)?, budget),
                SolverKind::DouglasRachford => {
                    let d = DrConfig::default();
                    let config = DrConfig {
                        mu: spec.option("mu")?.unwrap_or(d.mu),
                        gamma: spec.option("gamma")?.unwrap_or(d.gamma),
                    };
                    douglas_rachford_bp(p, config, budget)
                }
                SolverKind::ChambollePock => {
                    let d = CpConfig::balanced(design_norm(p.design()));
                    let config = CpConfig::new(
                        spec.option("sigma")?.unwrap_or(d.sigma),
                        spec.option("theta")?.unwrap_or(d.theta),
                        spec.option("step_product")?.unwrap_or(d.step_product),
                    )
                    .map_err(solver)?;
                    chambolle_pock_bp(p, config, budget)
                }
            }
        }
        Instance::MultiTask { mt, lambda } => match spec.kind {
            SolverKind::NoncvxPro => {
                let (n, r) = (mt.n_features(), mt.rank());
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let data = (0..n * r).map(|_| StandardNormal.sample(&mut rng)).collect();
                let v0 = DenseMatrix::new(n, r, data).expect("finite samples");
                noncvx_pro_matrix(mt, *lambda, &v0, &lbfgs_from(spec)?, budget)
            }
            SolverKind::Irls => irls_matrix(mt, *lambda, spec.option("eps")?.unwrap_or(1e-8), budget),
            other => {
                return Err(BenchError::Solver(format!(
                    "{} does not support multitask trace-norm problems",
                    other.name()
                )))
            }
        },
    }
    .map_err(solver)?;
    trace.solver = spec.label();
    Ok(trace)
}

/// Runs every solver under the configured budget. Solver failures are
/// collected in the report; only an unloadable problem or an invalid solver
/// option aborts.
pub fn run_benchmark(config: &BenchConfig) -> Result<BenchReport, BenchError> {
    if config.solvers.is_empty() {
        return Err(BenchError::Config("solver list is empty".into()));
    }
    let instance = load_instance(config)?;
    let budget = Budget::iters(config.max_iters).with_time(config.budget_s);
    run_instance(&instance, &config.solvers, budget, config.seed, config.parallel)
}

/// [`run_benchmark`] on an already loaded instance.
pub fn run_instance(
    instance: &Instance,
    solvers: &[SolverSpec],
    budget: Budget,
    seed: u64,
    parallel: bool,
) -> Result<BenchReport, BenchError> {
    if solvers.is_empty() {
        return Err(BenchError::Config("solver list is empty".into()));
    }
    let run = |spec: &SolverSpec| (spec.label(), run_solver(instance, spec, budget, seed));
    let results: Vec<(String, Result<SolverTrace, BenchError>)> = if parallel {
        solvers.par_iter().map(run).collect()
    } else {
        solvers.iter().map(run).collect()
    };
    let mut traces = Vec::new();
    let mut failures = Vec::new();
    for (label, r) in results {
        match r {
            Ok(t) => traces.push(t),
            Err(BenchError::Solver(msg)) => failures.push((label, msg)),
            Err(e) => return Err(e),
        }
    }
    let mut report = BenchReport::from_traces(instance.lambda(), traces, failures);
    if let Instance::Vector(p) = instance {
        if p.lambda() == 0.0 {
            report.feasible_f_star = report
                .traces
                .iter()
                .filter(|t| p.is_feasible(&t.beta))
                .map(|t| t.final_objective())
                .reduce(f64::min);
        }
    }
    Ok(report)
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// One row per sample: solver, iteration, time_s, objective, suboptimality.
pub fn write_csv<W: Write>(report: &BenchReport, w: W) -> Result<(), BenchError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CSV_HEADER)?;
    for (i, t) in report.traces.iter().enumerate() {
        for (s, sub) in t.samples.iter().zip(report.suboptimality(i)) {
            out.write_record([
                t.solver.clone(),
                s.iteration.to_string(),
                format_float(s.time_s),
                format_float(s.objective),
                format_float(sub),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn emit_csv(report: &BenchReport, path: &Path) -> Result<(), BenchError> {
    let f = std::fs::File::create(path)
        .map_err(|e| BenchError::Io(format!("{}: {e}", path.display())))?;
    write_csv(report, std::io::BufWriter::new(f))
}
