//! Benchmark harness for the sparse-varpro solvers: problem loading and
//! generation, solver races with wall-clock sampling, suboptimality
//! reporting, CSV output, and the `ℓq` recovery-phase experiment.

pub mod config;
pub mod instance;
pub mod phase;
pub mod report;

use thiserror::Error;

pub use config::{
    parse_config_file, parse_problem, parse_reg, parse_solvers, merge_settings, BenchConfig,
    LambdaSpec, ProblemSpec, RegSpec, SolverKind, SolverSpec,
};
pub use instance::{load_instance, multitask_lambda_max, Instance};
pub use phase::{lq_phase_experiment, PhaseConfig, PhaseTable, RECOVERY_TOL};
pub use report::{
    emit_csv, format_float, run_benchmark, run_instance, run_solver, write_csv, BenchReport, Disagreement,
    CSV_HEADER, DISAGREEMENT_TOL,
};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("problem load error: {0}")]
    ProblemLoad(String),
    #[error("solver error: {0}")]
    Solver(String),
    #[error("io error: {0}")]
    Io(String),
}

impl BenchError {
    /// Process exit code: 2 for configuration errors, 3 for problem-load
    /// errors, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) => 2,
            BenchError::ProblemLoad(_) => 3,
            BenchError::Solver(_) | BenchError::Io(_) => 1,
        }
    }
}

impl From<csv::Error> for BenchError {
    fn from(e: csv::Error) -> Self {
        BenchError::Io(e.to_string())
    }
}

impl From<std::io::Error> for BenchError {
    fn from(e: std::io::Error) -> Self {
        BenchError::Io(e.to_string())
    }
}
