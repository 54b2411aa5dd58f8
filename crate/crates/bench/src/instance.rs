use std::fs::File;
use std::io::BufReader;

use sparse_varpro::linalg::{Design, Svd};
use sparse_varpro::problems::{
    parse_edge_list, parse_libsvm, random_beckmann, standardize, synth_data, synth_multitask,
    BeckmannProblem, MultiTaskProblem, Problem,
};
use sparse_varpro::regularizers::{lambda_max, GroupStructure, Regularizer};

use crate::config::{BenchConfig, LambdaSpec, ProblemSpec, RegSpec};
use crate::BenchError;

/// A loaded benchmark problem with its regularization strength.
#[derive(Clone, Debug)]
pub enum Instance {
    Vector(Problem),
    MultiTask { mt: MultiTaskProblem, lambda: f64 },
}

impl Instance {
    pub fn lambda(&self) -> f64 {
        match self {
            Instance::Vector(p) => p.lambda(),
            Instance::MultiTask { lambda, .. } => *lambda,
        }
    }
}

enum Data {
    Vector(Design, Vec<f64>),
    MultiTask(MultiTaskProblem),
}

fn load_err(e: impl std::fmt::Display) -> BenchError {
    BenchError::ProblemLoad(e.to_string())
}

fn load_data(spec: &ProblemSpec, seed: u64) -> Result<Data, BenchError> {
    match spec {
        ProblemSpec::Libsvm { path, standardize: std } => {
            let f = File::open(path).map_err(|e| load_err(format!("{}: {e}", path.display())))?;
            let (x, y) = parse_libsvm(BufReader::new(f)).map_err(load_err)?;
            if y.is_empty() {
                return Err(load_err(format!("{}: no samples", path.display())));
            }
            let design = Design::from(x);
            Ok(if *std {
                let (x, y) = standardize(&design, &y);
                Data::Vector(Design::from(x), y)
            } else {
                Data::Vector(design, y)
            })
        }
        ProblemSpec::Synth { m, n, s, noise } => {
            let d = synth_data(*m, *n, *s, *noise, seed);
            Ok(Data::Vector(Design::from(d.x), d.y))
        }
        ProblemSpec::Graph { edges, source, sink } => {
            let f = File::open(edges).map_err(|e| load_err(format!("{}: {e}", edges.display())))?;
            let list = parse_edge_list(BufReader::new(f)).map_err(load_err)?;
            let nodes = list
                .iter()
                .map(|&(i, j)| i.max(j) + 1)
                .max()
                .unwrap_or(0)
                .max(source + 1)
                .max(sink + 1);
            let mut a = vec![0.0; nodes];
            let mut b = vec![0.0; nodes];
            a[*source] = 1.0;
            b[*sink] = 1.0;
            let bp = BeckmannProblem::new(nodes, list, a, b).map_err(load_err)?;
            Ok(beckmann_data(&bp))
        }
        ProblemSpec::RandomGraph { nodes, edges } => {
            let bp = random_beckmann(*nodes, *edges, seed).map_err(load_err)?;
            Ok(beckmann_data(&bp))
        }
        ProblemSpec::MultiTask { tasks, n, m } => {
            Ok(Data::MultiTask(synth_multitask(*tasks, *n, *m, seed).map_err(load_err)?))
        }
    }
}

fn beckmann_data(bp: &BeckmannProblem) -> Data {
    Data::Vector(Design::from(bp.divergence().clone()), bp.rhs())
}

fn regularizer(spec: &RegSpec, n: usize) -> Result<Regularizer, BenchError> {
    match spec {
        RegSpec::L1 => Ok(Regularizer::L1),
        RegSpec::Group(k) => {
            let mut sizes = vec![*k; n / k];
            if n % k != 0 {
                sizes.push(n % k);
            }
            Ok(Regularizer::GroupL2(
                GroupStructure::contiguous(&sizes).map_err(|e| BenchError::Config(e.to_string()))?,
            ))
        }
        RegSpec::Lq(q) => Regularizer::lq(*q).map_err(|e| BenchError::Config(e.to_string())),
        RegSpec::Trace => Err(BenchError::Config(
            "the trace norm needs a multitask problem".into(),
        )),
    }
}

/// `‖[X_1ᵀy_1 … X_Tᵀy_T]‖₂`, the smallest `λ` with `B = 0` optimal.
pub fn multitask_lambda_max(mt: &MultiTaskProblem) -> f64 {
    let cols: Vec<Vec<f64>> = mt.tasks().iter().map(|t| t.x.matvec_t(&t.y)).collect();
    let g = sparse_varpro::linalg::DenseMatrix::from_columns(&cols).expect("equal feature counts");
    Svd::new(&g).singular_values.iter().cloned().fold(0.0, f64::max)
}

/// Loads or generates the data and resolves `λ`. For `ℓq` a fractional `λ`
/// refers to the `ℓ1` value of `λ_max`.
pub fn load_instance(config: &BenchConfig) -> Result<Instance, BenchError> {
    match load_data(&config.problem, config.seed)? {
        Data::Vector(x, y) => {
            let reg = regularizer(&config.reg, x.cols())?;
            let lambda = match config.lambda {
                LambdaSpec::Absolute(l) => l,
                LambdaSpec::Fraction(r) => {
                    let reference = match &reg {
                        Regularizer::Lq(_) => Regularizer::L1,
                        other => other.clone(),
                    };
                    lambda_max(&x, &y, 1, &reference).map_err(load_err)? / r
                }
            };
            if !(lambda > 0.0) && matches!(config.lambda, LambdaSpec::Fraction(_)) {
                return Err(load_err("λ_max is zero (y is orthogonal to the design)"));
            }
            Problem::new(x, y, lambda, reg).map(Instance::Vector).map_err(load_err)
        }
        Data::MultiTask(mt) => {
            if config.reg != RegSpec::Trace {
                return Err(BenchError::Config(
                    "multitask problems take the trace-norm regularizer".into(),
                ));
            }
            let lambda = match config.lambda {
                LambdaSpec::Absolute(l) => l,
                LambdaSpec::Fraction(r) => multitask_lambda_max(&mt) / r,
            };
            if !(lambda > 0.0) {
                return Err(BenchError::Config("trace-norm problems need λ > 0".into()));
            }
            Ok(Instance::MultiTask { mt, lambda })
        }
    }
}
