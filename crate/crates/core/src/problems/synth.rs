use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{MultiTaskProblem, Problem, ProblemError, Task};
use crate::linalg::DenseMatrix;
use crate::regularizers::Regularizer;

/// Gaussian design with a sparse Gaussian ground truth.
#[derive(Clone, Debug)]
pub struct SynthData {
    pub x: DenseMatrix,
    pub y: Vec<f64>,
    pub beta_true: Vec<f64>,
}

/// `X` with iid standard normal entries, `β` with `s` standard normal
/// entries on a uniformly random support, `y = Xβ + σ ε`.
///
/// Reproducible per seed.
pub fn synth_data(m: usize, n: usize, s: usize, noise: f64, seed: u64) -> SynthData {
    assert!(s <= n, "sparsity {s} exceeds feature count {n}");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data: Vec<f64> = (0..m * n).map(|_| rng.sample(StandardNormal)).collect();
    let x = DenseMatrix::new(m, n, data).expect("finite gaussian samples");
    let mut beta_true = vec![0.0; n];
    let mut support = sample(&mut rng, n, s).into_vec();
    support.sort_unstable();
    for j in support {
        beta_true[j] = rng.sample(StandardNormal);
    }
    let mut y = x.matvec(&beta_true);
    if noise > 0.0 {
        for yi in &mut y {
            let e: f64 = rng.sample(StandardNormal);
            *yi += noise * e;
        }
    }
    SynthData { x, y, beta_true }
}

/// Noise-free constrained (`λ = 0`) Lasso instance and its ground truth.
pub fn synth_lasso(
    m: usize,
    n: usize,
    s: usize,
    seed: u64,
) -> Result<(Problem, Vec<f64>), ProblemError> {
    let d = synth_data(m, n, s, 0.0, seed);
    let prob = Problem::new(d.x, d.y, 0.0, Regularizer::L1)?;
    Ok((prob, d.beta_true))
}

/// `T` tasks with `m_per_task` samples each; `X_t` entries are uniform on
/// `[0, 1]` and the targets come from a rank-one coefficient matrix plus
/// small noise.
pub fn synth_multitask(
    tasks: usize,
    n: usize,
    m_per_task: usize,
    seed: u64,
) -> Result<MultiTaskProblem, ProblemError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shared: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let tasks = (0..tasks)
        .map(|_| {
            let data: Vec<f64> = (0..m_per_task * n).map(|_| rng.random::<f64>()).collect();
            let x = DenseMatrix::new(m_per_task, n, data).expect("finite samples");
            let w: f64 = rng.sample(StandardNormal);
            let coef: Vec<f64> = shared.iter().map(|s| s * w).collect();
            let mut y = x.matvec(&coef);
            for yi in &mut y {
                let e: f64 = rng.sample(StandardNormal);
                *yi += 0.1 * e;
            }
            Task { x, y }
        })
        .collect();
    MultiTaskProblem::new(tasks)
}
