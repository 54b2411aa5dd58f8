use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use sparse_varpro::baselines::noncvx_pro_lq;
use sparse_varpro::lbfgs::LbfgsConfig;
use sparse_varpro::linalg::{norm2, sub};
use sparse_varpro::problems::synth_lasso;

use crate::BenchError;

/// A trial succeeds when some restart lands within this `ℓ2` distance of
/// the ground truth.
pub const RECOVERY_TOL: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseConfig {
    pub n: usize,
    pub k_sparse: usize,
    pub m_values: Vec<usize>,
    pub q_values: Vec<f64>,
    pub trials: usize,
    pub restarts: usize,
    pub seed: u64,
    pub lbfgs: LbfgsConfig,
}

impl PhaseConfig {
    pub fn new(n: usize, k_sparse: usize, m_values: Vec<usize>, q_values: Vec<f64>) -> Self {
        Self {
            n,
            k_sparse,
            m_values,
            q_values,
            trials: 20,
            restarts: 10,
            seed: 0,
            lbfgs: LbfgsConfig {
                grad_tol: 1e-10,
                max_iters: 2000,
                ..LbfgsConfig::default()
            },
        }
    }
}

/// `successes[i][j]` counts the trials at `m_values[i]` recovered with
/// `q_values[j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseTable {
    pub m_values: Vec<usize>,
    pub q_values: Vec<f64>,
    pub trials: usize,
    pub successes: Vec<Vec<usize>>,
}

impl PhaseTable {
    pub fn count(&self, m: usize, q: f64) -> Option<usize> {
        let i = self.m_values.iter().position(|&x| x == m)?;
        let j = self.q_values.iter().position(|&x| x == q)?;
        Some(self.successes[i][j])
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<(), BenchError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["m", "q", "successes", "trials"])?;
        for (i, m) in self.m_values.iter().enumerate() {
            for (j, q) in self.q_values.iter().enumerate() {
                out.write_record([
                    m.to_string(),
                    q.to_string(),
                    self.successes[i][j].to_string(),
                    self.trials.to_string(),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

fn trial_seed(seed: u64, m: usize, trial: usize) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15)
        ^ ((m as u64) << 32)
        ^ trial as u64
}

/// Whether some restart of `q`-basis-pursuit recovers `β_true`; stops at the
/// first success. Starting points are shared across `q` values.
fn recovers(
    prob: &sparse_varpro::problems::Problem,
    beta_true: &[f64],
    q: f64,
    starts: &[Vec<f64>],
    config: &LbfgsConfig,
) -> bool {
    starts.iter().any(|v0| match noncvx_pro_lq(prob, q, v0, config) {
        Ok(sol) => norm2(&sub(&sol.beta, beta_true)) <= RECOVERY_TOL,
        Err(_) => false,
    })
}

/// Recovery counts of `min Σ|β|^q s.t. Xβ = y` over Gaussian designs with a
/// `k_sparse`-sparse ground truth. Every `(m, trial)` pair draws one instance
/// and one set of starting points, used for all `q`.
pub fn lq_phase_experiment(config: &PhaseConfig) -> Result<PhaseTable, BenchError> {
    let bad = |m: &str| Err(BenchError::Config(m.to_string()));
    if config.q_values.iter().any(|&q| !(q > 2.0 / 3.0 && q <= 1.0)) {
        return bad("q values must lie in (2/3, 1]");
    }
    if config.m_values.iter().any(|&m| m == 0 || config.k_sparse >= m) {
        return bad("need 0 < m and k_sparse < m for every m");
    }
    if config.k_sparse > config.n || config.restarts == 0 {
        return bad("need k_sparse <= n and at least one restart");
    }
    let jobs: Vec<(usize, usize)> = (0..config.m_values.len())
        .flat_map(|i| (0..config.trials).map(move |t| (i, t)))
        .collect();
    let outcomes: Vec<(usize, Vec<bool>)> = jobs
        .par_iter()
        .map(|&(i, t)| {
            let m = config.m_values[i];
            let s = trial_seed(config.seed, m, t);
            let (prob, beta_true) =
                synth_lasso(m, config.n, config.k_sparse, s).map_err(|e| BenchError::Solver(e.to_string()))?;
            let mut rng = ChaCha8Rng::seed_from_u64(s ^ 0x5151);
            let starts: Vec<Vec<f64>> = (0..config.restarts)
                .map(|_| (0..config.n).map(|_| StandardNormal.sample(&mut rng)).collect())
                .collect();
            let row = config
                .q_values
                .iter()
                .map(|&q| recovers(&prob, &beta_true, q, &starts, &config.lbfgs))
                .collect();
            Ok((i, row))
        })
        .collect::<Result<_, BenchError>>()?;
    let mut successes = vec![vec![0usize; config.q_values.len()]; config.m_values.len()];
    for (i, row) in outcomes {
        for (j, ok) in row.into_iter().enumerate() {
            successes[i][j] += ok as usize;
        }
    }
    Ok(PhaseTable {
        m_values: config.m_values.clone(),
        q_values: config.q_values.clone(),
        trials: config.trials,
        successes,
    })
}
