//! Instance generators and independent oracles shared by the integration
//! suites.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sparse_varpro::linalg::{norm2, DenseMatrix};
use sparse_varpro::problems::{BeckmannProblem, MultiTaskProblem, Problem, Task};
use sparse_varpro::regularizers::{GroupStructure, Regularizer};

pub const LAMBDA_FRACTIONS: [f64; 3] = [0.5, 0.1, 0.02];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DenseMatrix {
    DenseMatrix::new(m, n, gaussian_vec(rng, m * n)).unwrap()
}

/// `k` contiguous nonempty groups covering `0..n`.
pub fn random_groups(rng: &mut ChaCha8Rng, n: usize, k: usize) -> GroupStructure {
    let k = k.clamp(1, n);
    let mut cuts: Vec<usize> = rand::seq::index::sample(rng, n - 1, k - 1)
        .into_iter()
        .map(|c| c + 1)
        .collect();
    cuts.sort_unstable();
    let mut sizes = Vec::with_capacity(k);
    let mut prev = 0;
    for c in cuts.into_iter().chain([n]) {
        sizes.push(c - prev);
        prev = c;
    }
    GroupStructure::contiguous(&sizes).unwrap()
}

/// Gaussian group-Lasso instance with `m, n <= max_dim`, 1 to 5 groups and
/// `λ = fraction · λ_max`.
pub fn random_group_lasso(seed: u64, max_dim: usize, fraction: f64) -> Problem {
    let mut r = rng(seed);
    let m = r.random_range(2..=max_dim);
    let n = r.random_range(2..=max_dim);
    let k = r.random_range(1..=5usize.min(n));
    let x = gaussian_matrix(&mut r, m, n);
    let y = gaussian_vec(&mut r, m);
    let groups = random_groups(&mut r, n, k);
    let p = Problem::new(x, y, 1.0, Regularizer::GroupL2(groups)).unwrap();
    let lmax = p.lambda_max().unwrap();
    p.with_lambda(fraction * lmax).unwrap()
}

/// Gaussian Lasso instance of the given shape with `λ = fraction · λ_max`.
pub fn random_lasso(seed: u64, m: usize, n: usize, fraction: f64) -> Problem {
    let mut r = rng(seed);
    let x = gaussian_matrix(&mut r, m, n);
    let y = gaussian_vec(&mut r, m);
    let p = Problem::new(x, y, 1.0, Regularizer::L1).unwrap();
    let lmax = p.lambda_max().unwrap();
    p.with_lambda(fraction * lmax).unwrap()
}

pub fn random_multitask(seed: u64, tasks: usize, n: usize, m_per_task: usize) -> MultiTaskProblem {
    let mut r = rng(seed);
    let tasks = (0..tasks)
        .map(|_| Task {
            x: gaussian_matrix(&mut r, m_per_task, n),
            y: gaussian_vec(&mut r, m_per_task),
        })
        .collect();
    MultiTaskProblem::new(tasks).unwrap()
}

/// Central differences of a scalar function.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut a = x.to_vec();
            let mut b = x.to_vec();
            a[i] += h;
            b[i] -= h;
            (f(&a) - f(&b)) / (2.0 * h)
        })
        .collect()
}

/// Central differences of a gradient, symmetrized.
pub fn fd_hessian(g: impl Fn(&[f64]) -> Vec<f64>, x: &[f64], h: f64) -> DenseMatrix {
    let k = x.len();
    let mut out = DenseMatrix::zeros(k, k);
    for j in 0..k {
        let mut a = x.to_vec();
        let mut b = x.to_vec();
        a[j] += h;
        b[j] -= h;
        let (ga, gb) = (g(&a), g(&b));
        for i in 0..k {
            out.add_to(i, j, 0.25 * (ga[i] - gb[i]) / h);
            out.add_to(j, i, 0.25 * (ga[i] - gb[i]) / h);
        }
    }
    out
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

/// Minimum `ℓ1` flow by enumeration of basic feasible solutions.
///
/// With a connected graph the divergence matrix has rank `nodes - 1` and
/// the basic solutions of `min ||β||₁ s.t. Xβ = y` (split form `β = p - n`)
/// are the unique flows supported on spanning trees. Returns the optimal
/// value and one optimal flow.
pub fn beckmann_lp_oracle(bp: &BeckmannProblem) -> (f64, Vec<f64>) {
    let nodes = bp.node_count();
    let edges = bp.edges();
    let y = bp.rhs();
    let e = edges.len();
    let need = nodes - 1;
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut pick: Vec<usize> = (0..need).collect();
    loop {
        if let Some(flow) = tree_flow(nodes, edges, &pick, &y) {
            let val: f64 = flow.iter().map(|v| v.abs()).sum();
            if best.as_ref().is_none_or(|(b, _)| val < *b) {
                best = Some((val, flow));
            }
        }
        // Next combination in lexicographic order.
        let mut i = need;
        loop {
            if i == 0 {
                return best.expect("graph must be connected");
            }
            i -= 1;
            if pick[i] < e - need + i {
                break;
            }
        }
        pick[i] += 1;
        for j in i + 1..need {
            pick[j] = pick[j - 1] + 1;
        }
    }
}

/// Flow on the edge subset `pick` matching divergence `y`, when `pick` is a
/// spanning tree; solved by peeling leaves.
fn tree_flow(nodes: usize, edges: &[(usize, usize)], pick: &[usize], y: &[f64]) -> Option<Vec<f64>> {
    let mut parent: Vec<usize> = (0..nodes).collect();
    fn find(p: &mut [usize], mut a: usize) -> usize {
        while p[a] != a {
            p[a] = p[p[a]];
            a = p[a];
        }
        a
    }
    for &k in pick {
        let (a, b) = edges[k];
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra == rb {
            return None;
        }
        parent[ra] = rb;
    }
    let mut flow = vec![0.0; edges.len()];
    let mut excess = y.to_vec();
    let mut degree = vec![0usize; nodes];
    let mut alive: Vec<bool> = vec![false; edges.len()];
    for &k in pick {
        alive[k] = true;
        degree[edges[k].0] += 1;
        degree[edges[k].1] += 1;
    }
    for _ in 0..pick.len() {
        let leaf = (0..nodes).find(|&v| degree[v] == 1).unwrap();
        let k = pick
            .iter()
            .copied()
            .find(|&k| alive[k] && (edges[k].0 == leaf || edges[k].1 == leaf))
            .unwrap();
        let (a, b) = edges[k];
        // Column of edge (a -> b) is +1 at a and -1 at b.
        let (f, other) = if a == leaf {
            (excess[leaf], b)
        } else {
            (-excess[leaf], a)
        };
        flow[k] = f;
        if a == leaf {
            excess[other] += f;
        } else {
            excess[other] -= f;
        }
        excess[leaf] = 0.0;
        alive[k] = false;
        degree[a] -= 1;
        degree[b] -= 1;
    }
    Some(flow)
}

pub fn l1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

pub fn rel_residual(prob: &Problem, beta: &[f64]) -> f64 {
    norm2(&prob.residual(beta)) / (1.0 + norm2(prob.y()))
}

/// `n` log-spaced points from `lo` to `hi`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Squared norms `‖β_g‖²` of a two-group vector under `reg`.
pub fn two_group_sq_norms(reg: &Regularizer, beta: &[f64]) -> [f64; 2] {
    let s = reg.groups_for(beta.len()).group_sq_norms(beta, 1);
    assert_eq!(s.len(), 2, "expected exactly two groups");
    [s[0], s[1]]
}

/// Minimum of `½ Σ ‖β_g‖²/η_g + ½ h(η)` over a 2-D log grid of `η`.
pub fn variational_grid_min(reg: &Regularizer, beta: &[f64], points: usize) -> f64 {
    let s = two_group_sq_norms(reg, beta);
    let grid = log_grid(1e-4, 1e2, points);
    let mut best = f64::INFINITY;
    for &e0 in &grid {
        for &e1 in &grid {
            let h = reg.h_value(&[e0, e1]).unwrap();
            best = best.min(0.5 * (s[0] / e0 + s[1] / e1) + 0.5 * h);
        }
    }
    best
}

/// Minimum of `Σ ‖β_g‖²/η_g` over a uniform grid on the boundary `h(η) = 1`,
/// with `h(η) = c Σ η_g^p`; the objective decreases in each `η_g`, so the
/// infimum over `h(η) ≤ 1` is attained there.
pub fn squared_identity_grid_min(reg: &Regularizer, beta: &[f64], points: usize) -> f64 {
    let s = two_group_sq_norms(reg, beta);
    let (c, p) = match reg {
        Regularizer::Lq(f) => (f.c_q, f.eta_exponent()),
        _ => (1.0, 1.0),
    };
    let mut best = f64::INFINITY;
    for i in 1..points {
        let t = i as f64 / points as f64;
        let eta = [(t / c).powf(1.0 / p), ((1.0 - t) / c).powf(1.0 / p)];
        debug_assert!((reg.h_value(&eta).unwrap() - 1.0).abs() < 1e-12);
        best = best.min(s[0] / eta[0] + s[1] / eta[1]);
    }
    best
}
