use std::collections::BTreeSet;
use std::io::BufRead;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Problem, ProblemError};
use crate::linalg::SparseMatrix;
use crate::regularizers::{GroupStructure, Regularizer};

/// `nodes x edges` divergence matrix: edge `e = (i, j)` has `+1` at row `i`
/// and `-1` at row `j`.
pub fn graph_incidence(
    edges: &[(usize, usize)],
    node_count: usize,
) -> Result<SparseMatrix, ProblemError> {
    let mut triplets = Vec::with_capacity(2 * edges.len());
    for (e, &(i, j)) in edges.iter().enumerate() {
        for node in [i, j] {
            if node >= node_count {
                return Err(ProblemError::NodeOutOfRange {
                    edge: e,
                    node,
                    node_count,
                });
            }
        }
        if i == j {
            return Err(ProblemError::SelfLoop { edge: e });
        }
        triplets.push((i, e, 1.0));
        triplets.push((j, e, -1.0));
    }
    Ok(SparseMatrix::from_triplets(
        node_count,
        edges.len(),
        &triplets,
    )?)
}

/// Reads `i j` pairs (0-based), one per line; blank lines and `#` comments
/// are skipped.
pub fn parse_edge_list<R: BufRead>(reader: R) -> Result<Vec<(usize, usize)>, ProblemError> {
    let mut edges = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| ProblemError::Io(e.to_string()))?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let bad = || ProblemError::Parse {
            line: lineno + 1,
            message: format!("expected \"i j\", got {content:?}"),
        };
        let mut it = content.split_whitespace();
        let i = it.next().and_then(|t| t.parse().ok()).ok_or_else(bad)?;
        let j = it.next().and_then(|t| t.parse().ok()).ok_or_else(bad)?;
        if it.next().is_some() {
            return Err(bad());
        }
        edges.push((i, j));
    }
    Ok(edges)
}

/// Minimal-flow problem `min Σ_e |f_e|` s.t. `div f = a - b`.
#[derive(Clone, Debug)]
pub struct BeckmannProblem {
    node_count: usize,
    edges: Vec<(usize, usize)>,
    divergence: SparseMatrix,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl BeckmannProblem {
    pub fn new(
        node_count: usize,
        edges: Vec<(usize, usize)>,
        a: Vec<f64>,
        b: Vec<f64>,
    ) -> Result<Self, ProblemError> {
        if a.len() != node_count || b.len() != node_count {
            return Err(ProblemError::Dimension(format!(
                "source/sink must have {node_count} entries, got {} and {}",
                a.len(),
                b.len()
            )));
        }
        let imbalance = a.iter().sum::<f64>() - b.iter().sum::<f64>();
        if imbalance.abs() > 1e-12 {
            return Err(ProblemError::MassImbalance(imbalance));
        }
        let divergence = graph_incidence(&edges, node_count)?;
        Ok(Self {
            node_count,
            edges,
            divergence,
            a,
            b,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn divergence(&self) -> &SparseMatrix {
        &self.divergence
    }

    pub fn source(&self) -> &[f64] {
        &self.a
    }

    pub fn sink(&self) -> &[f64] {
        &self.b
    }

    /// `y = a - b`.
    pub fn rhs(&self) -> Vec<f64> {
        self.a.iter().zip(&self.b).map(|(a, b)| a - b).collect()
    }

    /// Constrained (`λ = 0`) problem on the flow; singleton groups unless a
    /// group structure over edges is given.
    pub fn to_problem(&self, groups: Option<GroupStructure>) -> Result<Problem, ProblemError> {
        let reg = match groups {
            Some(g) => Regularizer::GroupL2(g),
            None => Regularizer::L1,
        };
        Problem::new(self.divergence.clone(), self.rhs(), 0.0, reg)
    }
}

/// Connected simple graph: a random spanning tree plus `edge_count - (nodes - 1)`
/// further distinct edges. Edge orientation is random.
pub fn random_connected_graph(nodes: usize, edge_count: usize, seed: u64) -> Vec<(usize, usize)> {
    assert!(nodes >= 2, "need at least two nodes");
    let max_edges = nodes * (nodes - 1) / 2;
    assert!(
        edge_count >= nodes - 1 && edge_count <= max_edges,
        "edge count {edge_count} outside [{}, {max_edges}]",
        nodes - 1
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..nodes).collect();
    order.shuffle(&mut rng);
    let mut seen = BTreeSet::new();
    let mut edges = Vec::with_capacity(edge_count);
    let mut push = |i: usize, j: usize, rng: &mut ChaCha8Rng| {
        if i == j || !seen.insert((i.min(j), i.max(j))) {
            return false;
        }
        edges.push(if rng.random::<bool>() { (i, j) } else { (j, i) });
        true
    };
    for k in 1..nodes {
        let parent = order[rng.random_range(0..k)];
        push(order[k], parent, &mut rng);
    }
    let mut added = nodes - 1;
    while added < edge_count {
        let i = rng.random_range(0..nodes);
        let j = rng.random_range(0..nodes);
        if push(i, j, &mut rng) {
            added += 1;
        }
    }
    edges
}

/// Random connected instance with nonnegative source and sink of unit mass.
pub fn random_beckmann(
    nodes: usize,
    edge_count: usize,
    seed: u64,
) -> Result<BeckmannProblem, ProblemError> {
    let edges = random_connected_graph(nodes, edge_count, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut draw = || {
        let w: Vec<f64> = (0..nodes).map(|_| rng.random::<f64>()).collect();
        let s: f64 = w.iter().sum();
        w.into_iter().map(|v| v / s).collect::<Vec<f64>>()
    };
    let a = draw();
    let mut b = draw();
    // Exact mass balance: absorb rounding into the last sink entry.
    let diff = a.iter().sum::<f64>() - b.iter().sum::<f64>();
    b[nodes - 1] += diff;
    BeckmannProblem::new(nodes, edges, a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_incidence() {
        let d = graph_incidence(&[(0, 1), (1, 2)], 3).unwrap().to_dense();
        assert_eq!(d.row(0), &[1.0, 0.0]);
        assert_eq!(d.row(1), &[-1.0, 1.0]);
        assert_eq!(d.row(2), &[0.0, -1.0]);
        let d = graph_incidence(&[(0, 1)], 2).unwrap().to_dense();
        assert_eq!(d.column(0), vec![1.0, -1.0]);
    }

    #[test]
    fn rejects_self_loops_and_bad_nodes() {
        assert_eq!(
            graph_incidence(&[(0, 1), (2, 2)], 3).unwrap_err(),
            ProblemError::SelfLoop { edge: 1 }
        );
        assert!(matches!(
            graph_incidence(&[(0, 3)], 3),
            Err(ProblemError::NodeOutOfRange { .. })
        ));
    }

    #[test]
    fn random_graph_columns_sum_to_zero() {
        let edges = random_connected_graph(5, 7, 9);
        assert_eq!(edges.len(), 7);
        let d = graph_incidence(&edges, 5).unwrap();
        assert!(d.column_sums().iter().all(|s| *s == 0.0));
    }

    #[test]
    fn mass_balance_enforced() {
        let err = BeckmannProblem::new(2, vec![(0, 1)], vec![1.0, 0.0], vec![0.0, 0.5]);
        assert!(matches!(err, Err(ProblemError::MassImbalance(_))));
        let p = random_beckmann(6, 9, 1).unwrap();
        assert!(p.rhs().iter().sum::<f64>().abs() <= 1e-12);
        p.to_problem(None).unwrap();
    }

    #[test]
    fn edge_list_parsing() {
        let edges = parse_edge_list("0 1\n# comment\n\n1 2\n".as_bytes()).unwrap();
        assert_eq!(edges, vec![(0, 1), (1, 2)]);
        assert!(matches!(
            parse_edge_list("0 1\n2\n".as_bytes()),
            Err(ProblemError::Parse { line: 2, .. })
        ));
    }
}
