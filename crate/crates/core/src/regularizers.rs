//! Sparsity-inducing regularizers in quadratic variational form
//! `R(β) = min_η ½ Σ_g ||β_g||² / η_g + ½ h(η)`, together with their prox
//! operators, dual norms and `λ_max`.

use thiserror::Error;

use crate::linalg::{DenseMatrix, Design, Svd};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegularizerError {
    #[error("groups must be disjoint, nonempty and cover 0..{n}: {reason}")]
    InvalidGroups { n: usize, reason: String },
    #[error("q = {q} outside (2/3, 2); v -> h(v^2) is not differentiable")]
    InvalidQ { q: f64 },
    #[error("eta must be entrywise nonnegative (index {index})")]
    NegativeEta { index: usize },
    #[error("the lq proximal operator is not implemented")]
    LqProxUnsupported,
    #[error("operation not supported for the {family} family")]
    UnsupportedFamily { family: &'static str },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

/// Ordered partition of the feature indices `0..n`.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupStructure {
    groups: Vec<Vec<usize>>,
    group_of: Vec<usize>,
}

impl GroupStructure {
    pub fn new(groups: Vec<Vec<usize>>, n: usize) -> Result<Self, RegularizerError> {
        let mut group_of = vec![usize::MAX; n];
        for (g, members) in groups.iter().enumerate() {
            if members.is_empty() {
                return Err(RegularizerError::InvalidGroups {
                    n,
                    reason: format!("group {g} is empty"),
                });
            }
            for &j in members {
                if j >= n {
                    return Err(RegularizerError::InvalidGroups {
                        n,
                        reason: format!("index {j} out of range"),
                    });
                }
                if group_of[j] != usize::MAX {
                    return Err(RegularizerError::InvalidGroups {
                        n,
                        reason: format!("index {j} appears twice"),
                    });
                }
                group_of[j] = g;
            }
        }
        if let Some(j) = group_of.iter().position(|&g| g == usize::MAX) {
            return Err(RegularizerError::InvalidGroups {
                n,
                reason: format!("index {j} not covered"),
            });
        }
        Ok(Self { groups, group_of })
    }

    /// One group per feature (the Lasso).
    pub fn singletons(n: usize) -> Self {
        Self {
            groups: (0..n).map(|j| vec![j]).collect(),
            group_of: (0..n).collect(),
        }
    }

    /// Consecutive blocks of the given sizes.
    pub fn contiguous(sizes: &[usize]) -> Result<Self, RegularizerError> {
        let n = sizes.iter().sum();
        let mut start = 0;
        let groups = sizes
            .iter()
            .map(|&s| {
                let g: Vec<usize> = (start..start + s).collect();
                start += s;
                g
            })
            .collect();
        Self::new(groups, n)
    }

    /// Number of groups `k`.
    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.group_of.len()
    }

    pub fn group(&self, g: usize) -> &[usize] {
        &self.groups[g]
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn group_of(&self, j: usize) -> usize {
        self.group_of[j]
    }

    /// Per-feature expansion `v̄` of a per-group vector.
    pub fn expand(&self, v: &[f64]) -> Vec<f64> {
        self.group_of.iter().map(|&g| v[g]).collect()
    }

    /// Squared norms `||w_g||²` of a column-major `n x targets` vector.
    pub fn group_sq_norms(&self, w: &[f64], targets: usize) -> Vec<f64> {
        let n = self.n_features();
        let mut out = vec![0.0; self.len()];
        for c in 0..targets {
            for (j, &g) in self.group_of.iter().enumerate() {
                let x = w[c * n + j];
                out[g] += x * x;
            }
        }
        out
    }
}

/// Constants of the `ℓq` family: `γ = 2q/(2-q)` and
/// `C_q = (2-q) q^{q/(2-q)}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LqFamily {
    pub q: f64,
    pub gamma: f64,
    pub c_q: f64,
}

impl LqFamily {
    pub fn new(q: f64) -> Result<Self, RegularizerError> {
        if !(q > 2.0 / 3.0 && q < 2.0) {
            return Err(RegularizerError::InvalidQ { q });
        }
        Ok(Self {
            q,
            gamma: 2.0 * q / (2.0 - q),
            c_q: (2.0 - q) * q.powf(q / (2.0 - q)),
        })
    }

    /// Exponent `q/(2-q)` applied to `η` in `h`.
    pub fn eta_exponent(&self) -> f64 {
        self.q / (2.0 - self.q)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Regularizer {
    L1,
    GroupL2(GroupStructure),
    TraceNorm,
    Lq(LqFamily),
}

impl Regularizer {
    pub fn lq(q: f64) -> Result<Self, RegularizerError> {
        LqFamily::new(q).map(Regularizer::Lq)
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            Regularizer::L1 => "l1",
            Regularizer::GroupL2(_) => "group-l2",
            Regularizer::TraceNorm => "trace-norm",
            Regularizer::Lq(_) => "lq",
        }
    }

    /// Partition over which the outer variable `v` lives.
    pub fn groups_for(&self, n: usize) -> GroupStructure {
        match self {
            Regularizer::GroupL2(g) => g.clone(),
            _ => GroupStructure::singletons(n),
        }
    }

    /// `h(η)` for the vector families.
    pub fn h_value(&self, eta: &[f64]) -> Result<f64, RegularizerError> {
        if let Some(index) = eta.iter().position(|&e| e < 0.0) {
            return Err(RegularizerError::NegativeEta { index });
        }
        match self {
            Regularizer::L1 | Regularizer::GroupL2(_) => Ok(eta.iter().sum()),
            Regularizer::Lq(f) => {
                let p = f.eta_exponent();
                Ok(f.c_q * eta.iter().map(|e| e.powf(p)).sum::<f64>())
            }
            Regularizer::TraceNorm => Err(RegularizerError::UnsupportedFamily {
                family: "trace-norm",
            }),
        }
    }

    /// `h(Z) = tr(Z)` for the trace norm; `Z` must be symmetric PSD.
    pub fn h_value_matrix(&self, z: &DenseMatrix) -> Result<f64, RegularizerError> {
        match self {
            Regularizer::TraceNorm => {
                let e = crate::linalg::SymmetricEigen::new(z);
                if e.min() < -1e-12 * e.max().abs().max(1.0) || !z.is_symmetric(1e-10) {
                    return Err(RegularizerError::NegativeEta { index: 0 });
                }
                Ok(z.trace())
            }
            _ => Err(RegularizerError::UnsupportedFamily {
                family: self.family_name(),
            }),
        }
    }

    /// `½ h(v ⊙ v)`.
    pub fn half_h_of_square(&self, v: &[f64]) -> f64 {
        match self {
            Regularizer::Lq(f) => 0.5 * f.c_q * v.iter().map(|x| x.abs().powf(f.gamma)).sum::<f64>(),
            _ => 0.5 * v.iter().map(|x| x * x).sum::<f64>(),
        }
    }

    /// Gradient of `v ↦ ½ h(v ⊙ v)`.
    pub fn h_outer_grad(&self, v: &[f64]) -> Vec<f64> {
        match self {
            Regularizer::Lq(f) => {
                let coef = f.q.powf(2.0 / (2.0 - f.q));
                v.iter()
                    .map(|&x| {
                        if x == 0.0 {
                            0.0
                        } else {
                            coef * x.abs().powf(f.gamma - 1.0) * x.signum()
                        }
                    })
                    .collect()
            }
            _ => v.to_vec(),
        }
    }

    /// Gradient of `V ↦ ½ h(V^T V)`; for the trace norm this is `V`.
    pub fn h_outer_grad_matrix(&self, v: &DenseMatrix) -> Result<DenseMatrix, RegularizerError> {
        match self {
            Regularizer::TraceNorm => Ok(v.clone()),
            _ => Err(RegularizerError::UnsupportedFamily {
                family: self.family_name(),
            }),
        }
    }

    /// `R(β)` for a column-major `n x targets` coefficient vector.
    pub fn value(&self, beta: &[f64], targets: usize) -> f64 {
        match self {
            Regularizer::L1 => beta.iter().map(|b| b.abs()).sum(),
            Regularizer::GroupL2(g) => g
                .group_sq_norms(beta, targets)
                .into_iter()
                .map(f64::sqrt)
                .sum(),
            Regularizer::Lq(f) => beta.iter().map(|b| b.abs().powf(f.q)).sum(),
            Regularizer::TraceNorm => {
                let n = beta.len() / targets.max(1);
                let b = column_major_to_dense(beta, n, targets);
                trace_norm(&b)
            }
        }
    }

    /// Dual norm `R*(w)` for the convex norm families.
    pub fn dual_norm(&self, w: &[f64], targets: usize) -> Result<f64, RegularizerError> {
        match self {
            Regularizer::L1 => Ok(w.iter().fold(0.0, |m, x| m.max(x.abs()))),
            Regularizer::GroupL2(g) => Ok(g
                .group_sq_norms(w, targets)
                .into_iter()
                .fold(0.0, |m, x| m.max(x.sqrt()))),
            _ => Err(RegularizerError::UnsupportedFamily {
                family: self.family_name(),
            }),
        }
    }

    /// `prox_{τR}(β)`: soft-thresholding for `ℓ1`, group soft-thresholding
    /// for group norms.
    pub fn prox(&self, beta: &[f64], tau: f64, targets: usize) -> Result<Vec<f64>, RegularizerError> {
        match self {
            Regularizer::L1 => Ok(beta.iter().map(|&b| soft_threshold(b, tau)).collect()),
            Regularizer::GroupL2(g) => Ok(group_soft_threshold(g, beta, tau, targets)),
            Regularizer::Lq(_) => Err(RegularizerError::LqProxUnsupported),
            Regularizer::TraceNorm => {
                let n = beta.len() / targets.max(1);
                let b = column_major_to_dense(beta, n, targets);
                Ok(dense_to_column_major(&singular_value_threshold(&b, tau)))
            }
        }
    }

    /// Singular value soft-thresholding for the trace norm.
    pub fn prox_matrix(&self, b: &DenseMatrix, tau: f64) -> Result<DenseMatrix, RegularizerError> {
        match self {
            Regularizer::TraceNorm => Ok(singular_value_threshold(b, tau)),
            Regularizer::Lq(_) => Err(RegularizerError::LqProxUnsupported),
            _ => Err(RegularizerError::UnsupportedFamily {
                family: self.family_name(),
            }),
        }
    }
}

pub fn soft_threshold(x: f64, tau: f64) -> f64 {
    x.signum() * (x.abs() - tau).max(0.0)
}

/// `(max(||β_g|| - τ, 0) β_g / ||β_g||)_g` over a column-major `n x targets`
/// vector.
pub fn group_soft_threshold(
    groups: &GroupStructure,
    beta: &[f64],
    tau: f64,
    targets: usize,
) -> Vec<f64> {
    let n = groups.n_features();
    let norms = groups.group_sq_norms(beta, targets);
    let scales: Vec<f64> = norms
        .iter()
        .map(|&s| {
            let nrm = s.sqrt();
            if nrm <= tau || nrm == 0.0 {
                0.0
            } else {
                (nrm - tau) / nrm
            }
        })
        .collect();
    beta.iter()
        .enumerate()
        .map(|(idx, &b)| b * scales[groups.group_of(idx % n)])
        .collect()
}

pub fn trace_norm(b: &DenseMatrix) -> f64 {
    Svd::new(b).singular_values.iter().sum()
}

pub fn singular_value_threshold(b: &DenseMatrix, tau: f64) -> DenseMatrix {
    Svd::new(b).reconstruct_with(|s| (s - tau).max(0.0))
}

/// Smallest `λ` at which the zero vector solves the problem:
/// `||X^T y||_∞` for `ℓ1`, `max_g ||X_g^T Y||_F` for group norms.
pub fn lambda_max(
    x: &Design,
    y: &[f64],
    targets: usize,
    reg: &Regularizer,
) -> Result<f64, RegularizerError> {
    let m = x.rows();
    if y.len() != m * targets {
        return Err(RegularizerError::DimensionMismatch {
            expected: m * targets,
            found: y.len(),
        });
    }
    let mut corr = Vec::with_capacity(x.cols() * targets);
    for c in 0..targets {
        corr.extend(x.matvec_t(&y[c * m..(c + 1) * m]));
    }
    reg.dual_norm(&corr, targets)
}

pub(crate) fn column_major_to_dense(v: &[f64], rows: usize, cols: usize) -> DenseMatrix {
    let mut m = DenseMatrix::zeros(rows, cols);
    for c in 0..cols {
        for i in 0..rows {
            m.set(i, c, v[c * rows + i]);
        }
    }
    m
}

pub(crate) fn dense_to_column_major(m: &DenseMatrix) -> Vec<f64> {
    let mut v = Vec::with_capacity(m.rows() * m.cols());
    for c in 0..m.cols() {
        v.extend(m.column(c));
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm2;
    use proptest::prelude::*;

    #[test]
    fn group_structure_validation() {
        assert!(GroupStructure::new(vec![vec![0, 1], vec![1]], 2).is_err());
        assert!(GroupStructure::new(vec![vec![0], vec![]], 1).is_err());
        assert!(GroupStructure::new(vec![vec![0]], 2).is_err());
        let g = GroupStructure::contiguous(&[2, 1]).unwrap();
        assert_eq!(g.expand(&[5.0, 7.0]), vec![5.0, 5.0, 7.0]);
    }

    #[test]
    fn lq_constants() {
        assert!(Regularizer::lq(0.6).is_err());
        assert!(Regularizer::lq(2.0).is_err());
        let f = LqFamily::new(1.0).unwrap();
        assert_eq!(f.c_q, 1.0);
        assert_eq!(f.gamma, 2.0);
        let f = LqFamily::new(0.8).unwrap();
        assert!((f.c_q - 1.2 * 0.8f64.powf(0.8 / 1.2)).abs() < 1e-15);
    }

    #[test]
    fn h_values() {
        let g = Regularizer::GroupL2(GroupStructure::singletons(3));
        assert_eq!(g.h_value(&[1.0, 2.0, 3.0]).unwrap(), 6.0);
        let l1 = Regularizer::lq(1.0).unwrap();
        assert!((l1.h_value(&[1.0, 2.0, 3.0]).unwrap() - 6.0).abs() < 1e-14);
        assert_eq!(
            Regularizer::TraceNorm
                .h_value_matrix(&DenseMatrix::from_diag(&[1.0, 2.0]))
                .unwrap(),
            3.0
        );
        assert!(matches!(
            Regularizer::L1.h_value(&[1.0, -1.0]),
            Err(RegularizerError::NegativeEta { index: 1 })
        ));
    }

    #[test]
    fn h_outer_grads() {
        let g = Regularizer::GroupL2(GroupStructure::singletons(2));
        assert_eq!(g.h_outer_grad(&[1.0, -2.0]), vec![1.0, -2.0]);
        let lq1 = Regularizer::lq(1.0).unwrap();
        assert!((lq1.h_outer_grad(&[2.0])[0] - 2.0).abs() < 1e-14);
        // finite differences of ½h(v²) at v = 2
        let h = 1e-6;
        let fd = (lq1.half_h_of_square(&[2.0 + h]) - lq1.half_h_of_square(&[2.0 - h])) / (2.0 * h);
        assert!((fd - 2.0).abs() < 1e-8);
        let v = DenseMatrix::from_diag(&[3.0, 0.0]);
        assert_eq!(Regularizer::TraceNorm.h_outer_grad_matrix(&v).unwrap(), v);
    }

    #[test]
    fn prox_examples() {
        assert_eq!(Regularizer::L1.prox(&[3.0], 1.0, 1).unwrap(), vec![2.0]);
        let g = Regularizer::GroupL2(GroupStructure::contiguous(&[2]).unwrap());
        assert_eq!(g.prox(&[3.0, 4.0], 5.0, 1).unwrap(), vec![0.0, 0.0]);
        let b = Regularizer::TraceNorm
            .prox_matrix(&DenseMatrix::from_diag(&[3.0, 1.0]), 2.0)
            .unwrap();
        assert!(b.sub(&DenseMatrix::from_diag(&[1.0, 0.0])).max_abs() < 1e-14);
        assert!(matches!(
            Regularizer::lq(0.8).unwrap().prox(&[1.0], 1.0, 1),
            Err(RegularizerError::LqProxUnsupported)
        ));
    }

    #[test]
    fn lambda_max_examples() {
        let x: Design = DenseMatrix::from_diag(&[1.0, 2.0]).into();
        assert_eq!(lambda_max(&x, &[1.0, 1.0], 1, &Regularizer::L1).unwrap(), 2.0);
        let x: Design = DenseMatrix::identity(2).into();
        let one_group = Regularizer::GroupL2(GroupStructure::contiguous(&[2]).unwrap());
        assert_eq!(lambda_max(&x, &[3.0, 4.0], 1, &one_group).unwrap(), 5.0);
        assert!(lambda_max(&x, &[3.0, 4.0], 1, &Regularizer::TraceNorm).is_err());
    }

    fn group_reg() -> Regularizer {
        Regularizer::GroupL2(GroupStructure::contiguous(&[2, 3, 1]).unwrap())
    }

    proptest! {
        #[test]
        fn prox_zero_step_is_identity(beta in prop::collection::vec(-5.0f64..5.0, 6)) {
            prop_assert_eq!(Regularizer::L1.prox(&beta, 0.0, 1).unwrap(), beta.clone());
            prop_assert_eq!(group_reg().prox(&beta, 0.0, 1).unwrap(), beta);
        }

        #[test]
        fn prox_is_nonexpansive(
            a in prop::collection::vec(-5.0f64..5.0, 6),
            b in prop::collection::vec(-5.0f64..5.0, 6),
            tau in 0.0f64..3.0,
        ) {
            for reg in [Regularizer::L1, group_reg()] {
                let pa = reg.prox(&a, tau, 1).unwrap();
                let pb = reg.prox(&b, tau, 1).unwrap();
                let d1 = norm2(&crate::linalg::sub(&pa, &pb));
                let d0 = norm2(&crate::linalg::sub(&a, &b));
                prop_assert!(d1 <= d0 + 1e-12);
            }
        }

        #[test]
        fn h_outer_grad_matches_finite_differences(
            v in prop::collection::vec(prop_oneof![-3.0f64..-0.2, 0.2f64..3.0], 4),
            q in 0.7f64..1.9,
        ) {
            let regs = [Regularizer::L1, Regularizer::lq(q).unwrap()];
            for reg in regs {
                let g = reg.h_outer_grad(&v);
                for i in 0..v.len() {
                    // Separable: differentiate coordinate i in isolation.
                    let h = 1e-6 * v[i].abs().max(1.0);
                    let fd = (reg.half_h_of_square(&[v[i] + h])
                        - reg.half_h_of_square(&[v[i] - h]))
                        / (2.0 * h);
                    prop_assert!((fd - g[i]).abs() <= 1e-6 * g[i].abs().max(1.0));
                }
            }
        }
    }
}
