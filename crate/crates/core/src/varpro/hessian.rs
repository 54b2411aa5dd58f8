use super::{evaluate, Route, VarProError};
use crate::linalg::{norm2, Cholesky, DenseMatrix, SymmetricEigen};
use crate::problems::Problem;
use crate::regularizers::Regularizer;

/// Groups with `|v_g| > SUPPORT_CUTOFF * max|v|` form the support `J`.
pub const SUPPORT_CUTOFF: f64 = 1e-10;

/// Hessian of `f` for the group-Lasso family in block form.
///
/// Over the support `J` the Hessian is `diag(1 - ||ξ_g||²) + 4 Ξᵀ W Ξ` with
/// `W = I - λ (M_J + λI)⁻¹`, `M_J = (v_g v_h X_gᵀX_h)_{g,h ∈ J}` and `Ξ` the
/// block-diagonal matrix holding `ξ_g` in column `g`. Off the support it is
/// the diagonal `1 - ||ξ_g||²`, with zero cross terms.
#[derive(Clone, Debug)]
pub struct HessianBlocks {
    /// Group indices in `J`, ascending.
    pub support: Vec<usize>,
    /// `1 - ||ξ_g||²` for every group.
    pub diag: Vec<f64>,
    /// `W` over the coordinates of `J` (shared by all targets).
    pub w: DenseMatrix,
    /// `Ξ` for each target: rows are the coordinates of `J`, columns the
    /// groups of `J`.
    pub xi_blocks: Vec<DenseMatrix>,
    /// Smallest eigenvalue of `M_J`; `None` when `J` is empty.
    pub sigma_hat: Option<f64>,
    /// `||ξ_g||` for every group.
    pub xi_norms: Vec<f64>,
    pub lambda: f64,
}

impl HessianBlocks {
    /// Dense `k x k` Hessian.
    pub fn assemble(&self) -> DenseMatrix {
        let k = self.diag.len();
        let mut h = DenseMatrix::from_diag(&self.diag);
        for xi in &self.xi_blocks {
            let wx = self.w.matmul(xi);
            let core = xi.transpose().matmul(&wx);
            for (a, &ga) in self.support.iter().enumerate() {
                for (b, &gb) in self.support.iter().enumerate() {
                    h.add_to(ga, gb, 4.0 * core.get(a, b));
                }
            }
        }
        debug_assert_eq!(h.rows(), k);
        h
    }

    /// `min(4(1 - λ/(λ + σ̂)), min_{g ∉ J} (1 - ||ξ_g||²))`, the lower bound on
    /// the Hessian spectrum at a stationary point.
    pub fn eigenvalue_floor(&self) -> f64 {
        let on = self
            .sigma_hat
            .map_or(f64::INFINITY, |s| 4.0 * (1.0 - self.lambda / (self.lambda + s)));
        let off = (0..self.diag.len())
            .filter(|g| !self.support.contains(g))
            .map(|g| self.diag[g])
            .fold(f64::INFINITY, f64::min);
        on.min(off)
    }
}

/// Exact Hessian blocks of `f` at `v`.
pub fn hessian(prob: &Problem, v: &[f64]) -> Result<HessianBlocks, VarProError> {
    if !matches!(prob.regularizer(), Regularizer::L1 | Regularizer::GroupL2(_)) {
        return Err(VarProError::Unsupported(format!(
            "hessian of the {} family",
            prob.regularizer().family_name()
        )));
    }
    let lambda = prob.lambda();
    if lambda <= 0.0 {
        return Err(VarProError::Unsupported("hessian at lambda = 0".into()));
    }
    let state = evaluate(prob, v, Route::Auto)?;
    let xi = state.xi.expect("xi is populated for lambda > 0");
    let groups = prob.groups();
    let n = prob.n_features();
    let targets = prob.targets();
    let xi_sq = groups.group_sq_norms(&xi, targets);
    let diag: Vec<f64> = xi_sq.iter().map(|s| 1.0 - s).collect();
    let xi_norms: Vec<f64> = xi_sq.iter().map(|s| s.sqrt()).collect();

    let vmax = v.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let support: Vec<usize> = (0..v.len())
        .filter(|&g| vmax > 0.0 && v[g].abs() > SUPPORT_CUTOFF * vmax)
        .collect();
    let coords: Vec<usize> = support
        .iter()
        .flat_map(|&g| groups.group(g).iter().copied())
        .collect();
    let nj = coords.len();
    let vbar = groups.expand(v);

    let gram = prob.gram();
    let mut m_j = DenseMatrix::zeros(nj, nj);
    for (a, &i) in coords.iter().enumerate() {
        for (b, &j) in coords.iter().enumerate() {
            m_j.set(a, b, vbar[i] * gram.get(i, j) * vbar[j]);
        }
    }
    let sigma_hat = (nj > 0).then(|| SymmetricEigen::new(&m_j).min());
    let mut shifted = m_j;
    shifted.add_diag(lambda);
    let inv = Cholesky::factor(&shifted)?.inverse();
    let mut w = inv.scaled(-lambda);
    w.add_diag(1.0);

    let xi_blocks = (0..targets)
        .map(|c| {
            let mut b = DenseMatrix::zeros(nj, support.len());
            let mut row = 0;
            for (col, &g) in support.iter().enumerate() {
                for &j in groups.group(g) {
                    b.set(row, col, xi[c * n + j]);
                    row += 1;
                }
            }
            b
        })
        .collect();

    Ok(HessianBlocks {
        support,
        diag,
        w,
        xi_blocks,
        sigma_hat,
        xi_norms,
        lambda,
    })
}

/// Nature of a point of `f`.
#[derive(Clone, Debug, PartialEq)]
pub enum Stationarity {
    GlobalMin,
    /// `direction` is a unit eigenvector for `min_eigenvalue < 0`.
    StrictSaddle {
        min_eigenvalue: f64,
        direction: Vec<f64>,
    },
    NotStationary {
        grad_norm: f64,
    },
}

/// Classifies `v` from the gradient norm and the Hessian spectrum.
pub fn classify_stationary(
    prob: &Problem,
    v: &[f64],
    tol: f64,
) -> Result<Stationarity, VarProError> {
    let state = evaluate(prob, v, Route::Auto)?;
    let gn = norm2(&state.grad);
    if gn > tol {
        return Ok(Stationarity::NotStationary { grad_norm: gn });
    }
    let h = hessian(prob, v)?.assemble();
    let eig = SymmetricEigen::new(&h);
    let min = eig.min();
    if min < -tol {
        Ok(Stationarity::StrictSaddle {
            min_eigenvalue: min,
            direction: eig.vectors.column(0),
        })
    } else {
        Ok(Stationarity::GlobalMin)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(lambda: f64) -> Problem {
        Problem::new(
            DenseMatrix::from_rows(&[vec![1.0]]).unwrap(),
            vec![2.0],
            lambda,
            Regularizer::L1,
        )
        .unwrap()
    }

    #[test]
    fn scalar_hessian() {
        let hb = hessian(&scalar(1.0), &[1.0]).unwrap();
        assert_eq!(hb.sigma_hat, Some(1.0));
        assert!((hb.w.get(0, 0) - 0.5).abs() < 1e-15);
        let h = hb.assemble();
        assert!((h.get(0, 0) - 2.0).abs() < 1e-14);
        assert!((hb.eigenvalue_floor() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn hessian_at_zero_is_diagonal() {
        let hb = hessian(&scalar(1.0), &[0.0]).unwrap();
        assert!(hb.support.is_empty());
        assert_eq!(hb.assemble().get(0, 0), 1.0 - 4.0);
    }

    #[test]
    fn remark_one_examples() {
        assert_eq!(
            classify_stationary(&scalar(2.0), &[0.0], 1e-9).unwrap(),
            Stationarity::GlobalMin
        );
        assert_eq!(
            classify_stationary(&scalar(3.0), &[0.0], 1e-9).unwrap(),
            Stationarity::GlobalMin
        );
        assert!(matches!(
            classify_stationary(&scalar(1.0), &[0.0], 1e-9).unwrap(),
            Stationarity::StrictSaddle { .. }
        ));
        assert_eq!(
            classify_stationary(&scalar(1.0), &[1.0], 1e-9).unwrap(),
            Stationarity::GlobalMin
        );
        assert!(matches!(
            classify_stationary(&scalar(1.0), &[0.5], 1e-9).unwrap(),
            Stationarity::NotStationary { .. }
        ));
    }
}
