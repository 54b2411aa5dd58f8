//! The projected function `f(v)` obtained by eliminating the inner variable
//! of the reparametrized problem in closed form.
//!
//! With `β = v̄ ⊙ u`, where `v̄` repeats `v_g` over the coordinates of group
//! `g`, the inner problem in `u` is a ridge regression. It is solved either on
//! the primal side,
//!
//! ```text
//! (diag(v̄) XᵀX diag(v̄) + λ I) u = v̄ ⊙ Xᵀy,
//! ```
//!
//! or on the dual side,
//!
//! ```text
//! (X diag(v̄²) Xᵀ + λ I) α = -y,        β = -v̄² ⊙ Xᵀα,
//! ```
//!
//! the latter being the only option for the constrained problem `λ = 0`.
//! Both sides yield the same value and gradient of `f`.

mod hessian;
mod matrix;

use thiserror::Error;

use crate::linalg::{
    cg_solve, default_cg_iterations, dot, norm2, solve_spd_multi, woodbury_side_for, Cholesky, DenseMatrix,
    LinalgError, Side, CG_DEFAULT_TOL, DENSE_DIRECT_LIMIT,
};
use crate::problems::{Problem, ProblemError, FEASIBILITY_TOL};
use crate::regularizers::{LqFamily, Regularizer, RegularizerError};

pub use hessian::{classify_stationary, hessian, HessianBlocks, Stationarity, SUPPORT_CUTOFF};
pub use matrix::{evaluate_matrix, f_and_grad_matrix, MatrixVarProState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VarProError {
    #[error("v has {found} entries, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("inner system is inconsistent at lambda = 0 (relative residual {residual:e})")]
    InconsistentSystem { residual: f64 },
    #[error("the primal inner system needs lambda > 0")]
    PrimalNeedsPositiveLambda,
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Regularizer(#[from] RegularizerError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

/// Which inner system to solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Route {
    /// The smaller system, dual when `λ = 0`.
    #[default]
    Auto,
    Primal,
    Dual,
}

impl Route {
    fn resolve(self, prob: &Problem) -> Result<Side, VarProError> {
        match self {
            Route::Auto => Ok(woodbury_side_for(
                prob.n_samples(),
                prob.n_features(),
                prob.lambda(),
            )),
            Route::Dual => Ok(Side::DualM),
            Route::Primal if prob.lambda() == 0.0 => Err(VarProError::PrimalNeedsPositiveLambda),
            Route::Primal => Ok(Side::PrimalN),
        }
    }
}

/// One evaluation of `f` at `v` with the inner solution it produced.
///
/// Vectors over targets are column-major: `u`, `beta` and `xi` have
/// `n * targets` entries and `alpha` has `m * targets`.
#[derive(Clone, Debug)]
pub struct VarProState {
    pub v: Vec<f64>,
    pub side: Side,
    pub u: Option<Vec<f64>>,
    pub alpha: Option<Vec<f64>>,
    /// `Xᵀ(Xβ - y) / λ`; only for `λ > 0`.
    pub xi: Option<Vec<f64>>,
    pub beta: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
}

fn check_len(prob: &Problem, v: &[f64]) -> Result<(), VarProError> {
    if v.len() != prob.outer_dim() {
        return Err(VarProError::DimensionMismatch {
            expected: prob.outer_dim(),
            found: v.len(),
        });
    }
    Ok(())
}

/// `v̄ ⊙ w` on every target column of `w`.
fn scale_by_vbar(vbar: &[f64], w: &[f64]) -> Vec<f64> {
    let n = vbar.len();
    w.iter()
        .enumerate()
        .map(|(i, x)| vbar[i % n] * x)
        .collect()
}

/// Solves the `n x n` primal system for every target column.
pub fn inner_solve_primal(prob: &Problem, v: &[f64]) -> Result<Vec<f64>, VarProError> {
    check_len(prob, v)?;
    if prob.lambda() == 0.0 {
        return Err(VarProError::PrimalNeedsPositiveLambda);
    }
    let n = prob.n_features();
    let vbar = prob.groups().expand(v);
    let rhs_all = scale_by_vbar(&vbar, &prob.apply_t(prob.y()));
    let rhs: Vec<Vec<f64>> = rhs_all.chunks(n).map(<[f64]>::to_vec).collect();
    let lambda = prob.lambda();
    if n <= DENSE_DIRECT_LIMIT {
        let g = prob.gram();
        let mut a = g.clone();
        for i in 0..n {
            for j in 0..n {
                a.set(i, j, vbar[i] * g.get(i, j) * vbar[j]);
            }
        }
        a.add_diag(lambda);
        let reps = solve_spd_multi(&a, &rhs, false)?;
        return Ok(reps.into_iter().flat_map(|r| r.solution).collect());
    }
    let x = prob.design();
    let mut out = Vec::with_capacity(n * prob.targets());
    for b in &rhs {
        let rep = cg_solve(
            |w| {
                let xw = x.matvec(&scale_by_vbar(&vbar, w));
                let mut z = scale_by_vbar(&vbar, &x.matvec_t(&xw));
                z.iter_mut().zip(w).for_each(|(zi, wi)| *zi += lambda * wi);
                z
            },
            b,
            CG_DEFAULT_TOL,
            default_cg_iterations(n),
        )?;
        if !rep.converged {
            return Err(LinalgError::NotConverged {
                residual: rep.relative_residual,
            }
            .into());
        }
        out.extend(rep.solution);
    }
    Ok(out)
}

/// CG target at `λ = 0`. The value of `f` is only as accurate as the inner
/// residual there, and line searches near a solution need more than the
/// default.
pub const CONSTRAINED_CG_TOL: f64 = 1e-14;

/// Solves the `m x m` dual system for every target column. At `λ = 0` the
/// system is singular; CG from the zero start returns the minimum-norm
/// solution, and a relative residual above the feasibility tolerance means
/// `y` is not in the range of `X_J` for the current support.
pub fn inner_solve_dual(prob: &Problem, v: &[f64]) -> Result<Vec<f64>, VarProError> {
    check_len(prob, v)?;
    let m = prob.n_samples();
    let lambda = prob.lambda();
    let vbar = prob.groups().expand(v);
    let d: Vec<f64> = vbar.iter().map(|x| x * x).collect();
    let x = prob.design();
    let rhs: Vec<Vec<f64>> = (0..prob.targets())
        .map(|c| prob.target(c).iter().map(|y| -y).collect())
        .collect();
    let dense = (m <= DENSE_DIRECT_LIMIT).then(|| {
        let mut a = x.weighted_outer_gram(&d);
        a.add_diag(lambda);
        a
    });
    if lambda > 0.0 {
        if let Some(a) = &dense {
            let chol = Cholesky::factor(a)?;
            let mut out = Vec::with_capacity(m * rhs.len());
            for b in &rhs {
                out.extend(chol.solve(b)?);
            }
            return Ok(out);
        }
    }
    if let Some(out) = dense.as_ref().and_then(|a| constrained_direct(a, &rhs)) {
        return Ok(out);
    }
    let mut out = Vec::with_capacity(m * rhs.len());
    for b in &rhs {
        let rep = cg_solve(
            |w| match &dense {
                Some(a) => a.matvec(w),
                None => {
                    let t: Vec<f64> = x
                        .matvec_t(w)
                        .iter()
                        .zip(&d)
                        .map(|(a, b)| a * b)
                        .collect();
                    let mut z = x.matvec(&t);
                    z.iter_mut().zip(w).for_each(|(zi, wi)| *zi += lambda * wi);
                    z
                }
            },
            b,
            if lambda > 0.0 { CG_DEFAULT_TOL } else { CONSTRAINED_CG_TOL },
            default_cg_iterations(m),
        )?;
        if !rep.converged {
            if lambda == 0.0 && rep.relative_residual > FEASIBILITY_TOL {
                return Err(VarProError::InconsistentSystem {
                    residual: rep.relative_residual,
                });
            }
            if lambda > 0.0 {
                return Err(LinalgError::NotConverged {
                    residual: rep.relative_residual,
                }
                .into());
            }
        }
        out.extend(rep.solution);
    }
    Ok(out)
}

/// Cholesky with one refinement pass for the `λ = 0` system when it is
/// numerically definite; `None` sends the caller to CG.
fn constrained_direct(a: &DenseMatrix, rhs: &[Vec<f64>]) -> Option<Vec<f64>> {
    let chol = Cholesky::factor(a).ok()?;
    let mut out = Vec::with_capacity(a.rows() * rhs.len());
    for b in rhs {
        let mut x = chol.solve(b).ok()?;
        let r: Vec<f64> = b.iter().zip(a.matvec(&x)).map(|(bi, ai)| bi - ai).collect();
        let dx = chol.solve(&r).ok()?;
        x.iter_mut().zip(&dx).for_each(|(xi, d)| *xi += d);
        let r: Vec<f64> = b.iter().zip(a.matvec(&x)).map(|(bi, ai)| bi - ai).collect();
        if !(norm2(&r) <= CG_DEFAULT_TOL * norm2(b)) {
            return None;
        }
        out.extend(x);
    }
    Some(out)
}

/// `β = v̄ ⊙ u`.
pub fn recover_beta_primal(prob: &Problem, v: &[f64], u: &[f64]) -> Vec<f64> {
    scale_by_vbar(&prob.groups().expand(v), u)
}

/// `β = -v̄² ⊙ Xᵀα`.
pub fn recover_beta_dual(prob: &Problem, v: &[f64], alpha: &[f64]) -> Vec<f64> {
    let vbar = prob.groups().expand(v);
    let sq: Vec<f64> = vbar.iter().map(|x| -x * x).collect();
    scale_by_vbar(&sq, &prob.apply_t(alpha))
}

/// `½ h(v²) + ½ ||u||² + 1/(2λ) ||X(v̄ ⊙ u) - y||²`.
pub fn min_form_value(prob: &Problem, v: &[f64], u: &[f64]) -> f64 {
    let r = prob.residual(&recover_beta_primal(prob, v, u));
    prob.regularizer().half_h_of_square(v) + 0.5 * dot(u, u) + dot(&r, &r) / (2.0 * prob.lambda())
}

/// `½ h(v²) - ⟨α, y⟩ - λ/2 ||α||² - ½ ||v̄ ⊙ Xᵀα||²`.
pub fn max_form_value(prob: &Problem, v: &[f64], alpha: &[f64]) -> f64 {
    let vbar = prob.groups().expand(v);
    let w = scale_by_vbar(&vbar, &prob.apply_t(alpha));
    prob.regularizer().half_h_of_square(v)
        - dot(alpha, prob.y())
        - 0.5 * prob.lambda() * dot(alpha, alpha)
        - 0.5 * dot(&w, &w)
}

/// Evaluates `f` and `∇f` with `reg` supplying `h`.
fn evaluate_with(
    prob: &Problem,
    reg: &Regularizer,
    v: &[f64],
    route: Route,
) -> Result<VarProState, VarProError> {
    check_len(prob, v)?;
    let side = route.resolve(prob)?;
    let lambda = prob.lambda();
    let groups = prob.groups();
    let targets = prob.targets();
    let mut grad = reg.h_outer_grad(v);
    let half_h = reg.half_h_of_square(v);
    match side {
        Side::DualM => {
            let alpha = inner_solve_dual(prob, v)?;
            let xa = prob.apply_t(&alpha);
            let sq = groups.group_sq_norms(&xa, targets);
            grad.iter_mut()
                .zip(v.iter().zip(&sq))
                .for_each(|(g, (vg, s))| *g -= vg * s);
            let f = half_h - 0.5 * dot(prob.y(), &alpha);
            let vbar = groups.expand(v);
            let sq_bar: Vec<f64> = vbar.iter().map(|x| -x * x).collect();
            let beta = scale_by_vbar(&sq_bar, &xa);
            Ok(VarProState {
                v: v.to_vec(),
                side,
                u: None,
                alpha: Some(alpha),
                xi: (lambda > 0.0).then_some(xa),
                beta,
                f,
                grad,
            })
        }
        Side::PrimalN => {
            let u = inner_solve_primal(prob, v)?;
            let beta = recover_beta_primal(prob, v, &u);
            let r = prob.residual(&beta);
            let xr = prob.apply_t(&r);
            let n = prob.n_features();
            for c in 0..targets {
                for (g, idx) in groups.groups().iter().enumerate() {
                    let s: f64 = idx.iter().map(|&j| u[c * n + j] * xr[c * n + j]).sum();
                    grad[g] += s / lambda;
                }
            }
            let f = half_h + 0.5 * dot(&u, &u) + dot(&r, &r) / (2.0 * lambda);
            let xi = xr.iter().map(|x| x / lambda).collect();
            Ok(VarProState {
                v: v.to_vec(),
                side,
                u: Some(u),
                alpha: None,
                xi: Some(xi),
                beta,
                f,
                grad,
            })
        }
    }
}

/// Evaluates `f`, `∇f` and the inner solution along the given route.
pub fn evaluate(prob: &Problem, v: &[f64], route: Route) -> Result<VarProState, VarProError> {
    if matches!(prob.regularizer(), Regularizer::TraceNorm) {
        return Err(VarProError::Unsupported(
            "trace norm uses evaluate_matrix".into(),
        ));
    }
    evaluate_with(prob, prob.regularizer(), v, route)
}

/// `(f(v), ∇f(v))` on the automatically chosen side.
pub fn f_and_grad(prob: &Problem, v: &[f64]) -> Result<(f64, Vec<f64>), VarProError> {
    f_and_grad_route(prob, v, Route::Auto)
}

pub fn f_and_grad_route(
    prob: &Problem,
    v: &[f64],
    route: Route,
) -> Result<(f64, Vec<f64>), VarProError> {
    let s = evaluate(prob, v, route)?;
    Ok((s.f, s.grad))
}

/// `(f, ∇f)` for the `ℓq` family with exponent `q`, always on the dual side.
pub fn f_and_grad_lq(prob: &Problem, v: &[f64], q: f64) -> Result<(f64, Vec<f64>), VarProError> {
    let reg = Regularizer::Lq(LqFamily::new(q)?);
    if prob.targets() != 1 {
        return Err(VarProError::Unsupported(
            "the lq family has a single target".into(),
        ));
    }
    let s = evaluate_with(prob, &reg, v, Route::Dual)?;
    Ok((s.f, s.grad))
}

/// Dual-side state for the `ℓq` family; `alpha` is always populated.
pub fn evaluate_lq(prob: &Problem, v: &[f64], q: f64) -> Result<VarProState, VarProError> {
    let reg = Regularizer::Lq(LqFamily::new(q)?);
    evaluate_with(prob, &reg, v, Route::Dual)
}

/// `||∇f||`, convenient for stationarity checks.
pub fn grad_norm(state: &VarProState) -> f64 {
    norm2(&state.grad)
}
