use super::{require_norm_family, trace_objective, BaselineError, Budget, Recorder, SolverTrace};
use crate::linalg::{
    cg_solve, default_cg_iterations, design_norm, norm2, Cholesky, DenseMatrix, Design,
    LinalgError, CG_DEFAULT_TOL,
};
use crate::problems::Problem;

/// Orthogonal projection onto `{β : Xβ = y}`,
/// `β ↦ β + Xᵀ(XXᵀ)⁻¹(y - Xβ)`.
///
/// `XXᵀ` is Cholesky-factored once when it is positive definite. Otherwise
/// (a graph Laplacian, for instance) each solve runs CG on its range. A few
/// refinement passes bring the residual to `1e-12 (1 + ||y||)` when possible.
#[derive(Clone, Debug)]
pub struct AffineProjector {
    design: Design,
    gram: DenseMatrix,
    chol: Option<Cholesky>,
}

/// Target residual of [`AffineProjector::project`], relative to `1 + ||y||`.
pub const PROJECTION_TOL: f64 = 1e-12;

impl AffineProjector {
    pub fn new(design: &Design) -> Self {
        let gram = design.weighted_outer_gram(&vec![1.0; design.cols()]);
        let chol = Cholesky::factor(&gram).ok();
        Self {
            design: design.clone(),
            gram,
            chol,
        }
    }

    pub fn is_factored(&self) -> bool {
        self.chol.is_some()
    }

    fn solve_gram(&self, r: &[f64]) -> Result<Vec<f64>, LinalgError> {
        match &self.chol {
            Some(c) => c.solve(r),
            None => Ok(cg_solve(
                |w| self.gram.matvec(w),
                r,
                CG_DEFAULT_TOL,
                default_cg_iterations(r.len()),
            )?
            .solution),
        }
    }

    /// Projects a single coefficient column onto `Xβ = y`.
    pub fn project(&self, beta: &[f64], y: &[f64]) -> Result<Vec<f64>, LinalgError> {
        let target = PROJECTION_TOL * (1.0 + norm2(y));
        let mut out = beta.to_vec();
        for _ in 0..4 {
            let r: Vec<f64> = y
                .iter()
                .zip(self.design.matvec(&out))
                .map(|(a, b)| a - b)
                .collect();
            if norm2(&r) <= target {
                break;
            }
            let w = self.solve_gram(&r)?;
            out.iter_mut()
                .zip(self.design.matvec_t(&w))
                .for_each(|(b, c)| *b += c);
        }
        Ok(out)
    }
}

fn project_all(
    proj: &AffineProjector,
    prob: &Problem,
    beta: &[f64],
) -> Result<Vec<f64>, BaselineError> {
    let n = prob.n_features();
    let mut out = Vec::with_capacity(beta.len());
    for c in 0..prob.targets() {
        out.extend(proj.project(&beta[c * n..(c + 1) * n], prob.target(c))?);
    }
    Ok(out)
}

fn require_constrained(prob: &Problem, solver: &str) -> Result<(), BaselineError> {
    if prob.lambda() == 0.0 {
        require_norm_family(prob, solver)
    } else {
        Err(BaselineError::Unsupported(format!(
            "{solver} solves the constrained problem (lambda = 0)"
        )))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DrConfig {
    pub mu: f64,
    /// Relaxation in `(0, 2)`.
    pub gamma: f64,
}

impl Default for DrConfig {
    fn default() -> Self {
        Self { mu: 1.0, gamma: 1.0 }
    }
}

/// Douglas–Rachford on `min R(β) + ι{Xβ = y}`:
/// `z ← (1 - γ/2) z + (γ/2) rProx_{μR}(rProx_{ι}(z))`, reporting
/// `β_k = Proj(z_k)`, which is feasible.
pub fn douglas_rachford_bp(
    prob: &Problem,
    config: DrConfig,
    budget: Budget,
) -> Result<SolverTrace, BaselineError> {
    require_constrained(prob, "douglas-rachford")?;
    if !(config.gamma > 0.0 && config.gamma < 2.0 && config.mu > 0.0) {
        return Err(BaselineError::InvalidParameter(format!(
            "douglas-rachford needs mu > 0 and 0 < gamma < 2, got {config:?}"
        )));
    }
    let mut rec = Recorder::new("dr", budget);
    rec.param("mu", config.mu);
    rec.param("gamma", config.gamma);
    let proj = AffineProjector::new(prob.design());
    let reg = prob.regularizer();
    let targets = prob.targets();
    let mut z = vec![0.0; prob.n_features() * targets];
    let mut beta = project_all(&proj, prob, &z)?;
    rec.record(0, trace_objective(prob, &beta));
    let mut k = 1;
    while rec.may_continue(k) {
        let rg: Vec<f64> = beta.iter().zip(&z).map(|(b, z)| 2.0 * b - z).collect();
        let pf = reg.prox(&rg, config.mu, targets)?;
        let half = 0.5 * config.gamma;
        z.iter_mut()
            .zip(pf.iter().zip(&rg))
            .for_each(|(zi, (p, r))| *zi = (1.0 - half) * *zi + half * (2.0 * p - r));
        beta = project_all(&proj, prob, &z)?;
        rec.record(k, trace_objective(prob, &beta));
        k += 1;
    }
    let feas = norm2(&prob.residual(&beta));
    rec.param("final_residual", feas);
    Ok(rec.finish(beta, None))
}

/// Primal–dual step sizes with `τ = step_product / (σ ||X||²)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CpConfig {
    pub sigma: f64,
    pub theta: f64,
    pub step_product: f64,
}

impl CpConfig {
    pub fn new(sigma: f64, theta: f64, step_product: f64) -> Result<Self, BaselineError> {
        if !(step_product > 0.0 && step_product < 1.0) {
            return Err(BaselineError::StepCondition {
                product: step_product,
            });
        }
        if !(sigma > 0.0 && theta > 0.0 && theta <= 1.0) {
            return Err(BaselineError::InvalidParameter(format!(
                "need sigma > 0 and 0 < theta <= 1, got sigma = {sigma}, theta = {theta}"
            )));
        }
        Ok(Self {
            sigma,
            theta,
            step_product,
        })
    }

    /// From explicit `σ`, `τ` and `||X||`.
    pub fn explicit(sigma: f64, tau: f64, theta: f64, x_norm: f64) -> Result<Self, BaselineError> {
        Self::new(sigma, theta, tau * sigma * x_norm * x_norm)
    }

    /// `σ = 1/||X||`, `θ = 1`, `τσ||X||² = 0.9`.
    pub fn balanced(x_norm: f64) -> Self {
        Self {
            sigma: 1.0 / x_norm.max(f64::MIN_POSITIVE),
            theta: 1.0,
            step_product: 0.9,
        }
    }
}

/// Chambolle–Pock on `min R(β) + ι{y}(Xβ)`:
/// `w ← w + σ(Xβ̃ - y)`, `β⁺ ← prox_{τR}(β - τXᵀw)`, `β̃ ← β⁺ + θ(β⁺ - β)`.
pub fn chambolle_pock_bp(
    prob: &Problem,
    config: CpConfig,
    budget: Budget,
) -> Result<SolverTrace, BaselineError> {
    require_constrained(prob, "chambolle-pock")?;
    let config = CpConfig::new(config.sigma, config.theta, config.step_product)?;
    let norm = design_norm(prob.design());
    let tau = config.step_product / (config.sigma * norm * norm).max(f64::MIN_POSITIVE);
    let mut rec = Recorder::new("pd", budget);
    rec.param("sigma", config.sigma);
    rec.param("tau", tau);
    rec.param("theta", config.theta);
    let reg = prob.regularizer();
    let targets = prob.targets();
    let nq = prob.n_features() * targets;
    let mut beta = vec![0.0; nq];
    let mut bar = beta.clone();
    let mut w = vec![0.0; prob.n_samples() * targets];
    rec.record(0, trace_objective(prob, &beta));
    let mut k = 1;
    while rec.may_continue(k) {
        let r = prob.residual(&bar);
        w.iter_mut()
            .zip(&r)
            .for_each(|(wi, ri)| *wi += config.sigma * ri);
        let xtw = prob.apply_t(&w);
        let arg: Vec<f64> = beta.iter().zip(&xtw).map(|(b, g)| b - tau * g).collect();
        let next = reg.prox(&arg, tau, targets)?;
        bar = next
            .iter()
            .zip(&beta)
            .map(|(a, b)| a + config.theta * (a - b))
            .collect();
        beta = next;
        rec.record(k, trace_objective(prob, &beta));
        k += 1;
    }
    let feas = norm2(&prob.residual(&beta));
    rec.param("final_residual", feas);
    Ok(rec.finish(beta, None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regularizers::Regularizer;

    #[test]
    fn affine_projection_example() {
        let x: Design = DenseMatrix::from_rows(&[vec![1.0, 1.0]]).unwrap().into();
        let p = AffineProjector::new(&x);
        let b = p.project(&[0.0, 0.0], &[1.0]).unwrap();
        assert!((b[0] - 0.5).abs() < 1e-15 && (b[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn reflected_prox_fixes_zero() {
        for tau in [0.0, 0.5, 3.0] {
            let p = Regularizer::L1.prox(&[0.0, 0.0], tau, 1).unwrap();
            let r: Vec<f64> = p.iter().map(|v| 2.0 * v).collect();
            assert_eq!(r, vec![0.0, 0.0]);
        }
    }

    #[test]
    fn step_condition_flagged() {
        assert_eq!(
            CpConfig::new(1.0, 1.0, 1.5).unwrap_err(),
            BaselineError::StepCondition { product: 1.5 }
        );
        assert!(CpConfig::explicit(1.0, 1.5, 1.0, 1.0).is_err());
        assert!(CpConfig::new(1.0, 1.0, 0.9).is_ok());
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let x = DenseMatrix::from_rows(&[vec![1.0, 2.0, 0.5], vec![0.0, 1.0, 1.0]]).unwrap();
        let p = Problem::new(x.clone(), vec![0.0, 0.0], 0.0, Regularizer::L1).unwrap();
        let norm = design_norm(p.design());
        let t = chambolle_pock_bp(&p, CpConfig::balanced(norm), Budget::iters(20)).unwrap();
        assert_eq!(t.beta, vec![0.0; 3]);
        let t = douglas_rachford_bp(&p, DrConfig::default(), Budget::iters(20)).unwrap();
        assert!(t.beta.iter().all(|b| b.abs() < 1e-15));
    }
}
