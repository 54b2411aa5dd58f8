//! Smooth bilevel reparametrization of sparse regularized regression.
//!
//! A regularizer written as `R(β) = min_η ½ h(η) + ½ Σ_g ||β_g||² / η_g` is
//! minimized by substituting `β = v̄ ⊙ u`, solving the inner ridge problem in
//! `u` in closed form and running L-BFGS on the resulting smooth function
//! `f(v)`. The crate provides the value, gradient and Hessian of `f`, the
//! quasi-Newton optimizer, and a set of reference solvers over the same
//! problem types.

pub mod baselines;
pub mod lbfgs;
pub mod linalg;
pub mod problems;
pub mod regularizers;
pub mod varpro;
