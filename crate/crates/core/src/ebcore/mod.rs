//! Marginal likelihood, the estimating equations T_λ and T_q, and the
//! adaptive (λ̂, q̂) fit.

mod equations;
mod family;
mod select;

pub use equations::{
    marginal_loglik, marginal_loglik_with, sigma2_hat, t_lambda, t_q, tail_energy, HyperParams,
};
pub use family::{CoefficientSet, ModelFamily, QGrid};
pub use select::{
    fit, fit_fixed_q, select_q, solve_lambda, Boundary, FitOptions, FitResult, LambdaSearch,
    LambdaSolution, LowerBound, QDiagnostic, QSelection, Rounding, SelectionFlag, SelectionRule,
};
