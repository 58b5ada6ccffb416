//! Adaptive empirical Bayesian smoothing splines.
//!
//! The smoothing parameter λ and the penalty order q are both selected from
//! the data by marginal-likelihood estimating equations in the Demmler-Reinsch
//! spectral domain, where the smoother is diagonal and every criterion costs
//! O(n) per evaluation.

pub mod credible;
pub mod ebcore;
pub mod error;
pub mod freq;
pub mod oracle;
pub mod rng;
pub mod simlab;
pub mod spectral;

pub use error::{Error, Result};
