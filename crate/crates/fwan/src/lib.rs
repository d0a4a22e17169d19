//! Weak adversarial network solver for the stationary fractional
//! advection-dispersion equation on rectangular domains.
//!
//! The equation couples first derivatives with left/right Riemann-Liouville
//! fractional integrals per coordinate. Its weak form is estimated by Monte
//! Carlo collocation (uniform outer points, midpoint rules for the singular
//! inner integrals) and solved as a minimax problem between a solution
//! network and an adversarial test function, trained alternately with Adam.
//!
//! Module map:
//! - [`autodiff`]: scalar reverse-mode tape with forward-over-reverse duals
//! - [`neural`]: network specs, parameters, initialization, checkpoints
//! - [`optim`]: Adam with descend/ascend directions
//! - [`fraccalc`]: Gamma, singular kernels, analytic fractional integrals of
//!   monomials, manufactured right-hand sides
//! - [`sampling`]: seeded collocation batches and inner quadrature rules
//! - [`weakform`]: the discretized objective as tape computations
//! - [`lossgrad`]: the batched production evaluator for losses/gradients
//! - [`training`]: the alternating minimax loop, grid error, alpha sweeps
//! - [`problems`]: experiment presets

pub mod autodiff;
pub mod error;
mod fmath;
pub mod fraccalc;
pub mod lossgrad;
pub mod neural;
pub mod optim;
pub mod problems;
pub mod sampling;
pub mod training;
pub mod weakform;

pub use error::{FwanError, Result};
