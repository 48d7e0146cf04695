//! Sparse variational approximation with features `L`.
//!
//! A member of the variational family is fixed by `Q^L = N(μ, Σ)` on the
//! feature values `U = L F`; conditionally on `U` the process follows the
//! prior. Its moments, the tractable ELBO, the closed-form optimum and a
//! gradient-ascent optimizer live here.
//!
//! Internally every quantity is evaluated in coordinates whitened by the
//! Cholesky factor `C_LL = R Rᵀ`: `u = R⁻¹μ`, `Σ = R S Rᵀ` with `S = L_S L_Sᵀ`,
//! and `Φ = R⁻¹ C_LD`. The formulas are algebraically the usual
//! `C_LL⁻¹`-based ones but stay accurate when `C_LL` is nearly singular, for
//! instance when features coincide with the data locations.

mod gaussian;
mod optimize;
mod state;

pub use gaussian::{kl_finite_gaussians, FiniteGaussian};
pub use optimize::{
    epoch_batches, optimize_elbo, optimize_from, ElboObjective, OptimizationResult,
    OptimizerConfig, Params,
};
pub use state::{
    elbo, kl_to_posterior, optimal_params, optimal_predict, optimal_state, q_moments,
    VariationalState,
};
