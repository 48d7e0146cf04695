//! Gaussian-random-element regression with features given as dual elements.
//!
//! A Gaussian process on a compact interval is treated as a random element of
//! the space of continuous paths. Every observation or feature is a continuous
//! linear functional on that space: a point evaluation (Dirac), an `L²` inner
//! product with a test function (inter-domain), or an `L²` inner product with
//! the preimage of an RKHS function under the kernel integral operator
//! (Fourier/RKHS features). All covariances the regression needs are computed
//! from one case table in [`features`], so exact regression, the sparse
//! variational approximation and generalized Nyström kernel ridge regression
//! all run against the same abstraction.
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`numerics`] | dense matrices, jittered Cholesky, Gauss–Legendre quadrature, symmetric eigensolver |
//! | [`kernels`] | stationary kernels, the integral operator and its quadrature eigensystem |
//! | [`features`] | dual elements and the `C_LL`, `C_LD`, `C_TL` covariance blocks |
//! | [`exact`] | exact posterior and log marginal likelihood |
//! | [`variational`] | variational family, ELBO, closed-form optimum, gradient ascent |
//! | [`nystrom`] | Nyström KRR over `span{Cμ_m}` and its equivalence with the variational mean |
//!
//! The crate is `no_std` and only needs `alloc`.
//!
//! ```
//! use grevf_core::prelude::*;
//!
//! let domain = Interval::new(0.0, 1.0).unwrap();
//! let kernel = Kernel::new(KernelFamily::SquaredExponential, 0.2, 1.0).unwrap();
//! let data = Dataset::new(domain, vec![0.1, 0.5, 0.9], vec![0.3, -0.2, 0.8], 0.05).unwrap();
//! let posterior = ExactPosterior::fit(&data, &kernel).unwrap();
//! let (mean, cov) = posterior.predict(&[DualElement::dirac(0.5)]).unwrap();
//! assert!(cov[(0, 0)] < 1.0);
//! assert!(mean[0].is_finite());
//! ```
#![no_std]

extern crate alloc;

mod error;
pub mod exact;
pub mod features;
pub mod kernels;
pub mod numerics;
pub mod nystrom;
pub mod variational;

pub use error::{Error, Result};

/// Common imports.
pub mod prelude {
    pub use crate::error::{Error, Result};
    pub use crate::exact::{log_marginal, predict_exact, Dataset, ExactPosterior};
    pub use crate::features::{
        eigen_expansion_cov, feature_cov, feature_data_cross, feature_gram, feature_point_cov,
        make_bump_interdomain, make_eigen_features, DualElement, FeatureSet, TestFunction,
    };
    pub use crate::kernels::{
        gram_matrix, integral_operator_apply, kernel_eval, nystrom_eigensystem, EigenSystem,
        Kernel, KernelFamily,
    };
    pub use crate::numerics::{
        cholesky_jittered, gauss_legendre_rule, CholFactor, Interval, Matrix, QuadratureRule,
        SymMatrix,
    };
    pub use crate::nystrom::{equivalence_gap, krr_nystrom_fit, krr_predict, NystromModel};
    pub use crate::variational::{
        elbo, kl_finite_gaussians, kl_to_posterior, optimal_params, optimal_predict,
        optimal_state, optimize_elbo, q_moments, FiniteGaussian, OptimizerConfig,
        VariationalState,
    };
}
