//! Kronecker-core decomposition and core shrinkage estimation of covariance
//! matrices for matrix-variate data.
//!
//! A `p1 × p2` random matrix `Y` is handled through its column-major
//! vectorization `y = vec(Y)` of length `p = p1·p2`. Any positive definite
//! covariance `Σ` of `y` factors uniquely as `Σ = H C Hᵀ`, where
//! `K = H Hᵀ = Σ2 ⊗ Σ1` is the separable covariance closest to `Σ` in the
//! Stein-type divergence `ln|K| + tr(K⁻¹Σ)` and `C` is a *core* covariance
//! whose Kronecker covariance is the identity.
//!
//! The core shrinkage estimator shrinks the core of the sample covariance
//! toward the identity, i.e. shrinks `S` toward its separable fit `K̂`:
//!
//! ```text
//! Σ̂ = (1 − ŵ)·S + ŵ·K̂
//! ```
//!
//! with the weight `ŵ` chosen by maximizing an inverse-Wishart marginal
//! likelihood that depends on the data only through the eigenvalues of the
//! sample core.
//!
//! ```no_run
//! use coreshrink::prelude::*;
//!
//! # fn main() -> Result<(), coreshrink::Error> {
//! let dims = Dims::new(3, 4)?;
//! let samples = sample_matrix_normal(&Covariance::identity(dims.p()), dims, 40, Seed(7))?;
//! let s = sample_covariance(&samples, dims.p())?;
//! let fit = cse(&s, samples.len(), dims, &KcdOptions::default())?;
//! println!("w_hat = {}", fit.fit.w_hat);
//! # Ok(())
//! # }
//! ```

pub mod cli;
pub mod ebshrink;
mod error;
pub mod io;
pub mod kroncore;
pub mod qda;
pub mod randmat;
pub mod simharness;
pub mod spdlinalg;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::ebshrink::{
        cse, fit_weight, fit_weight_from_eigs, lmgamma, log_marginal, oracle_bayes,
        sample_covariance, CseResult, PriorSpec, ShrinkageFit,
    };
    pub use crate::kroncore::{core_cov, is_core, kcd, kronecker_cov, KcdOptions, KcdResult, SqrtKind};
    pub use crate::randmat::{
        sample_matrix_normal, sample_prior_sigma, sample_wishart, ScenarioPrior, Seed,
    };
    pub use crate::spdlinalg::{Covariance, Dims, SeparableCovariance};
    pub use crate::Error;
}
