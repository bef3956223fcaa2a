//! Seedable samplers: matrix-normal data, Wishart and inverse-Wishart
//! draws, and random positive definite fixtures.
//!
//! All randomness flows from a [`Seed`] through `ChaCha8Rng`. Independent
//! substreams are derived with a SplitMix64 mix of `(seed, stream)`, so the
//! replicate `r` of a study always sees the same stream regardless of how
//! work is scheduled across threads.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::spdlinalg::{cholesky, kron, spd_inverse, symmetrize, Covariance, Dims};
use crate::{Error, Result};

/// Root of a reproducible random stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Seed(pub u64);

impl Seed {
    /// Seed of substream `stream`, a SplitMix64 finalizer of the pair.
    pub fn derive(self, stream: u64) -> Seed {
        let mut z = self
            .0
            .wrapping_add(0x9e37_79b9_7f4a_7c15_u64.wrapping_mul(stream.wrapping_add(1)));
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        Seed(z ^ (z >> 31))
    }

    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

/// Hyperparameters of a simulation scenario: `Σ⁻¹ ~ Wishart([(ν−p−1)·Σ2⊗Σ1]⁻¹, ν)`,
/// or `Σ = Σ2⊗Σ1` exactly when `nu` is infinite.
#[derive(Clone, Debug)]
pub struct ScenarioPrior {
    pub dims: Dims,
    pub nu: f64,
    pub sigma1: Covariance,
    pub sigma2: Covariance,
}

impl ScenarioPrior {
    pub fn new(dims: Dims, nu: f64, sigma1: Covariance, sigma2: Covariance) -> Result<Self> {
        let p = dims.p() as f64;
        if nu.is_nan() || nu <= p + 1.0 {
            return Err(Error::Domain(format!("prior degrees of freedom {nu} must exceed p+1 = {}", p + 1.0)));
        }
        if sigma1.dim() != dims.p1() || sigma2.dim() != dims.p2() {
            return Err(Error::DimensionMismatch("prior factors do not match dims".into()));
        }
        Ok(ScenarioPrior { dims, nu, sigma1, sigma2 })
    }

    /// Prior with identity mean.
    pub fn identity(dims: Dims, nu: f64) -> Result<Self> {
        Self::new(dims, nu, Covariance::identity(dims.p1()), Covariance::identity(dims.p2()))
    }

    /// Prior mean `Σ2 ⊗ Σ1`.
    pub fn mean(&self) -> Covariance {
        Covariance::symmetrized(kron(self.sigma2.matrix(), self.sigma1.matrix()))
            .expect("kronecker product of covariances is square and finite")
    }
}

/// `rows × cols` matrix of independent standard normals.
pub fn random_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Well-conditioned random SPD matrix `A Aᵀ/dim + I/4`.
pub fn random_spd<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Covariance {
    let a = random_matrix(rng, dim, dim);
    let m = &a * a.transpose() / dim as f64 + DMatrix::identity(dim, dim) * 0.25;
    Covariance::symmetrized(m).expect("finite square matrix")
}

/// Random nonsingular (generally nonsymmetric) matrix, shifted away from
/// singularity by `2√dim·I`.
pub fn random_nonsingular<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DMatrix<f64> {
    random_matrix(rng, dim, dim) + DMatrix::identity(dim, dim) * (2.0 * (dim as f64).sqrt())
}

/// `n` draws of `vec(Y)` with `Var(vec Y) = sigma`, as `y = L z` with `L`
/// the Cholesky factor of `sigma` and `z` standard normal.
pub fn sample_matrix_normal(sigma: &Covariance, dims: Dims, n: usize, seed: Seed) -> Result<Vec<DVector<f64>>> {
    sample_matrix_normal_with(&mut seed.rng(), sigma, dims, n)
}

pub fn sample_matrix_normal_with<R: Rng + ?Sized>(
    rng: &mut R,
    sigma: &Covariance,
    dims: Dims,
    n: usize,
) -> Result<Vec<DVector<f64>>> {
    dims.check_square(sigma.matrix(), "sigma")?;
    let l = cholesky(sigma.matrix())?.l();
    let p = dims.p();
    Ok((0..n)
        .map(|_| {
            let z = DVector::from_fn(p, |_, _| rng.sample(StandardNormal));
            &l * z
        })
        .collect())
}

/// One `Wishart(scale, df)` draw by the Bartlett construction.
pub fn sample_wishart(scale: &Covariance, df: f64, seed: Seed) -> Result<Covariance> {
    sample_wishart_with(&mut seed.rng(), scale, df)
}

pub fn sample_wishart_with<R: Rng + ?Sized>(rng: &mut R, scale: &Covariance, df: f64) -> Result<Covariance> {
    let dim = scale.dim();
    if df.is_nan() || df <= dim as f64 - 1.0 {
        return Err(Error::Domain(format!(
            "Wishart degrees of freedom {df} must exceed dim-1 = {}",
            dim as f64 - 1.0
        )));
    }
    let l = cholesky(scale.matrix())?.l();
    let mut a = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        let chi = ChiSquared::new(df - i as f64).map_err(|e| Error::Domain(e.to_string()))?;
        a[(i, i)] = chi.sample(rng).sqrt();
        for j in 0..i {
            a[(i, j)] = rng.sample(StandardNormal);
        }
    }
    let la = l * a;
    Covariance::symmetrized(&la * la.transpose())
}

/// One draw of `Σ` from the scenario prior. For infinite `nu` this returns
/// the prior mean exactly.
pub fn sample_prior_sigma(prior: &ScenarioPrior, seed: Seed) -> Result<Covariance> {
    sample_prior_sigma_with(&mut seed.rng(), prior)
}

pub fn sample_prior_sigma_with<R: Rng + ?Sized>(rng: &mut R, prior: &ScenarioPrior) -> Result<Covariance> {
    let mean = prior.mean();
    if prior.nu.is_infinite() {
        return Ok(mean);
    }
    let p = prior.dims.p() as f64;
    let scale = spd_inverse(&(mean.matrix() * (prior.nu - p - 1.0)))?;
    let precision = sample_wishart_with(rng, &Covariance::symmetrized(scale)?, prior.nu)?;
    Covariance::symmetrized(symmetrize(&spd_inverse(precision.matrix())?))
}
