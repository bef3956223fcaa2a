//! Kronecker covariance, core covariance and the Kronecker-core
//! decomposition `Σ = H C Hᵀ`.
//!
//! The Kronecker covariance `k(Σ) = Σ2 ⊗ Σ1` minimizes `ln|K| + tr(K⁻¹Σ)`
//! over separable `K`. It is computed by the flip-flop iteration, which is
//! block coordinate descent on that objective:
//!
//! ```text
//! Σ1 ← E[Y Σ2⁻¹ Yᵀ] / p2
//! Σ2 ← E[Yᵀ Σ1⁻¹ Y] / p1
//! ```
//!
//! starting from `Σ2 = I`. Whitening `Σ` by a separable square root
//! `H = h(k(Σ))` gives the core `C = H⁻¹ Σ H⁻ᵀ`, which satisfies `k(C) = I`.

use nalgebra::DMatrix;

use crate::spdlinalg::{
    chol_sqrt, col_gram, kron, logdet_spd, require_pd, row_gram, spd_inverse, sym_sqrt, symmetrize,
    Covariance, Dims, SeparableCovariance,
};
use crate::{Error, Result};

/// Separable square-root convention `h(Σ2⊗Σ1) = h(Σ2) ⊗ h(Σ1)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum SqrtKind {
    #[default]
    Symmetric,
    Cholesky,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KcdOptions {
    /// Relative Frobenius change of `K` between sweeps that stops the
    /// iteration.
    pub tol: f64,
    pub max_iter: usize,
    pub sqrt_kind: SqrtKind,
}

impl Default for KcdOptions {
    fn default() -> Self {
        KcdOptions {
            tol: 1e-10,
            max_iter: 1000,
            sqrt_kind: SqrtKind::Symmetric,
        }
    }
}

impl KcdOptions {
    pub fn with_sqrt(self, sqrt_kind: SqrtKind) -> Self {
        KcdOptions { sqrt_kind, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidInput(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidInput("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// Output of the flip-flop iteration.
#[derive(Clone, Debug)]
pub struct KroneckerCov {
    pub k: SeparableCovariance,
    pub iterations: usize,
    pub converged: bool,
    /// `d(K_t:Σ)` after each full sweep.
    pub divergence_trace: Vec<f64>,
}

impl KroneckerCov {
    pub fn divergence_value(&self) -> f64 {
        *self.divergence_trace.last().expect("at least one sweep")
    }
}

/// A separable square root `H = H2 ⊗ H1` of a separable covariance.
#[derive(Clone, Debug)]
pub struct SeparableRoot {
    pub kind: SqrtKind,
    /// `H1`, the root of the row covariance.
    pub row: DMatrix<f64>,
    /// `H2`, the root of the column covariance.
    pub col: DMatrix<f64>,
}

impl SeparableRoot {
    pub fn of(k: &SeparableCovariance, kind: SqrtKind) -> Result<Self> {
        let root = match kind {
            SqrtKind::Symmetric => sym_sqrt,
            SqrtKind::Cholesky => chol_sqrt,
        };
        Ok(SeparableRoot {
            kind,
            row: root(k.sigma1())?,
            col: root(k.sigma2())?,
        })
    }

    /// The full `p × p` matrix `H2 ⊗ H1`.
    pub fn matrix(&self) -> DMatrix<f64> {
        kron(&self.col, &self.row)
    }

    /// `H⁻¹ = H2⁻¹ ⊗ H1⁻¹`.
    pub fn inverse_matrix(&self) -> Result<DMatrix<f64>> {
        let inv = |m: &DMatrix<f64>| {
            m.clone()
                .try_inverse()
                .ok_or(Error::NotPositiveDefinite { min_eig: 0.0, threshold: 0.0 })
        };
        Ok(kron(&inv(&self.col)?, &inv(&self.row)?))
    }
}

/// Kronecker-core decomposition of a covariance.
#[derive(Clone, Debug)]
pub struct KcdResult {
    pub k_factor: SeparableCovariance,
    pub core: Covariance,
    pub h: SeparableRoot,
    pub iterations: usize,
    pub converged: bool,
    /// `d(K:Σ)` at the returned `K`.
    pub divergence_value: f64,
    pub divergence_trace: Vec<f64>,
}

impl KcdResult {
    /// `g(K, C) = H C Hᵀ`, which reproduces the decomposed matrix.
    pub fn reconstruct(&self) -> Covariance {
        compose_with_root(&self.h, &self.core)
    }
}

/// Kronecker covariance `k(Σ)` of a positive definite `Σ`.
///
/// Hitting `max_iter` is not an error; it is reported through
/// [`KroneckerCov::converged`].
pub fn kronecker_cov(sigma: &Covariance, dims: Dims, opts: &KcdOptions) -> Result<KroneckerCov> {
    dims.check_square(sigma.matrix(), "sigma")?;
    require_pd(sigma)?;
    flip_flop(sigma.matrix(), dims, opts)
}

/// Flip-flop on a possibly singular (but PSD) input, as for sample
/// covariances with fewer samples than dimensions. Fails with
/// `FactorSingular` when an iterate degenerates.
pub(crate) fn kronecker_cov_psd(sigma: &Covariance, dims: Dims, opts: &KcdOptions) -> Result<KroneckerCov> {
    dims.check_square(sigma.matrix(), "sigma")?;
    flip_flop(sigma.matrix(), dims, opts)
}

fn flip_flop(sigma: &DMatrix<f64>, dims: Dims, opts: &KcdOptions) -> Result<KroneckerCov> {
    opts.validate()?;
    let (p1, p2) = (dims.p1() as f64, dims.p2() as f64);
    let p = dims.p() as f64;

    let mut sigma2 = DMatrix::<f64>::identity(dims.p2(), dims.p2());
    let mut sigma2_inv = sigma2.clone();
    let mut sigma1;
    let mut prev_k: Option<DMatrix<f64>> = None;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    loop {
        iterations += 1;
        sigma1 = row_gram(sigma, dims, &sigma2_inv)? / p2;
        let sigma1_inv = checked_factor_inverse(&sigma1, iterations)?;
        sigma2 = col_gram(sigma, dims, &sigma1_inv)? / p1;
        // Keep tr(Σ1) = p1 between sweeps; K is unchanged.
        let c = sigma1.trace() / p1;
        sigma1 /= c;
        sigma2 *= c;
        sigma2_inv = checked_factor_inverse(&sigma2, iterations)?;

        // After the Σ2 update tr(K⁻¹Σ) = tr(Σ2⁻¹·p1·Σ2) = p exactly.
        let logdet = p2 * logdet_spd(&sigma1).map_err(|_| Error::FactorSingular { iteration: iterations })?
            + p1 * logdet_spd(&sigma2).map_err(|_| Error::FactorSingular { iteration: iterations })?;
        trace.push(logdet + p);

        let k = kron(&sigma2, &sigma1);
        if let Some(prev) = &prev_k {
            let change = (&k - prev).norm() / k.norm();
            if change < opts.tol {
                converged = true;
            }
        }
        prev_k = Some(k);
        if converged || iterations >= opts.max_iter {
            break;
        }
    }

    Ok(KroneckerCov {
        k: SeparableCovariance::normalized(dims, sigma1, sigma2),
        iterations,
        converged,
        divergence_trace: trace,
    })
}

fn checked_factor_inverse(m: &DMatrix<f64>, iteration: usize) -> Result<DMatrix<f64>> {
    let singular = || Error::FactorSingular { iteration };
    let factor = Covariance::symmetrized(m.clone()).map_err(|_| singular())?;
    require_pd(&factor).map_err(|_| singular())?;
    spd_inverse(factor.matrix()).map_err(|_| singular())
}

/// Core covariance `c(Σ) = H⁻¹ Σ H⁻ᵀ`, `H = h(k(Σ))`.
pub fn core_cov(sigma: &Covariance, dims: Dims, opts: &KcdOptions) -> Result<Covariance> {
    Ok(kcd(sigma, dims, opts)?.core)
}

/// Full decomposition `f(Σ) = (k(Σ), c(Σ))` together with the square root
/// used for whitening.
pub fn kcd(sigma: &Covariance, dims: Dims, opts: &KcdOptions) -> Result<KcdResult> {
    let kc = kronecker_cov(sigma, dims, opts)?;
    decompose_with(sigma, kc, opts.sqrt_kind)
}

pub(crate) fn kcd_psd(sigma: &Covariance, dims: Dims, opts: &KcdOptions) -> Result<KcdResult> {
    let kc = kronecker_cov_psd(sigma, dims, opts)?;
    decompose_with(sigma, kc, opts.sqrt_kind)
}

fn decompose_with(sigma: &Covariance, kc: KroneckerCov, kind: SqrtKind) -> Result<KcdResult> {
    let h = SeparableRoot::of(&kc.k, kind)?;
    let h_inv = h.inverse_matrix()?;
    let core = Covariance::symmetrized(&h_inv * sigma.matrix() * h_inv.transpose())?;
    Ok(KcdResult {
        divergence_value: kc.divergence_value(),
        k_factor: kc.k,
        core,
        h,
        iterations: kc.iterations,
        converged: kc.converged,
        divergence_trace: kc.divergence_trace,
    })
}

/// Inverse map `g(K, C) = h(K)·C·h(K)ᵀ`.
pub fn compose(k: &SeparableCovariance, core: &Covariance, kind: SqrtKind) -> Result<Covariance> {
    k.dims().check_square(core.matrix(), "core")?;
    Ok(compose_with_root(&SeparableRoot::of(k, kind)?, core))
}

fn compose_with_root(h: &SeparableRoot, core: &Covariance) -> Covariance {
    let hm = h.matrix();
    Covariance::symmetrized(symmetrize(&(&hm * core.matrix() * hm.transpose())))
        .expect("product of finite square matrices")
}

/// Whether `c` lies in the core set: the across-column average of the row
/// covariance and the across-row average of the column covariance are both
/// identities, within `tol` in max-norm.
pub fn is_core(c: &Covariance, dims: Dims, tol: f64) -> bool {
    core_residual(c, dims).is_ok_and(|r| r <= tol)
}

/// Max-norm distance of the two averaged partial traces from the identity.
pub fn core_residual(c: &Covariance, dims: Dims) -> Result<f64> {
    let (p1, p2) = (dims.p1(), dims.p2());
    let rows = row_gram(c.matrix(), dims, &DMatrix::identity(p2, p2))? / p2 as f64;
    let cols = col_gram(c.matrix(), dims, &DMatrix::identity(p1, p1))? / p1 as f64;
    let r1 = (rows - DMatrix::<f64>::identity(p1, p1)).amax();
    let r2 = (cols - DMatrix::<f64>::identity(p2, p2)).amax();
    Ok(r1.max(r2))
}
