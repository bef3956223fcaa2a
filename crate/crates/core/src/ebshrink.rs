//! Empirical-Bayes core shrinkage.
//!
//! Under the prior `Σ⁻¹ ~ Wishart([(ν−p−1)·K]⁻¹, ν)` with separable mean
//! `K`, the posterior mean of `Σ` given the sample covariance `S` of `n`
//! observations is `(1−w)·S + w·K` with `w = (ν−p−1)/(n+ν−p−1)`. Plugging
//! in `K̂ = k(S)` and maximizing the marginal likelihood of `S` in `ν` gives
//! the weight `ŵ`. With `ĉ_j` the eigenvalues of the core `Ĉ = c(S)`, the
//! log marginal likelihood is, up to a `ν`-free constant,
//!
//! ```text
//! log L(ν) = log Γ_p((n+ν)/2) − log Γ_p(ν/2) + (νp/2)·log w + (np/2)·log(1−w)
//!            − ((ν+n)/2)·Σ_j log(w + (1−w)·ĉ_j)
//! ```

use nalgebra::{DMatrix, DVector};
use statrs::function::gamma::{digamma, ln_gamma};

use crate::kroncore::{is_core, kcd_psd, KcdOptions};
use crate::spdlinalg::{sym_eigen, Covariance, Dims, SeparableCovariance};
use crate::{Error, Result};

/// Core eigenvalues are floored here before entering `log L`.
pub const EIG_FLOOR: f64 = 1e-12;

/// Number of points in the bracketing scan over `log(ν−p−1)`.
const SCAN_POINTS: usize = 256;
/// Lower end of the search in `ν − p − 1`.
const MIN_EXCESS_DF: f64 = 1e-8;
/// The search ends at `ν = NU_MAX_FACTOR·(n+p)`.
const NU_MAX_FACTOR: f64 = 1e8;

/// Result of the empirical-Bayes weight estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct ShrinkageFit {
    /// Maximizer of the marginal likelihood; `f64::INFINITY` when the
    /// maximum is at the upper end of the search range.
    pub nu_hat: f64,
    /// Weight on the separable estimate, in `[0, 1]`.
    pub w_hat: f64,
    /// Eigenvalues of the sample core, descending, floored at [`EIG_FLOOR`].
    pub core_eigs: Vec<f64>,
    pub objective_at_opt: f64,
    pub n: usize,
    pub dims: Dims,
}

/// Inverse-Wishart prior with separable mean.
#[derive(Clone, Debug)]
pub struct PriorSpec {
    pub nu: f64,
    pub k_mean: SeparableCovariance,
}

impl PriorSpec {
    /// `nu` must exceed `p+1`; `f64::INFINITY` is accepted and puts all
    /// posterior weight on the prior mean.
    pub fn new(nu: f64, k_mean: SeparableCovariance) -> Result<Self> {
        let p = k_mean.dims().p() as f64;
        if nu.is_nan() || nu <= p + 1.0 {
            return Err(Error::Domain(format!("nu = {nu} must exceed p+1 = {}", p + 1.0)));
        }
        Ok(PriorSpec { nu, k_mean })
    }
}

/// Output of [`cse`].
#[derive(Clone, Debug)]
pub struct CseResult {
    pub estimate: Covariance,
    pub fit: ShrinkageFit,
    pub k_hat: SeparableCovariance,
    /// Whether the flip-flop iteration for `K̂` met its tolerance.
    pub converged: bool,
    pub iterations: usize,
}

/// Posterior weight `w = (ν−p−1)/(n+ν−p−1)`, evaluated as
/// `1/(1 + n/(ν−p−1))`. Infinite `ν` gives 1.
pub fn weight_from_nu(nu: f64, n: usize, p: usize) -> f64 {
    if nu.is_infinite() {
        return 1.0;
    }
    let excess = nu - p as f64 - 1.0;
    if excess <= 0.0 {
        return 0.0;
    }
    1.0 / (1.0 + n as f64 / excess)
}

/// Log of the multivariate gamma function,
/// `log Γ_p(a) = p(p−1)/4·log π + Σ_{j=1..p} log Γ(a + (1−j)/2)`.
pub fn lmgamma(p: usize, a: f64) -> Result<f64> {
    if p == 0 {
        return Err(Error::Domain("lmgamma needs p >= 1".into()));
    }
    if a.is_nan() || a <= (p as f64 - 1.0) / 2.0 {
        return Err(Error::Domain(format!("lmgamma({p}, {a}) requires a > {}", (p as f64 - 1.0) / 2.0)));
    }
    let pf = p as f64;
    let mut acc = pf * (pf - 1.0) / 4.0 * std::f64::consts::PI.ln();
    for j in 1..=p {
        acc += ln_gamma(a + (1.0 - j as f64) / 2.0);
    }
    Ok(acc)
}

/// `log Γ(z+h) − log Γ(z)` without cancellation for large `z`.
fn ln_gamma_diff(z: f64, h: f64) -> f64 {
    if z < 15.0 {
        return ln_gamma(z + h) - ln_gamma(z);
    }
    // Stirling series, differenced term by term.
    fn tail(x: f64) -> f64 {
        let x2 = x * x;
        (1.0 / 12.0 - (1.0 / 360.0 - (1.0 / 1260.0 - (1.0 / 1680.0 - 1.0 / (1188.0 * x2)) / x2) / x2) / x2) / x
    }
    (z - 0.5) * (h / z).ln_1p() + h * (z + h).ln() - h + (tail(z + h) - tail(z))
}

/// Log marginal likelihood `log L(ν)` of the core eigenvalues (see the
/// module docs); the additive `ν`-free constant is dropped.
pub fn log_marginal(nu: f64, core_eigs: &[f64], n: usize, dims: Dims) -> Result<f64> {
    let p = dims.p();
    if core_eigs.len() != p {
        return Err(Error::DimensionMismatch(format!(
            "{} core eigenvalues for p = {p}",
            core_eigs.len()
        )));
    }
    if n == 0 {
        return Err(Error::Domain("sample size must be at least 1".into()));
    }
    let pf = p as f64;
    if nu.is_nan() || nu <= pf + 1.0 {
        return Err(Error::Domain(format!("nu = {nu} must exceed p+1 = {}", pf + 1.0)));
    }
    if core_eigs.iter().any(|c| !(*c >= 0.0) || !c.is_finite()) {
        return Err(Error::Domain("core eigenvalues must be finite and nonnegative".into()));
    }
    let nf = n as f64;
    let excess = nu - pf - 1.0;

    let gamma: f64 = (1..=p)
        .map(|j| ln_gamma_diff(nu / 2.0 + (1.0 - j as f64) / 2.0, nf / 2.0))
        .sum();
    let log_w = -(nf / excess).ln_1p();
    let log_1mw = -(excess / nf).ln_1p();
    // log(w + (1−w)c) = log1p(n(c−1)/(ν−p−1+n))
    let det: f64 = core_eigs
        .iter()
        .map(|&c| (nf * (c.max(EIG_FLOOR) - 1.0) / (excess + nf)).ln_1p())
        .sum();

    Ok(gamma + nu * pf / 2.0 * log_w + nf * pf / 2.0 * log_1mw - (nu + nf) / 2.0 * det)
}

/// Empirical-Bayes weight from a core covariance of `n` observations.
pub fn fit_weight(core: &Covariance, n: usize, dims: Dims) -> Result<ShrinkageFit> {
    dims.check_square(core.matrix(), "core")?;
    if !is_core(core, dims, 1e-4) {
        return Err(Error::InvalidInput(
            "matrix is not a core covariance (partial-trace conditions fail at 1e-4)".into(),
        ));
    }
    let eig = sym_eigen(core)?;
    fit_weight_from_eigs(eig.values.as_slice(), n, dims)
}

/// Maximizes `log L(ν)` over `ν ∈ (p+1, 1e8·(n+p)]` in `t = log(ν−p−1)`.
/// The sign of `d log L/dν` on a 256-point scan locates the local maxima,
/// each refined by bisection on the derivative; the best of these and of
/// the two ends wins. A maximum at the upper end yields `ν̂ = ∞, ŵ = 1`; at
/// the lower end `ν̂ = p+1, ŵ = 0`.
pub fn fit_weight_from_eigs(core_eigs: &[f64], n: usize, dims: Dims) -> Result<ShrinkageFit> {
    let p = dims.p();
    let pf = p as f64;
    let mut eigs: Vec<f64> = core_eigs.iter().map(|c| c.max(EIG_FLOOR)).collect();
    eigs.sort_by(|a, b| b.total_cmp(a));

    let nu_max = NU_MAX_FACTOR * (n + p) as f64;
    let t_lo = MIN_EXCESS_DF.ln();
    let t_hi = (nu_max - pf - 1.0).ln();
    let nu_at = |t: f64| pf + 1.0 + t.exp();
    let objective = |t: f64| log_marginal(nu_at(t), &eigs, n, dims);
    // log L(ν) is evaluated once here so the domain checks run up front.
    objective(t_hi)?;
    let slope = |t: f64| d_log_marginal(nu_at(t), &eigs, n, p);

    let step = (t_hi - t_lo) / (SCAN_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..SCAN_POINTS).map(|i| t_lo + step * i as f64).collect();
    let slopes: Vec<f64> = grid.iter().map(|&t| slope(t)).collect();

    let mut candidates = Vec::new();
    if slopes[0] <= 0.0 {
        candidates.push(t_lo);
    }
    for i in 0..SCAN_POINTS - 1 {
        if slopes[i] > 0.0 && slopes[i + 1] <= 0.0 {
            candidates.push(bisect_root(&slope, grid[i], grid[i + 1]));
        }
    }
    if slopes[SCAN_POINTS - 1] > 0.0 {
        candidates.push(t_hi);
    }
    let mut best = (f64::NAN, f64::NEG_INFINITY);
    for t in candidates {
        let v = objective(t)?;
        if v > best.1 {
            best = (t, v);
        }
    }
    let (t_opt, f_opt) = best;
    if t_opt.is_nan() {
        return Err(Error::Domain("marginal likelihood is not finite on the search range".into()));
    }

    let (nu_hat, w_hat) = if t_opt == t_hi {
        (f64::INFINITY, 1.0)
    } else if t_opt == t_lo {
        (pf + 1.0, 0.0)
    } else {
        let nu = nu_at(t_opt);
        (nu, weight_from_nu(nu, n, p))
    };

    Ok(ShrinkageFit {
        nu_hat,
        w_hat,
        core_eigs: eigs,
        objective_at_opt: f_opt,
        n,
        dims,
    })
}

/// `d log L/dν`, with the large-`ν` terms in cancellation-free form.
fn d_log_marginal(nu: f64, eigs: &[f64], n: usize, p: usize) -> f64 {
    let pf = p as f64;
    let nf = n as f64;
    let d = nu - pf - 1.0;
    let gamma: f64 = (1..=p)
        .map(|j| 0.5 * psi_diff((nu + 1.0 - j as f64) / 2.0, nf / 2.0))
        .sum();
    // d/dν [(νp/2)·log w + (np/2)·log(1−w)]
    let weight = pf / 2.0 * ((pf + 1.0) * nf / ((d + nf) * d) - (nf / d).ln_1p());
    let det: f64 = eigs
        .iter()
        .map(|&c| {
            -0.5 * (nf * (c - 1.0) / (d + nf)).ln_1p()
                - (nu + nf) / 2.0 * nf * (1.0 - c) / ((d + nf) * (d + nf * c))
        })
        .sum();
    gamma + weight + det
}

/// `ψ(z+h) − ψ(z)`, differencing the asymptotic series for large `z`.
fn psi_diff(z: f64, h: f64) -> f64 {
    if z < 15.0 {
        return digamma(z + h) - digamma(z);
    }
    fn tail(x: f64) -> f64 {
        let r = 1.0 / (x * x);
        r * (1.0 / 12.0 - r * (1.0 / 120.0 - r * (1.0 / 252.0 - r * (1.0 / 240.0 - r / 132.0))))
    }
    (h / z).ln_1p() + h / (2.0 * z * (z + h)) - (tail(z + h) - tail(z))
}

/// Root of `f` in `[a, b]` given `f(a) > 0 ≥ f(b)`.
fn bisect_root<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64) -> f64 {
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if f(m) > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// `(1−w)·S + w·K`.
pub fn assemble(s: &Covariance, k: &Covariance, w: f64) -> Result<Covariance> {
    if s.dim() != k.dim() {
        return Err(Error::DimensionMismatch(format!("S is {0}x{0}, K is {1}x{1}", s.dim(), k.dim())));
    }
    if !(0.0..=1.0).contains(&w) {
        return Err(Error::Domain(format!("weight {w} outside [0, 1]")));
    }
    Covariance::symmetrized(s.matrix() * (1.0 - w) + k.matrix() * w)
}

/// Core shrinkage estimate `Σ̂ = (1−ŵ)·S + ŵ·K̂` from the sample covariance
/// of `n` observations.
///
/// `S` may be singular (`n < p`); the decomposition then succeeds only when
/// the separable fit exists, and fails with `FactorSingular` otherwise.
pub fn cse(s: &Covariance, n: usize, dims: Dims, opts: &KcdOptions) -> Result<CseResult> {
    dims.check_square(s.matrix(), "S")?;
    if n == 0 {
        return Err(Error::Domain("sample size must be at least 1".into()));
    }
    let dec = kcd_psd(s, dims, opts)?;
    let eig = sym_eigen(&dec.core)?;
    let fit = fit_weight_from_eigs(eig.values.as_slice(), n, dims)?;
    let k_hat = dec.k_factor;
    let estimate = assemble(s, &k_hat.kron(), fit.w_hat)?;
    Ok(CseResult {
        estimate,
        fit,
        k_hat,
        converged: dec.converged,
        iterations: dec.iterations,
    })
}

/// Posterior mean `E[Σ | S] = (1−w)·S + w·(Σ2⊗Σ1)` under the given prior.
pub fn oracle_bayes(s: &Covariance, n: usize, prior: &PriorSpec) -> Result<Covariance> {
    let dims = prior.k_mean.dims();
    dims.check_square(s.matrix(), "S")?;
    let w = weight_from_nu(prior.nu, n, dims.p());
    assemble(s, &prior.k_mean.kron(), w)
}

/// `S = Σ_i y_i y_iᵀ / n` for mean-zero observations.
pub fn sample_covariance(samples: &[DVector<f64>], p: usize) -> Result<Covariance> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("no samples".into()));
    }
    if let Some(bad) = samples.iter().find(|y| y.len() != p) {
        return Err(Error::DimensionMismatch(format!("sample of length {}, expected {p}", bad.len())));
    }
    let y = DMatrix::from_columns(samples);
    Covariance::symmetrized(&y * y.transpose() / samples.len() as f64)
}
