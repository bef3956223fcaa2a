//! Dense kernels for symmetric positive (semi)definite matrices.
//!
//! Matrix-variate data `Y` (`p1 × p2`) is vectorized column-major: entry
//! `(i, j)` of `Y` sits at position `j·p1 + i` of `y = vec(Y)` (zero-based).
//! Under that ordering `Var(vec(A1 Y A2ᵀ)) = (A2 ⊗ A1) Var(vec Y) (A2 ⊗ A1)ᵀ`,
//! so a separable covariance with row covariance `Σ1` and column covariance
//! `Σ2` is `Σ2 ⊗ Σ1`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Relative tolerance for positive-definiteness checks.
pub const PSD_RELATIVE_TOL: f64 = 1e-10;

const EIGEN_MAX_SWEEPS: usize = 10_000;

/// Row and column dimensions of the matrix-variate observations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    p1: usize,
    p2: usize,
}

impl Dims {
    pub fn new(p1: usize, p2: usize) -> Result<Self> {
        if p1 == 0 || p2 == 0 {
            return Err(Error::InvalidInput(format!(
                "dimensions must be positive, got ({p1}, {p2})"
            )));
        }
        Ok(Dims { p1, p2 })
    }

    pub fn p1(&self) -> usize {
        self.p1
    }

    pub fn p2(&self) -> usize {
        self.p2
    }

    /// Total dimension `p1·p2` of the vectorized observation.
    pub fn p(&self) -> usize {
        self.p1 * self.p2
    }

    pub(crate) fn check_square(&self, m: &DMatrix<f64>, what: &str) -> Result<()> {
        let p = self.p();
        if m.nrows() != p || m.ncols() != p {
            return Err(Error::DimensionMismatch(format!(
                "{what} is {}x{}, expected {p}x{p} for p1={}, p2={}",
                m.nrows(),
                m.ncols(),
                self.p1,
                self.p2
            )));
        }
        Ok(())
    }
}

/// A symmetric positive semidefinite matrix.
///
/// Construction symmetrizes the input as `(M + Mᵀ)/2` and rejects matrices
/// with an eigenvalue below `-1e-10·max|m_ij|`.
#[derive(Clone, Debug, PartialEq)]
pub struct Covariance(DMatrix<f64>);

impl Covariance {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        let c = Self::symmetrized(m)?;
        let tol = c.psd_tolerance();
        let min = c.min_eigenvalue()?;
        if min < -tol {
            return Err(Error::NotPositiveDefinite {
                min_eig: min,
                threshold: -tol,
            });
        }
        Ok(c)
    }

    /// Symmetrizes without the semidefiniteness check. For values that are
    /// PSD by construction (Gram matrices, convex combinations).
    pub(crate) fn symmetrized(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "covariance must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("covariance has non-finite entries".into()));
        }
        Ok(Covariance(symmetrize(&m)))
    }

    pub fn identity(dim: usize) -> Self {
        Covariance(DMatrix::identity(dim, dim))
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn scaled(&self, a: f64) -> Covariance {
        Covariance(&self.0 * a)
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    /// Absolute eigenvalue threshold `1e-10·max|m_ij|` used for
    /// definiteness decisions on this matrix.
    pub fn psd_tolerance(&self) -> f64 {
        PSD_RELATIVE_TOL * self.0.amax()
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        if self.dim() == 0 {
            return Ok(f64::INFINITY);
        }
        let eig = sym_eigen(self)?;
        Ok(eig.values[eig.values.len() - 1])
    }

    pub fn is_positive_definite(&self) -> bool {
        let tol = self.psd_tolerance();
        matches!(self.min_eigenvalue(), Ok(m) if m > tol)
    }

    /// `ln|Σ|` from the Cholesky factor.
    pub fn logdet(&self) -> Result<f64> {
        logdet_spd(&self.0)
    }

    pub fn inverse(&self) -> Result<Covariance> {
        Ok(Covariance(spd_inverse(&self.0)?))
    }
}

impl AsRef<DMatrix<f64>> for Covariance {
    fn as_ref(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// A separable covariance `Σ2 ⊗ Σ1`, stored by its factors with the scale
/// fixed by `trace(Σ1) = p1`.
#[derive(Clone, Debug, PartialEq)]
pub struct SeparableCovariance {
    dims: Dims,
    sigma1: Covariance,
    sigma2: Covariance,
}

impl SeparableCovariance {
    pub fn new(dims: Dims, sigma1: Covariance, sigma2: Covariance) -> Result<Self> {
        if sigma1.dim() != dims.p1() || sigma2.dim() != dims.p2() {
            return Err(Error::DimensionMismatch(format!(
                "factors are {}x{} and {}x{}, expected p1={} and p2={}",
                sigma1.dim(),
                sigma1.dim(),
                sigma2.dim(),
                sigma2.dim(),
                dims.p1(),
                dims.p2()
            )));
        }
        for s in [&sigma1, &sigma2] {
            require_pd(s)?;
        }
        Ok(Self::normalized(dims, sigma1.into_matrix(), sigma2.into_matrix()))
    }

    /// Rescales so that `trace(Σ1) = p1`; the product is unchanged.
    pub(crate) fn normalized(dims: Dims, sigma1: DMatrix<f64>, sigma2: DMatrix<f64>) -> Self {
        let c = sigma1.trace() / dims.p1() as f64;
        SeparableCovariance {
            dims,
            sigma1: Covariance(symmetrize(&(sigma1 / c))),
            sigma2: Covariance(symmetrize(&(sigma2 * c))),
        }
    }

    pub fn identity(dims: Dims) -> Self {
        SeparableCovariance {
            dims,
            sigma1: Covariance::identity(dims.p1()),
            sigma2: Covariance::identity(dims.p2()),
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    /// Row covariance `Σ1`.
    pub fn sigma1(&self) -> &Covariance {
        &self.sigma1
    }

    /// Column covariance `Σ2`.
    pub fn sigma2(&self) -> &Covariance {
        &self.sigma2
    }

    /// The full `p × p` matrix `Σ2 ⊗ Σ1`.
    pub fn kron(&self) -> Covariance {
        Covariance(kron(self.sigma2.matrix(), self.sigma1.matrix()))
    }

    /// `ln|Σ2 ⊗ Σ1| = p2·ln|Σ1| + p1·ln|Σ2|`.
    pub fn logdet(&self) -> Result<f64> {
        Ok(self.dims.p2() as f64 * self.sigma1.logdet()?
            + self.dims.p1() as f64 * self.sigma2.logdet()?)
    }
}

/// Eigendecomposition with eigenvalues sorted in descending order.
#[derive(Clone, Debug)]
pub struct SymEigen {
    pub values: DVector<f64>,
    /// Orthogonal matrix whose columns are the eigenvectors.
    pub vectors: DMatrix<f64>,
}

/// Kronecker product: block `(i, j)` of the result is `a[i][j]·b`.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// Column-major vectorization.
pub fn vec(y: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(y.as_slice())
}

/// Inverse of [`vec`] for a `p1 × p2` matrix.
pub fn unvec(y: &DVector<f64>, dims: Dims) -> Result<DMatrix<f64>> {
    if y.len() != dims.p() {
        return Err(Error::DimensionMismatch(format!(
            "vector of length {} cannot be reshaped to {}x{}",
            y.len(),
            dims.p1(),
            dims.p2()
        )));
    }
    Ok(DMatrix::from_column_slice(dims.p1(), dims.p2(), y.as_slice()))
}

/// `E[Y A2 Yᵀ]` for `Var(vec Y) = sigma`:
/// `M[i][i'] = Σ_{j,j'} a2[j][j']·sigma[j·p1+i][j'·p1+i']`.
pub fn row_gram(sigma: &DMatrix<f64>, dims: Dims, a2: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    dims.check_square(sigma, "sigma")?;
    check_dim(a2, dims.p2(), "a2")?;
    let (p1, p2) = (dims.p1(), dims.p2());
    let mut m = DMatrix::zeros(p1, p1);
    for j in 0..p2 {
        for jp in 0..p2 {
            let a = a2[(j, jp)];
            if a != 0.0 {
                m += sigma.view((j * p1, jp * p1), (p1, p1)) * a;
            }
        }
    }
    Ok(symmetrize(&m))
}

/// `E[Yᵀ A1 Y]` for `Var(vec Y) = sigma`:
/// `M[j][j'] = Σ_{i,i'} a1[i][i']·sigma[j·p1+i][j'·p1+i']`.
pub fn col_gram(sigma: &DMatrix<f64>, dims: Dims, a1: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    dims.check_square(sigma, "sigma")?;
    check_dim(a1, dims.p1(), "a1")?;
    let (p1, p2) = (dims.p1(), dims.p2());
    let mut m = DMatrix::zeros(p2, p2);
    for j in 0..p2 {
        for jp in j..p2 {
            let block = sigma.view((j * p1, jp * p1), (p1, p1));
            let v = block.component_mul(a1).sum();
            m[(j, jp)] = v;
            m[(jp, j)] = v;
        }
    }
    Ok(m)
}

/// Symmetric eigendecomposition, eigenvalues descending.
pub fn sym_eigen(sigma: &Covariance) -> Result<SymEigen> {
    sym_eigen_matrix(sigma.matrix())
}

pub(crate) fn sym_eigen_matrix(m: &DMatrix<f64>) -> Result<SymEigen> {
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, EIGEN_MAX_SWEEPS)
        .ok_or(Error::EigenNoConvergence)?;
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(SymEigen { values, vectors })
}

/// Symmetric square root `H = Q·diag(√λ)·Qᵀ`.
pub fn sym_sqrt(sigma: &Covariance) -> Result<DMatrix<f64>> {
    let eig = sym_eigen(sigma)?;
    let tol = sigma.psd_tolerance();
    let min = eig.values.min();
    if min <= tol {
        return Err(Error::NotPositiveDefinite {
            min_eig: min,
            threshold: tol,
        });
    }
    let root = eig.values.map(f64::sqrt);
    let h = &eig.vectors * DMatrix::from_diagonal(&root) * eig.vectors.transpose();
    Ok(symmetrize(&h))
}

/// Lower-triangular Cholesky factor `L` with `L·Lᵀ = sigma`.
pub fn chol_sqrt(sigma: &Covariance) -> Result<DMatrix<f64>> {
    require_pd(sigma)?;
    cholesky(sigma.matrix()).map(|c| c.l())
}

/// Stein-type divergence `d(K:Σ) = ln|K| + trace(K⁻¹Σ)`.
///
/// Over positive definite `K` this is minimized at `K = Σ`.
pub fn divergence(k: &Covariance, sigma: &Covariance) -> Result<f64> {
    if k.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch(format!(
            "k is {0}x{0}, sigma is {1}x{1}",
            k.dim(),
            sigma.dim()
        )));
    }
    require_pd(k)?;
    let chol = cholesky(k.matrix())?;
    let logdet = chol_logdet(&chol);
    Ok(logdet + chol.solve(sigma.matrix()).trace())
}

/// Squared Frobenius norm of `a - b`.
pub fn frobenius_dist_sq(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm_squared()
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub(crate) fn cholesky(m: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    match Cholesky::new(m.clone()) {
        Some(c) => Ok(c),
        None => {
            let min = sym_eigen_matrix(&symmetrize(m))
                .map(|e| e.values.min())
                .unwrap_or(f64::NAN);
            Err(Error::NotPositiveDefinite {
                min_eig: min,
                threshold: PSD_RELATIVE_TOL * m.amax(),
            })
        }
    }
}

pub(crate) fn chol_logdet(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

pub(crate) fn logdet_spd(m: &DMatrix<f64>) -> Result<f64> {
    Ok(chol_logdet(&cholesky(m)?))
}

pub(crate) fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(symmetrize(&cholesky(m)?.inverse()))
}

/// Errors unless every eigenvalue exceeds the relative PSD tolerance.
pub(crate) fn require_pd(sigma: &Covariance) -> Result<()> {
    let tol = sigma.psd_tolerance();
    let min = sigma.min_eigenvalue()?;
    if min <= tol {
        return Err(Error::NotPositiveDefinite {
            min_eig: min,
            threshold: tol,
        });
    }
    Ok(())
}

fn check_dim(m: &DMatrix<f64>, n: usize, what: &str) -> Result<()> {
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "{what} is {}x{}, expected {n}x{n}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}
