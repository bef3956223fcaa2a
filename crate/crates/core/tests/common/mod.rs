//! Independent oracles shared by the integration and acceptance tests. None
//! of these call into the code paths they are used to check.
#![allow(dead_code)]

use coreshrink::qda::{ClassModel, Estimator, LabeledDataset};
use coreshrink::randmat::{random_matrix, random_spd, sample_matrix_normal_with, Seed};
use coreshrink::spdlinalg::{Covariance, Dims};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// `ln Γ(x)` for `x > 0`: upward recurrence to `x ≥ 30`, then the Stirling
/// series through the `x^-13` term.
pub fn ln_gamma_stirling(x: f64) -> f64 {
    assert!(x > 0.0);
    let mut shift_prod = 1.0f64;
    let mut shift_log = 0.0;
    let mut z = x;
    while z < 30.0 {
        shift_prod *= z;
        if shift_prod > 1e250 {
            shift_log += shift_prod.ln();
            shift_prod = 1.0;
        }
        z += 1.0;
    }
    shift_log += shift_prod.ln();
    let z2 = z * z;
    // Bernoulli coefficients B_2k / (2k(2k-1))
    let coeffs = [
        1.0 / 12.0,
        -1.0 / 360.0,
        1.0 / 1260.0,
        -1.0 / 1680.0,
        1.0 / 1188.0,
        -691.0 / 360360.0,
        1.0 / 156.0,
    ];
    let mut series = 0.0;
    let mut zpow = z;
    for c in coeffs {
        series += c / zpow;
        zpow *= z2;
    }
    (z - 0.5) * z.ln() - z + 0.5 * (2.0 * std::f64::consts::PI).ln() + series - shift_log
}

pub fn lmgamma_oracle(p: usize, a: f64) -> f64 {
    let pf = p as f64;
    pf * (pf - 1.0) / 4.0 * std::f64::consts::PI.ln()
        + (1..=p).map(|j| ln_gamma_stirling(a + (1.0 - j as f64) / 2.0)).sum::<f64>()
}

/// Log of the marginal density of `S` given `ν` with `K̂` plugged in, up to
/// `ν`-free terms, in its unsimplified form
/// `log k(ν) − log k(ν+n) − (np/2)·log(ν−p−1) − ((ν+n)/2)·log|I + n/(ν−p−1)·Ĉ|`
/// with `k(ν)⁻¹ = 2^{νp/2}·Γ_p(ν/2)`; the determinant is taken densely.
pub fn unsimplified_log_marginal(nu: f64, core: &DMatrix<f64>, n: usize) -> f64 {
    let p = core.nrows();
    let pf = p as f64;
    let nf = n as f64;
    let d = nu - pf - 1.0;
    let log_k = |v: f64| -(v * pf / 2.0) * 2f64.ln() - lmgamma_oracle(p, v / 2.0);
    let m = DMatrix::<f64>::identity(p, p) + core * (nf / d);
    let logdet = m.lu().determinant().ln();
    log_k(nu) - log_k(nu + nf) - nf * pf / 2.0 * d.ln() - (nu + nf) / 2.0 * logdet
}

/// Scalar (`p = 1`) marginal of `x = n·S`: `x | τ ~ Gamma(n/2, rate τ/2)`,
/// `τ ~ Gamma(ν/2, rate (ν−2)·k/2)`, integrated in closed form.
pub fn scalar_log_marginal(nu: f64, s: f64, k: f64, n: usize) -> f64 {
    let nf = n as f64;
    let x = nf * s;
    let beta = (nu - 2.0) * k / 2.0;
    (nf / 2.0 - 1.0) * x.ln() - ln_gamma_stirling(nf / 2.0) + nu / 2.0 * beta.ln() - ln_gamma_stirling(nu / 2.0)
        - nf / 2.0 * 2f64.ln()
        + ln_gamma_stirling((nf + nu) / 2.0)
        - (nf + nu) / 2.0 * (beta + x / 2.0).ln()
}

/// Random orthogonal matrix from the QR factorization of a Gaussian matrix.
pub fn random_orthogonal<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DMatrix<f64> {
    random_matrix(rng, dim, dim).qr().q()
}

/// `Q diag(eigs) Qᵀ` for a random orthogonal `Q`.
pub fn matrix_with_spectrum<R: Rng + ?Sized>(rng: &mut R, eigs: &[f64]) -> DMatrix<f64> {
    let q = random_orthogonal(rng, eigs.len());
    &q * DMatrix::from_diagonal(&DVector::from_column_slice(eigs)) * q.transpose()
}

/// Nonseparable test covariance: a random separable matrix plus a random
/// SPD perturbation of weight `mix`.
pub fn nonseparable_spd<R: Rng + ?Sized>(rng: &mut R, dims: Dims, mix: f64) -> Covariance {
    let s1 = random_spd(rng, dims.p1());
    let s2 = random_spd(rng, dims.p2());
    let pert = random_spd(rng, dims.p());
    Covariance::new(s2.matrix().kronecker(s1.matrix()) * (1.0 - mix) + pert.matrix() * mix).unwrap()
}

/// Dense divergence `ln|K| + tr(K⁻¹Σ)` via LU.
pub fn dense_divergence(k: &DMatrix<f64>, sigma: &DMatrix<f64>) -> f64 {
    let lu = k.clone().lu();
    let det = lu.determinant();
    if !(det > 0.0) {
        return f64::INFINITY;
    }
    det.ln() + (lu.try_inverse().unwrap() * sigma).trace()
}

/// Nelder–Mead minimization with restarts from the incumbent.
pub fn nelder_mead<F: Fn(&[f64]) -> f64>(f: F, x0: &[f64], step: f64, max_evals: usize) -> (Vec<f64>, f64) {
    let dim = x0.len();
    let mut best = x0.to_vec();
    let mut best_f = f(&best);
    let mut evals = 1;
    let mut scale = step;
    loop {
        let mut simplex: Vec<Vec<f64>> = vec![best.clone()];
        for i in 0..dim {
            let mut v = best.clone();
            v[i] += scale;
            simplex.push(v);
        }
        let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
        evals += dim;
        for _ in 0..20_000 {
            let mut order: Vec<usize> = (0..=dim).collect();
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            simplex = order.iter().map(|&i| simplex[i].clone()).collect();
            values = order.iter().map(|&i| values[i]).collect();
            let spread = values[dim] - values[0];
            if spread.abs() <= 1e-15 * (1.0 + values[0].abs()) {
                break;
            }
            let centroid: Vec<f64> = (0..dim)
                .map(|j| simplex[..dim].iter().map(|v| v[j]).sum::<f64>() / dim as f64)
                .collect();
            let along = |t: f64| -> Vec<f64> {
                (0..dim).map(|j| centroid[j] + t * (simplex[dim][j] - centroid[j])).collect()
            };
            let xr = along(-1.0);
            let fr = f(&xr);
            evals += 1;
            if fr < values[0] {
                let xe = along(-2.0);
                let fe = f(&xe);
                evals += 1;
                if fe < fr {
                    simplex[dim] = xe;
                    values[dim] = fe;
                } else {
                    simplex[dim] = xr;
                    values[dim] = fr;
                }
            } else if fr < values[dim - 1] {
                simplex[dim] = xr;
                values[dim] = fr;
            } else {
                let (xc, fc) = if fr < values[dim] {
                    let x = along(-0.5);
                    let v = f(&x);
                    (x, v)
                } else {
                    let x = along(0.5);
                    let v = f(&x);
                    (x, v)
                };
                evals += 1;
                if fc < values[dim].min(fr) {
                    simplex[dim] = xc;
                    values[dim] = fc;
                } else {
                    for i in 1..=dim {
                        for j in 0..dim {
                            simplex[i][j] = simplex[0][j] + 0.5 * (simplex[i][j] - simplex[0][j]);
                        }
                        values[i] = f(&simplex[i]);
                    }
                    evals += dim;
                }
            }
            if evals > max_evals {
                break;
            }
        }
        let i = (0..=dim).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
        let improved = values[i] < best_f - 1e-15 * (1.0 + best_f.abs());
        if values[i] < best_f {
            best = simplex[i].clone();
            best_f = values[i];
        }
        if !improved || evals > max_evals {
            return (best, best_f);
        }
        scale = (scale * 0.5).max(1e-4);
    }
}

fn chol2(a: f64, b: f64, c: f64) -> DMatrix<f64> {
    let l = DMatrix::from_row_slice(2, 2, &[a.exp(), 0.0, b, c.exp()]);
    &l * l.transpose()
}

/// Separable minimizer of the dense divergence for `p1 = p2 = 2`, found by
/// Nelder–Mead over Cholesky parameters of both factors (the product has
/// five free parameters after the scale normalization).
pub fn brute_force_kronecker_2x2(sigma: &DMatrix<f64>) -> DMatrix<f64> {
    let objective = |x: &[f64]| {
        let k = chol2(x[3], x[4], x[5]).kronecker(&chol2(x[0], x[1], x[2]));
        dense_divergence(&k, sigma)
    };
    let (x, _) = nelder_mead(objective, &[0.0; 6], 0.5, 400_000);
    chol2(x[3], x[4], x[5]).kronecker(&chol2(x[0], x[1], x[2]))
}

/// Maximizer of `f` over `count` geometric points on `(lo, hi]`.
pub fn geometric_grid_argmax<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, count: usize) -> (usize, f64) {
    let ratio = (hi / lo).ln() / count as f64;
    let mut best = (0, f64::NAN, f64::NEG_INFINITY);
    for k in 1..=count {
        let x = lo * (ratio * k as f64).exp();
        let v = f(x);
        if v > best.2 {
            best = (k, x, v);
        }
    }
    (best.0, best.1)
}

/// Log posterior-weight check oracle: `(ν−p−1)/(n+ν−p−1)` by direct division.
pub fn w_direct(nu: f64, n: usize, p: usize) -> f64 {
    (nu - p as f64 - 1.0) / (n as f64 + nu - p as f64 - 1.0)
}

/// Matrix-Gaussian classes `c0, c1, …` with separable-plus-perturbation
/// covariances and uniformly drawn means.
pub struct QdaTask {
    pub dims: Dims,
    pub means: Vec<DVector<f64>>,
    pub covs: Vec<Covariance>,
}

impl QdaTask {
    pub fn random(dims: Dims, classes: usize, mean_spread: f64, mix: f64, seed: Seed) -> Self {
        let mut rng = seed.rng();
        let p = dims.p();
        let means = (0..classes)
            .map(|_| DVector::from_fn(p, |_, _| mean_spread * rng.random_range(-1.0..1.0)))
            .collect();
        let covs = (0..classes).map(|_| nonseparable_spd(&mut rng, dims, mix)).collect();
        QdaTask { dims, means, covs }
    }

    pub fn draw(&self, per_class: usize, seed: Seed) -> LabeledDataset {
        let mut data = LabeledDataset::new(self.dims);
        let mut rng = seed.rng();
        for (k, (mu, cov)) in self.means.iter().zip(&self.covs).enumerate() {
            for y in sample_matrix_normal_with(&mut rng, cov, self.dims, per_class).unwrap() {
                data.push(format!("c{k}"), y + mu).unwrap();
            }
        }
        data
    }

    /// Classifier built from the true parameters.
    pub fn true_models(&self) -> Vec<ClassModel> {
        (0..self.means.len())
            .map(|k| ClassModel::new(format!("c{k}"), self.means[k].clone(), self.covs[k].clone(), Estimator::Mle, None).unwrap())
            .collect()
    }
}
