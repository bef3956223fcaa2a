mod common;

use common::*;
use coreshrink::ebshrink::{assemble, cse, fit_weight_from_eigs, lmgamma, log_marginal, sample_covariance, weight_from_nu};
use coreshrink::kroncore::KcdOptions;
use coreshrink::randmat::{sample_matrix_normal_with, Seed};
use coreshrink::spdlinalg::{Covariance, Dims};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn min_eig(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigen().eigenvalues.min()
}

#[test]
fn lmgamma_matches_stirling_oracle() {
    let direct = lmgamma_oracle(3, 5.0);
    assert!((lmgamma(3, 5.0).unwrap() - direct).abs() < 1e-12);
    // Γ(5)Γ(4.5)Γ(4) π^{3/2} by hand: 24 · 11.631728396567448 · 6 · 5.568327996831708
    let by_hand = (24.0f64 * 11.631_728_396_567_448 * 6.0 * 5.568_327_996_831_708).ln();
    assert!((direct - by_hand).abs() < 1e-12);
}

#[test]
fn scalar_case_matches_gamma_gamma_marginal() {
    let dims = Dims::new(1, 1).unwrap();
    for &(n, s) in &[(1usize, 0.7), (5, 2.0), (40, 0.3)] {
        let nus = [2.5, 3.0, 7.0, 40.0, 900.0];
        for &a in &nus {
            for &b in &nus {
                // p = 1: K̂ = S and the core is exactly 1.
                let ours = log_marginal(a, &[1.0], n, dims).unwrap() - log_marginal(b, &[1.0], n, dims).unwrap();
                let oracle = scalar_log_marginal(a, s, s, n) - scalar_log_marginal(b, s, s, n);
                assert!((ours - oracle).abs() < 1e-9, "n={n} nu=({a},{b}): {ours} vs {oracle}");
            }
        }
    }
}

#[test]
fn fixed_instance_matches_unsimplified_density() {
    let dims = Dims::new(2, 2).unwrap();
    let eigs = [2.0, 1.5, 0.4, 0.1];
    let core = matrix_with_spectrum(&mut Seed(5).rng(), &eigs);
    let n = 10;
    let nus = [6.0, 10.0, 20.0];
    for &a in &nus {
        for &b in &nus {
            let ours = log_marginal(a, &eigs, n, dims).unwrap() - log_marginal(b, &eigs, n, dims).unwrap();
            let oracle = unsimplified_log_marginal(a, &core, n) - unsimplified_log_marginal(b, &core, n);
            assert!((ours - oracle).abs() < 1e-9);
        }
    }
}

#[test]
fn fixed_instance_matches_grid_search() {
    let dims = Dims::new(2, 2).unwrap();
    let eigs = [2.0, 1.5, 0.4, 0.1];
    let n = 10;
    let fit = fit_weight_from_eigs(&eigs, n, dims).unwrap();
    let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&eigs));
    let (k, nu_grid) = geometric_grid_argmax(|nu| unsimplified_log_marginal(nu, &diag, n), 5.0, 1e8, 10_000);
    assert!(k > 1 && k < 10_000);
    assert!(((fit.nu_hat - nu_grid) / nu_grid).abs() < 1e-3, "{} vs {nu_grid}", fit.nu_hat);
    assert!((fit.w_hat - w_direct(fit.nu_hat, n, 4)).abs() < 1e-15);
}

#[test]
fn spread_core_with_large_n_puts_little_weight_on_separable_part() {
    let dims = Dims::new(2, 2).unwrap();
    let fit = fit_weight_from_eigs(&[3.0, 0.6, 0.3, 0.1], 10_000, dims).unwrap();
    assert!(fit.w_hat < 0.05, "{}", fit.w_hat);
}

#[test]
fn weight_limit_at_large_nu() {
    assert!((weight_from_nu(1e10, 10, 4) - 1.0).abs() < 1e-6);
    assert_eq!(weight_from_nu(4.0 + 1.0 + 10.0, 10, 4), 0.5);
}

fn sample_cov_fixture(seed: u64, dims: Dims, n: usize) -> Covariance {
    let mut rng = Seed(seed).rng();
    let sigma = nonseparable_spd(&mut rng, dims, 0.4);
    let ys = sample_matrix_normal_with(&mut rng, &sigma, dims, n).unwrap();
    sample_covariance(&ys, dims.p()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn cse_is_scale_equivariant(seed in any::<u64>(), a in prop::sample::select(vec![0.01, 100.0])) {
        let dims = Dims::new(2, 3).unwrap();
        let n = 12;
        let s = sample_cov_fixture(seed, dims, n);
        let opts = KcdOptions::default();
        let base = cse(&s, n, dims, &opts).unwrap();
        let scaled = cse(&s.scaled(a), n, dims, &opts).unwrap();
        prop_assert!((base.fit.w_hat - scaled.fit.w_hat).abs() < 1e-10);
        let expected = base.estimate.matrix() * a;
        prop_assert!((scaled.estimate.matrix() - &expected).norm() / expected.norm() < 1e-9);
    }

    #[test]
    fn shrinkage_path_stays_above_endpoint_spectra(seed in any::<u64>(), w in 0.0f64..=1.0) {
        let dims = Dims::new(2, 3).unwrap();
        let s = sample_cov_fixture(seed, dims, 9);
        let res = cse(&s, 9, dims, &KcdOptions::default()).unwrap();
        let k = res.k_hat.kron();
        let path = assemble(&s, &k, w).unwrap();
        let floor = min_eig(s.matrix()).min(min_eig(k.matrix()));
        prop_assert!(min_eig(path.matrix()) >= floor - 1e-12);
    }

    #[test]
    fn fitted_core_eigenvalues_sum_to_p(seed in any::<u64>(), n in 7usize..40) {
        let dims = Dims::new(2, 3).unwrap();
        let s = sample_cov_fixture(seed, dims, n);
        let fit = cse(&s, n, dims, &KcdOptions::default()).unwrap().fit;
        prop_assert!((fit.core_eigs.iter().sum::<f64>() - 6.0).abs() < 1e-6);
        prop_assert!(fit.core_eigs.iter().all(|&c| c > 0.0));
        if fit.nu_hat.is_finite() {
            prop_assert!((fit.w_hat - w_direct(fit.nu_hat, n, 6)).abs() < 1e-12);
        } else {
            prop_assert_eq!(fit.w_hat, 1.0);
        }
    }

    #[test]
    fn log_marginal_finite_for_extreme_spectra(
        eigs in prop::collection::vec(prop_oneof![Just(1e-12), Just(1e6), 1e-12f64..1e6], 4),
        n in 1usize..200,
        t in -15.0f64..25.0,
    ) {
        let dims = Dims::new(2, 2).unwrap();
        let v = log_marginal(5.0 + t.exp(), &eigs, n, dims).unwrap();
        prop_assert!(v.is_finite());
    }
}
