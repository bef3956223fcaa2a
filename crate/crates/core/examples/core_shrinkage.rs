//! Core shrinkage estimate from matrix-normal data, compared against the
//! sample covariance and its separable fit.
use coreshrink::ebshrink::{cse, sample_covariance};
use coreshrink::kroncore::KcdOptions;
use coreshrink::randmat::{sample_matrix_normal, sample_prior_sigma, ScenarioPrior, Seed};
use coreshrink::simharness::loss_sq;
use coreshrink::spdlinalg::Dims;

fn main() -> Result<(), coreshrink::Error> {
    let dims = Dims::new(4, 5)?;
    let prior = ScenarioPrior::identity(dims, 2.0 * dims.p() as f64)?;
    let sigma = sample_prior_sigma(&prior, Seed(3))?;

    for n in [10, 25, 80] {
        let ys = sample_matrix_normal(&sigma, dims, n, Seed(100 + n as u64))?;
        let s = sample_covariance(&ys, dims.p())?;
        let res = cse(&s, n, dims, &KcdOptions::default())?;
        println!(
            "n = {n:3}: w_hat = {:.4}  loss MLE {:9.3}  KMLE {:9.3}  CSE {:9.3}",
            res.fit.w_hat,
            loss_sq(&s, &sigma)?,
            loss_sq(&res.k_hat.kron(), &sigma)?,
            loss_sq(&res.estimate, &sigma)?
        );
    }
    Ok(())
}
