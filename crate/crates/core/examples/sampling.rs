//! Wishart, inverse-Wishart and matrix-normal draws; averages should sit
//! near their expectations.
use coreshrink::ebshrink::sample_covariance;
use coreshrink::randmat::{sample_matrix_normal, sample_prior_sigma, sample_wishart, ScenarioPrior, Seed};
use coreshrink::spdlinalg::{Covariance, Dims};
use nalgebra::DMatrix;

fn main() -> Result<(), coreshrink::Error> {
    let dims = Dims::new(2, 3)?;
    let p = dims.p();
    let reps = 2000;

    let scale = Covariance::from_diagonal(&[1.0, 2.0, 0.5, 1.0, 3.0, 1.5])?;
    let df = 12.0;
    let mut mean = DMatrix::zeros(p, p);
    for r in 0..reps {
        mean += sample_wishart(&scale, df, Seed(r))?.matrix();
    }
    mean /= reps as f64;
    let err = (&mean / df - scale.matrix()).norm() / scale.matrix().norm();
    println!("Wishart mean / df vs scale: relative error {err:.3}");

    let prior = ScenarioPrior::identity(dims, 2.0 * p as f64)?;
    let mut mean = DMatrix::zeros(p, p);
    for r in 0..reps {
        mean += sample_prior_sigma(&prior, Seed(10_000 + r))?.matrix();
    }
    mean /= reps as f64;
    let err = (&mean - prior.mean().matrix()).norm() / (p as f64).sqrt();
    println!("inverse-Wishart mean vs prior mean: relative error {err:.3}");

    let ys = sample_matrix_normal(&scale, dims, 20_000, Seed(99))?;
    let s = sample_covariance(&ys, p)?;
    let err = (s.matrix() - scale.matrix()).norm() / scale.matrix().norm();
    println!("matrix-normal sample covariance vs truth: relative error {err:.3}");
    Ok(())
}
