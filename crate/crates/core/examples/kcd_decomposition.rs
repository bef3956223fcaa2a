//! Split a nonseparable covariance into its separable part and core, then
//! put it back together.
use coreshrink::kroncore::{core_residual, kcd, KcdOptions, SqrtKind};
use coreshrink::randmat::{random_spd, Seed};
use coreshrink::spdlinalg::{Covariance, Dims};

fn main() -> Result<(), coreshrink::Error> {
    let dims = Dims::new(3, 4)?;
    let mut rng = Seed(11).rng();
    let s1 = random_spd(&mut rng, dims.p1());
    let s2 = random_spd(&mut rng, dims.p2());
    let noise = random_spd(&mut rng, dims.p());
    let sigma = Covariance::new(s2.matrix().kronecker(s1.matrix()) * 0.8 + noise.matrix() * 0.2)?;

    for kind in [SqrtKind::Symmetric, SqrtKind::Cholesky] {
        let res = kcd(&sigma, dims, &KcdOptions::default().with_sqrt(kind))?;
        let err = (res.reconstruct().matrix() - sigma.matrix()).norm() / sigma.matrix().norm();
        println!(
            "{kind:?}: {} sweeps, divergence {:.6}, core trace {:.6}, core residual {:.2e}, reconstruction error {:.2e}",
            res.iterations,
            res.divergence_value,
            res.core.trace(),
            core_residual(&res.core, dims)?,
            err
        );
    }
    Ok(())
}
