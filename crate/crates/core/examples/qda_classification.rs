//! Three-class quadratic discriminant analysis on matrix-valued features
//! with MLE, separable and core-shrinkage class covariances.
use coreshrink::kroncore::KcdOptions;
use coreshrink::qda::{confusion, fit_class_models, Estimator, LabeledDataset};
use coreshrink::randmat::{random_spd, sample_matrix_normal_with, Seed};
use coreshrink::spdlinalg::{Covariance, Dims};
use nalgebra::DVector;
use rand::Rng;

fn main() -> Result<(), coreshrink::Error> {
    let dims = Dims::new(3, 4)?;
    let p = dims.p();
    let mut rng = Seed(8).rng();
    let classes: Vec<(DVector<f64>, Covariance)> = (0..3)
        .map(|_| {
            let mean = DVector::from_fn(p, |_, _| 0.4 * rng.random_range(-1.0..1.0));
            let s1 = random_spd(&mut rng, dims.p1());
            let s2 = random_spd(&mut rng, dims.p2());
            let noise = random_spd(&mut rng, p);
            let cov = Covariance::new(s2.matrix().kronecker(s1.matrix()) * 0.95 + noise.matrix() * 0.05).unwrap();
            (mean, cov)
        })
        .collect();

    let draw = |per_class: usize, seed: Seed| -> Result<LabeledDataset, coreshrink::Error> {
        let mut data = LabeledDataset::new(dims);
        let mut rng = seed.rng();
        for (k, (mean, cov)) in classes.iter().enumerate() {
            for y in sample_matrix_normal_with(&mut rng, cov, dims, per_class)? {
                data.push(format!("class{k}"), y + mean)?;
            }
        }
        Ok(data)
    };
    let train = draw(25, Seed(9))?;
    let test = draw(300, Seed(10))?;

    for est in [Estimator::Mle, Estimator::Kmle, Estimator::Cse] {
        let models = fit_class_models(&train, est, &KcdOptions::default())?;
        let conf = confusion(&models, &test)?;
        println!("{est:>5}: accuracy {:.3}", conf.accuracy());
    }
    Ok(())
}
