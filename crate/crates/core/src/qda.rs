//! Quadratic discriminant analysis with pluggable covariance estimators.
//!
//! Each class gets a sample mean and a covariance estimate of its centered
//! samples (divisor `n_k`). A new observation is assigned to the class with
//! the smallest score `(y−μ̂_k)ᵀ Σ̂_k⁻¹ (y−μ̂_k) + ln|Σ̂_k|`; class priors are
//! taken to be equal.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ebshrink::{cse, sample_covariance};
use crate::kroncore::{kronecker_cov_psd, KcdOptions};
use crate::spdlinalg::{chol_logdet, cholesky, require_pd, Covariance, Dims};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    /// Sample covariance.
    Mle,
    /// Separable fit `k(S)`.
    Kmle,
    /// Core shrinkage estimate.
    Cse,
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Estimator::Mle => "mle",
            Estimator::Kmle => "kmle",
            Estimator::Cse => "cse",
        })
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mle" => Ok(Estimator::Mle),
            "kmle" => Ok(Estimator::Kmle),
            "cse" => Ok(Estimator::Cse),
            other => Err(Error::InvalidInput(format!("unknown estimator {other:?}"))),
        }
    }
}

/// Labeled `vec(Y)` samples in file order.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    dims: Dims,
    samples: Vec<(String, DVector<f64>)>,
}

impl LabeledDataset {
    pub fn new(dims: Dims) -> Self {
        LabeledDataset { dims, samples: Vec::new() }
    }

    pub fn push(&mut self, label: impl Into<String>, y: DVector<f64>) -> Result<()> {
        if y.len() != self.dims.p() {
            return Err(Error::DimensionMismatch(format!(
                "sample of length {}, expected {}",
                y.len(),
                self.dims.p()
            )));
        }
        self.samples.push((label.into(), y));
        Ok(())
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn samples(&self) -> &[(String, DVector<f64>)] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Samples grouped by label, labels in sorted order.
    pub fn by_class(&self) -> BTreeMap<&str, Vec<&DVector<f64>>> {
        let mut groups: BTreeMap<&str, Vec<&DVector<f64>>> = BTreeMap::new();
        for (label, y) in &self.samples {
            groups.entry(label.as_str()).or_default().push(y);
        }
        groups
    }

    /// Adds `shift` to every sample.
    pub fn translated(&self, shift: &DVector<f64>) -> Self {
        LabeledDataset {
            dims: self.dims,
            samples: self.samples.iter().map(|(l, y)| (l.clone(), y + shift)).collect(),
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        LabeledDataset {
            dims: self.dims,
            samples: self.samples.iter().map(|(l, y)| (l.clone(), y * a)).collect(),
        }
    }
}

/// Fitted parameters of one class.
#[derive(Clone, Debug)]
pub struct ClassModel {
    pub label: String,
    pub mean: DVector<f64>,
    pub cov: Covariance,
    pub logdet: f64,
    pub estimator: Estimator,
    /// Shrinkage weight, for the core shrinkage estimator only.
    pub w_hat: Option<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl ClassModel {
    /// Builds a model from a mean and a positive definite covariance.
    pub fn new(
        label: impl Into<String>,
        mean: DVector<f64>,
        cov: Covariance,
        estimator: Estimator,
        w_hat: Option<f64>,
    ) -> Result<Self> {
        if mean.len() != cov.dim() {
            return Err(Error::DimensionMismatch(format!(
                "mean of length {} with {0}x{0} covariance",
                mean.len()
            )));
        }
        require_pd(&cov)?;
        let chol = cholesky(cov.matrix())?;
        Ok(ClassModel {
            label: label.into(),
            logdet: chol_logdet(&chol),
            mean,
            cov,
            estimator,
            w_hat,
            chol,
        })
    }
}

/// Fits one model per class, in sorted label order.
pub fn fit_class_models(data: &LabeledDataset, estimator: Estimator, opts: &KcdOptions) -> Result<Vec<ClassModel>> {
    let dims = data.dims();
    let groups: Vec<(String, Vec<DVector<f64>>)> = data
        .by_class()
        .into_iter()
        .map(|(l, ys)| (l.to_string(), ys.into_iter().cloned().collect()))
        .collect();
    if groups.is_empty() {
        return Err(Error::InvalidInput("training set is empty".into()));
    }
    groups
        .into_par_iter()
        .map(|(label, ys)| {
            fit_one(&label, &ys, dims, estimator, opts).map_err(|e| Error::Class {
                class: label.clone(),
                source: Box::new(e),
            })
        })
        .collect()
}

fn fit_one(label: &str, ys: &[DVector<f64>], dims: Dims, estimator: Estimator, opts: &KcdOptions) -> Result<ClassModel> {
    let p = dims.p();
    let n = ys.len();
    let mean = ys.iter().fold(DVector::zeros(p), |acc, y| acc + y) / n as f64;
    let centered: Vec<DVector<f64>> = ys.iter().map(|y| y - &mean).collect();
    let s = sample_covariance(&centered, p)?;
    let (cov, w_hat) = match estimator {
        Estimator::Mle => (s, None),
        Estimator::Kmle => {
            let kc = kronecker_cov_psd(&s, dims, opts)?;
            (kc.k.kron(), None)
        }
        Estimator::Cse => {
            let res = cse(&s, n, dims, opts)?;
            (res.estimate, Some(res.fit.w_hat))
        }
    };
    ClassModel::new(label, mean, cov, estimator, w_hat)
}

/// QDA score `(y−μ̂)ᵀ Σ̂⁻¹ (y−μ̂) + ln|Σ̂|`.
pub fn score(y: &DVector<f64>, model: &ClassModel) -> f64 {
    let r = y - &model.mean;
    let z = model
        .chol
        .l_dirty()
        .solve_lower_triangular(&r)
        .expect("cholesky factor has a positive diagonal");
    z.norm_squared() + model.logdet
}

/// Index of the model with the smallest score (first on ties).
pub fn classify(y: &DVector<f64>, models: &[ClassModel]) -> usize {
    models
        .iter()
        .map(|m| score(y, m))
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i)
        .expect("at least one model")
}

/// Confusion counts: rows are true labels, columns predicted labels, both
/// in model order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Confusion {
    pub labels: Vec<String>,
    pub counts: DMatrix<usize>,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Diagonal over row sum for each class; `None` for classes absent from
    /// the test set.
    pub fn per_class_accuracy(&self) -> Vec<Option<f64>> {
        (0..self.labels.len())
            .map(|i| {
                let row: usize = self.counts.row(i).iter().sum();
                (row > 0).then(|| self.counts[(i, i)] as f64 / row as f64)
            })
            .collect()
    }

    pub fn accuracy(&self) -> f64 {
        let diag: usize = (0..self.labels.len()).map(|i| self.counts[(i, i)]).sum();
        diag as f64 / self.total() as f64
    }
}

/// Predicted model index for each test sample, in test order.
pub fn predict(models: &[ClassModel], test: &LabeledDataset) -> Result<Vec<usize>> {
    if models.is_empty() {
        return Err(Error::InvalidInput("no class models".into()));
    }
    if let Some(m) = models.iter().find(|m| m.mean.len() != test.dims().p()) {
        return Err(Error::DimensionMismatch(format!("model {} does not match test dims", m.label)));
    }
    Ok(test.samples().par_iter().map(|(_, y)| classify(y, models)).collect())
}

pub fn confusion(models: &[ClassModel], test: &LabeledDataset) -> Result<Confusion> {
    let index: BTreeMap<&str, usize> = models.iter().enumerate().map(|(i, m)| (m.label.as_str(), i)).collect();
    let truth = test
        .samples()
        .iter()
        .map(|(label, _)| {
            index
                .get(label.as_str())
                .copied()
                .ok_or_else(|| Error::InvalidInput(format!("unknown class label {label:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let predicted = predict(models, test)?;
    let k = models.len();
    let mut counts = DMatrix::zeros(k, k);
    for (t, p) in truth.into_iter().zip(predicted) {
        counts[(t, p)] += 1;
    }
    Ok(Confusion {
        labels: models.iter().map(|m| m.label.clone()).collect(),
        counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randmat::{random_spd, sample_matrix_normal_with, Seed};

    fn dataset(dims: Dims, classes: &[(&str, DVector<f64>, Covariance, usize)], seed: u64) -> LabeledDataset {
        let mut rng = Seed(seed).rng();
        let mut d = LabeledDataset::new(dims);
        for (label, mu, sigma, n) in classes {
            for y in sample_matrix_normal_with(&mut rng, sigma, dims, *n).unwrap() {
                d.push(*label, y + mu).unwrap();
            }
        }
        d
    }

    #[test]
    fn mle_model_is_sample_covariance() {
        let dims = Dims::new(2, 2).unwrap();
        let mu = DVector::from_vec(vec![1.0, -1.0, 0.5, 2.0]);
        let data = dataset(dims, &[("a", mu, random_spd(&mut Seed(1).rng(), 4), 30)], 41);
        let models = fit_class_models(&data, Estimator::Mle, &KcdOptions::default()).unwrap();
        let ys: Vec<&DVector<f64>> = data.samples().iter().map(|(_, y)| y).collect();
        let n = ys.len() as f64;
        let mean = ys.iter().fold(DVector::zeros(4), |a, y| a + *y) / n;
        let mut s = DMatrix::zeros(4, 4);
        for y in &ys {
            let r = *y - &mean;
            s += &r * r.transpose();
        }
        s /= n;
        assert!((&models[0].mean - mean).amax() < 1e-12);
        assert!((models[0].cov.matrix() - s).amax() < 1e-12);
        assert!((models[0].logdet - models[0].cov.logdet().unwrap()).abs() < 1e-8);
    }

    #[test]
    fn kmle_model_is_kronecker_of_sample_factors() {
        let dims = Dims::new(2, 3).unwrap();
        let data = dataset(dims, &[("a", DVector::zeros(6), Covariance::identity(6), 40)], 42);
        let opts = KcdOptions::default();
        let models = fit_class_models(&data, Estimator::Kmle, &opts).unwrap();
        let mle = fit_class_models(&data, Estimator::Mle, &opts).unwrap();
        let kc = crate::kroncore::kronecker_cov(&mle[0].cov, dims, &opts).unwrap();
        assert_eq!(models[0].cov, kc.k.kron());
    }

    #[test]
    fn cse_on_separable_data_shrinks_hard() {
        let dims = Dims::new(3, 3).unwrap();
        let mut rng = Seed(43).rng();
        let s1 = random_spd(&mut rng, 3);
        let s2 = random_spd(&mut rng, 3);
        let sigma = Covariance::new(crate::spdlinalg::kron(s2.matrix(), s1.matrix())).unwrap();
        let data = dataset(dims, &[("a", DVector::zeros(9), sigma, 60)], 44);
        let models = fit_class_models(&data, Estimator::Cse, &KcdOptions::default()).unwrap();
        let w = models[0].w_hat.unwrap();
        assert!(w > 0.8, "w_hat = {w}");
    }

    #[test]
    fn score_examples() {
        let m = ClassModel::new("a", DVector::zeros(2), Covariance::identity(2), Estimator::Mle, None).unwrap();
        assert_eq!(score(&DVector::zeros(2), &m), 0.0);
        let y = DVector::from_vec(vec![3.0, 4.0]);
        assert!((score(&y, &m) - 25.0).abs() < 1e-12);

        let cov = Covariance::from_diagonal(&[1.0, 4.0]).unwrap();
        let m = ClassModel::new("b", DVector::zeros(2), cov, Estimator::Mle, None).unwrap();
        let s = score(&DVector::from_vec(vec![1.0, 2.0]), &m);
        assert!((s - (2.0 + 4f64.ln())).abs() < 1e-12);
        assert!((s - 3.386_294_361_119_890_6).abs() < 1e-12);
    }

    #[test]
    fn confusion_examples() {
        let dims = Dims::new(1, 2).unwrap();
        let far = |x: f64| DVector::from_vec(vec![x, x]);
        let classes = [
            ("a", far(-50.0), Covariance::identity(2), 20),
            ("b", far(0.0), Covariance::identity(2), 20),
            ("c", far(50.0), Covariance::identity(2), 20),
        ];
        let train = dataset(dims, &classes, 45);
        let test = dataset(dims, &classes, 46);
        let models = fit_class_models(&train, Estimator::Mle, &KcdOptions::default()).unwrap();
        let c = confusion(&models, &test).unwrap();
        assert_eq!(c.counts, DMatrix::from_diagonal(&DVector::from_vec(vec![20, 20, 20])));
        assert_eq!(c.accuracy(), 1.0);
        assert_eq!(c.total(), 60);

        let mut one = LabeledDataset::new(dims);
        one.push("b", far(0.1)).unwrap();
        let c = confusion(&models, &one).unwrap();
        assert_eq!(c.counts.iter().filter(|&&v| v > 0).count(), 1);
        assert_eq!(c.per_class_accuracy(), vec![None, Some(1.0), None]);

        let mut unknown = LabeledDataset::new(dims);
        unknown.push("zzz", far(0.0)).unwrap();
        assert!(matches!(confusion(&models, &unknown), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn mle_with_too_few_samples_reports_class() {
        let dims = Dims::new(2, 2).unwrap();
        let data = dataset(dims, &[("tiny", DVector::zeros(4), Covariance::identity(4), 3)], 47);
        let err = fit_class_models(&data, Estimator::Mle, &KcdOptions::default()).unwrap_err();
        match err {
            Error::Class { class, source } => {
                assert_eq!(class, "tiny");
                assert!(source.is_numerical());
            }
            other => panic!("unexpected {other}"),
        }
    }
}
