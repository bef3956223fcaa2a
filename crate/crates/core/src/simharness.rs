//! Monte Carlo comparison of covariance estimators.
//!
//! For every `(ν, n, rep)` a true `Σ` is drawn from the inverse-Wishart
//! prior with identity mean (`ν = ∞` means `Σ = I`), `n` matrix-normal
//! samples are drawn, and four estimators are scored by squared Frobenius
//! loss: the sample covariance (MLE), its separable fit (KMLE), the core
//! shrinkage estimator (CSE) and the posterior mean under the true prior
//! (OBAYES).

use std::cmp::Ordering;
use std::fmt;
use std::io::Write;

use rayon::prelude::*;

use crate::ebshrink::{assemble, cse, sample_covariance, weight_from_nu};
use crate::io::format_float;
use crate::kroncore::KcdOptions;
use crate::randmat::{sample_matrix_normal_with, sample_prior_sigma_with, ScenarioPrior, Seed};
use crate::spdlinalg::{frobenius_dist_sq, Covariance, Dims};
use crate::{Error, Result};

/// Environment variable capping the worker threads of a study.
pub const THREADS_ENV: &str = "KCD_THREADS";

pub const RECORD_HEADER: &str = "p1,p2,nu,n,rep,estimator,loss,w_hat,w_true,converged";
pub const SUMMARY_HEADER: &str = "p1,p2,nu,n,estimator,count,failures,mean_log_loss,mean_loss,mean_w_hat,mean_w_true";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EstimatorTag {
    Mle,
    Kmle,
    Cse,
    Obayes,
}

impl EstimatorTag {
    pub const ALL: [EstimatorTag; 4] = [EstimatorTag::Mle, EstimatorTag::Kmle, EstimatorTag::Cse, EstimatorTag::Obayes];

    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorTag::Mle => "MLE",
            EstimatorTag::Kmle => "KMLE",
            EstimatorTag::Cse => "CSE",
            EstimatorTag::Obayes => "OBAYES",
        }
    }
}

impl fmt::Display for EstimatorTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug)]
pub struct SimConfig {
    pub dims: Dims,
    /// Prior degrees of freedom per scenario; `f64::INFINITY` for `Σ = I`.
    pub nu_list: Vec<f64>,
    pub n_list: Vec<usize>,
    pub reps: usize,
    pub seed: Seed,
    pub kcd: KcdOptions,
    /// Worker cap; falls back to `KCD_THREADS`, then to rayon's default.
    pub threads: Option<usize>,
}

impl SimConfig {
    /// `(p1, p2) = (5, 7)`, 50 replicates, `n ∈ {7, 18, 35, 52}` and
    /// `ν ∈ {p+2, 2p, 3p+1, ∞}`.
    pub fn desk_scale(seed: Seed) -> Self {
        let dims = Dims::new(5, 7).expect("positive dims");
        let p = dims.p() as f64;
        SimConfig {
            dims,
            nu_list: vec![p + 2.0, 2.0 * p, 3.0 * p + 1.0, f64::INFINITY],
            n_list: vec![7, 18, 35, 52],
            reps: 50,
            seed,
            kcd: KcdOptions::default(),
            threads: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::InvalidInput("reps must be at least 1".into()));
        }
        if self.nu_list.is_empty() || self.n_list.is_empty() {
            return Err(Error::InvalidInput("nu and n lists must be nonempty".into()));
        }
        if let Some(n) = self.n_list.iter().find(|&&n| n == 0) {
            return Err(Error::InvalidInput(format!("sample size {n} must be at least 1")));
        }
        let p = self.dims.p() as f64;
        if let Some(nu) = self.nu_list.iter().find(|&&nu| nu.is_nan() || nu <= p + 1.0) {
            return Err(Error::Domain(format!("nu = {nu} must exceed p+1 = {}", p + 1.0)));
        }
        self.kcd.validate()
    }
}

/// One estimator's outcome on one replicate.
#[derive(Clone, Debug, PartialEq)]
pub struct SimRecord {
    pub p1: usize,
    pub p2: usize,
    pub nu: f64,
    pub n: usize,
    pub rep: usize,
    pub estimator: EstimatorTag,
    /// Squared Frobenius loss; NaN when the estimator failed.
    pub loss: f64,
    pub w_hat: Option<f64>,
    pub w_true: Option<f64>,
    pub converged: bool,
}

impl SimRecord {
    pub fn to_csv_line(&self) -> String {
        let opt = |v: Option<f64>| v.map(format_float).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.p1,
            self.p2,
            format_float(self.nu),
            self.n,
            self.rep,
            self.estimator,
            format_float(self.loss),
            opt(self.w_hat),
            opt(self.w_true),
            self.converged
        )
    }

    fn sort_key_cmp(&self, other: &Self) -> Ordering {
        self.nu
            .total_cmp(&other.nu)
            .then(self.n.cmp(&other.n))
            .then(self.rep.cmp(&other.rep))
            .then(self.estimator.cmp(&other.estimator))
    }
}

/// Squared Frobenius error `Σ_ij (est − truth)²_ij`.
pub fn loss_sq(est: &Covariance, truth: &Covariance) -> Result<f64> {
    if est.dim() != truth.dim() {
        return Err(Error::DimensionMismatch(format!(
            "estimate is {0}x{0}, truth is {1}x{1}",
            est.dim(),
            truth.dim()
        )));
    }
    Ok(frobenius_dist_sq(est.matrix(), truth.matrix()))
}

/// Seed of replicate `rep` of scenario `(nu_idx, n_idx)`.
pub fn replicate_seed(seed: Seed, nu_idx: usize, n_idx: usize, rep: usize) -> Seed {
    seed.derive(nu_idx as u64).derive(n_idx as u64).derive(rep as u64)
}

/// Runs every scenario and replicate; records are sorted by
/// `(nu, n, rep, estimator)`.
pub fn run_study(config: &SimConfig) -> Result<Vec<SimRecord>> {
    config.validate()?;
    let tasks: Vec<(usize, usize, usize)> = (0..config.nu_list.len())
        .flat_map(|a| (0..config.n_list.len()).flat_map(move |b| (0..config.reps).map(move |r| (a, b, r))))
        .collect();

    let work = || -> Result<Vec<Vec<SimRecord>>> {
        tasks
            .par_iter()
            .map(|&(a, b, r)| run_replicate(config, a, b, r))
            .collect()
    };
    let threads = config.threads.or_else(|| {
        std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&t| t > 0)
    });
    let nested = match threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?
            .install(work)?,
        None => work()?,
    };

    let mut records: Vec<SimRecord> = nested.into_iter().flatten().collect();
    records.sort_by(SimRecord::sort_key_cmp);
    Ok(records)
}

fn run_replicate(config: &SimConfig, nu_idx: usize, n_idx: usize, rep: usize) -> Result<Vec<SimRecord>> {
    let dims = config.dims;
    let p = dims.p();
    let nu = config.nu_list[nu_idx];
    let n = config.n_list[n_idx];
    let mut rng = replicate_seed(config.seed, nu_idx, n_idx, rep).rng();

    let prior = ScenarioPrior::identity(dims, nu)?;
    let sigma = sample_prior_sigma_with(&mut rng, &prior)?;
    let ys = sample_matrix_normal_with(&mut rng, &sigma, dims, n)?;
    let s = sample_covariance(&ys, p)?;
    let w_true = weight_from_nu(nu, n, p);

    let record = |estimator, loss, w_hat, w_true, converged| SimRecord {
        p1: dims.p1(),
        p2: dims.p2(),
        nu,
        n,
        rep,
        estimator,
        loss,
        w_hat,
        w_true,
        converged,
    };

    let mut out = Vec::with_capacity(4);
    out.push(record(EstimatorTag::Mle, loss_sq(&s, &sigma)?, None, None, true));
    match cse(&s, n, dims, &config.kcd) {
        Ok(res) => {
            out.push(record(EstimatorTag::Kmle, loss_sq(&res.k_hat.kron(), &sigma)?, None, None, res.converged));
            out.push(record(
                EstimatorTag::Cse,
                loss_sq(&res.estimate, &sigma)?,
                Some(res.fit.w_hat),
                Some(w_true),
                res.converged,
            ));
        }
        Err(e) if e.is_numerical() => {
            out.push(record(EstimatorTag::Kmle, f64::NAN, None, None, false));
            out.push(record(EstimatorTag::Cse, f64::NAN, None, Some(w_true), false));
        }
        Err(e) => return Err(e),
    }
    let obayes = assemble(&s, &prior.mean(), w_true)?;
    out.push(record(EstimatorTag::Obayes, loss_sq(&obayes, &sigma)?, None, Some(w_true), true));
    Ok(out)
}

/// Per `(nu, n, estimator)` averages over replicates. Failed replicates
/// (non-finite loss) are counted in `failures` and excluded from the means.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub p1: usize,
    pub p2: usize,
    pub nu: f64,
    pub n: usize,
    pub estimator: EstimatorTag,
    pub count: usize,
    pub failures: usize,
    pub mean_log_loss: f64,
    pub mean_loss: f64,
    pub mean_w_hat: Option<f64>,
    pub mean_w_true: Option<f64>,
}

impl SummaryRow {
    pub fn to_csv_line(&self) -> String {
        let opt = |v: Option<f64>| v.map(format_float).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.p1,
            self.p2,
            format_float(self.nu),
            self.n,
            self.estimator,
            self.count,
            self.failures,
            format_float(self.mean_log_loss),
            format_float(self.mean_loss),
            opt(self.mean_w_hat),
            opt(self.mean_w_true)
        )
    }
}

pub fn summarize(records: &[SimRecord]) -> Result<Vec<SummaryRow>> {
    if records.is_empty() {
        return Err(Error::InvalidInput("no records to summarize".into()));
    }
    let mut sorted: Vec<&SimRecord> = records.iter().collect();
    sorted.sort_by(|a, b| {
        a.nu.total_cmp(&b.nu)
            .then(a.n.cmp(&b.n))
            .then(a.estimator.cmp(&b.estimator))
            .then(a.rep.cmp(&b.rep))
    });

    let mut rows = Vec::new();
    let mut start = 0;
    while start < sorted.len() {
        let head = sorted[start];
        let end = start
            + sorted[start..]
                .iter()
                .take_while(|r| r.nu.total_cmp(&head.nu).is_eq() && r.n == head.n && r.estimator == head.estimator)
                .count();
        let group = &sorted[start..end];
        let ok: Vec<&&SimRecord> = group.iter().filter(|r| r.loss.is_finite()).collect();
        let mean = |xs: &mut dyn Iterator<Item = f64>| {
            let (sum, count) = xs.fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
            (count > 0).then(|| sum / count as f64)
        };
        rows.push(SummaryRow {
            p1: head.p1,
            p2: head.p2,
            nu: head.nu,
            n: head.n,
            estimator: head.estimator,
            count: ok.len(),
            failures: group.len() - ok.len(),
            mean_log_loss: mean(&mut ok.iter().map(|r| r.loss.ln())).unwrap_or(f64::NAN),
            mean_loss: mean(&mut ok.iter().map(|r| r.loss)).unwrap_or(f64::NAN),
            mean_w_hat: mean(&mut ok.iter().filter_map(|r| r.w_hat)),
            mean_w_true: mean(&mut group.iter().filter_map(|r| r.w_true)),
        });
        start = end;
    }
    Ok(rows)
}

pub fn write_records_csv<W: Write>(mut out: W, records: &[SimRecord]) -> std::io::Result<()> {
    writeln!(out, "{RECORD_HEADER}")?;
    for r in records {
        writeln!(out, "{}", r.to_csv_line())?;
    }
    Ok(())
}

pub fn write_summary_csv<W: Write>(mut out: W, rows: &[SummaryRow]) -> std::io::Result<()> {
    writeln!(out, "{SUMMARY_HEADER}")?;
    for r in rows {
        writeln!(out, "{}", r.to_csv_line())?;
    }
    Ok(())
}
