//! The `kcd` command line: decomposition, shrinkage estimation, simulation
//! and QDA over plain CSV/JSON files.
//!
//! Exit codes: 0 success, 2 input error (flags, malformed or inconsistent
//! files), 3 numerical failure.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::ebshrink::{cse, sample_covariance};
use crate::io::{format_float, matrix_to_csv, read_dataset_csv, read_matrix_csv, read_samples_csv, write_matrix_csv};
use crate::kroncore::{kcd, KcdOptions, SqrtKind};
use crate::qda::{confusion, fit_class_models, predict, ClassModel, Estimator};
use crate::randmat::Seed;
use crate::simharness::{run_study, summarize, write_records_csv, write_summary_csv, SimConfig};
use crate::spdlinalg::{Covariance, Dims};
use crate::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "kcd", version, about = "Kronecker-core decomposition and core shrinkage estimation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decompose a covariance matrix into Kronecker and core parts.
    Kcd(KcdArgs),
    /// Core shrinkage estimate from a file of samples.
    Cse(CseArgs),
    /// Monte Carlo comparison of MLE, KMLE, CSE and oracle Bayes.
    Simulate(SimulateArgs),
    /// Fit per-class QDA models.
    QdaTrain(QdaTrainArgs),
    /// Classify a labeled test set with fitted QDA models.
    QdaPredict(QdaPredictArgs),
}

#[derive(Debug, Args)]
pub struct DimArgs {
    #[arg(long)]
    pub p1: usize,
    #[arg(long)]
    pub p2: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SqrtArg {
    Symmetric,
    Cholesky,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long = "max-iter", default_value_t = 1000)]
    pub max_iter: usize,
    #[arg(long, value_enum, default_value = "symmetric")]
    pub sqrt: SqrtArg,
}

impl SolverArgs {
    fn options(&self) -> Result<KcdOptions, Error> {
        let opts = KcdOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            sqrt_kind: match self.sqrt {
                SqrtArg::Symmetric => SqrtKind::Symmetric,
                SqrtArg::Cholesky => SqrtKind::Cholesky,
            },
        };
        opts.validate()?;
        Ok(opts)
    }
}

#[derive(Debug, Args)]
pub struct KcdArgs {
    /// Headerless CSV holding a p x p covariance matrix.
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub dims: DimArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Output directory for K.csv, C.csv, H.csv and summary.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CseArgs {
    /// Headerless CSV, one vec(Y) sample per row.
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub dims: DimArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Output directory for sigma_hat.csv, k_hat.csv and summary.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub dims: DimArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Comma-separated prior degrees of freedom; `inf` for the separable scenario.
    #[arg(long, value_delimiter = ',', required = true)]
    pub nu: Vec<String>,
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',', required = true)]
    pub n: Vec<usize>,
    #[arg(long, default_value_t = 50)]
    pub reps: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Per-replicate records CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional per-scenario summary CSV.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct QdaTrainArgs {
    /// Training CSV with header label,v1,...,vp.
    #[arg(long)]
    pub train: PathBuf,
    #[command(flatten)]
    pub dims: DimArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, value_parser = ["mle", "kmle", "cse"], default_value = "cse")]
    pub estimator: String,
    /// Output JSON model file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct QdaPredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Test CSV with header label,v1,...,vp.
    #[arg(long)]
    pub test: PathBuf,
    /// Output directory for predictions.csv, confusion.csv and summary.json.
    #[arg(long)]
    pub out: PathBuf,
}

/// Model file written by `qda-train`.
#[derive(Debug, Serialize, Deserialize)]
pub struct ModelFile {
    pub p1: usize,
    pub p2: usize,
    pub estimator: Estimator,
    pub classes: Vec<ClassRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ClassRecord {
    pub label: String,
    pub mean: Vec<f64>,
    /// Row-major covariance rows.
    pub cov: Vec<Vec<f64>>,
    pub logdet: f64,
    pub w_hat: Option<f64>,
}

impl ModelFile {
    pub fn from_models(dims: Dims, estimator: Estimator, models: &[ClassModel]) -> Self {
        ModelFile {
            p1: dims.p1(),
            p2: dims.p2(),
            estimator,
            classes: models
                .iter()
                .map(|m| ClassRecord {
                    label: m.label.clone(),
                    mean: m.mean.iter().copied().collect(),
                    cov: m.cov.matrix().row_iter().map(|r| r.iter().copied().collect()).collect(),
                    logdet: m.logdet,
                    w_hat: m.w_hat,
                })
                .collect(),
        }
    }

    pub fn dims(&self) -> Result<Dims, Error> {
        Dims::new(self.p1, self.p2)
    }

    pub fn into_models(self) -> Result<Vec<ClassModel>, Error> {
        let p = self.dims()?.p();
        self.classes
            .into_iter()
            .map(|c| {
                if c.mean.len() != p || c.cov.len() != p || c.cov.iter().any(|r| r.len() != p) {
                    return Err(Error::DimensionMismatch(format!("class {} has wrong dimensions", c.label)));
                }
                let cov = Covariance::new(DMatrix::from_row_iterator(p, p, c.cov.into_iter().flatten()))?;
                ClassModel::new(c.label, DVector::from_vec(c.mean), cov, self.estimator, c.w_hat)
            })
            .collect()
    }
}

/// Parses `args` (including the program name) and runs the subcommand,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_INPUT
    }
}

pub fn execute(command: &Command) -> Result<(), Error> {
    match command {
        Command::Kcd(a) => cmd_kcd(a),
        Command::Cse(a) => cmd_cse(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::QdaTrain(a) => cmd_qda_train(a),
        Command::QdaPredict(a) => cmd_qda_predict(a),
    }
}

fn dims_of(d: &DimArgs) -> Result<Dims, Error> {
    Dims::new(d.p1, d.p2)
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::InvalidInput(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

/// JSON value for a possibly infinite float (`"inf"` when infinite).
fn json_float(x: f64) -> serde_json::Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!(format_float(x))
    }
}

pub fn cmd_kcd(a: &KcdArgs) -> Result<(), Error> {
    let dims = dims_of(&a.dims)?;
    let opts = a.solver.options()?;
    let m = read_matrix_csv(&a.input)?;
    dims.check_square(&m, "input matrix")?;
    let sigma = Covariance::new(m)?;
    let res = kcd(&sigma, dims, &opts)?;

    fs::create_dir_all(&a.out)?;
    write_matrix_csv(&a.out.join("K.csv"), res.k_factor.kron().matrix())?;
    write_matrix_csv(&a.out.join("C.csv"), res.core.matrix())?;
    write_matrix_csv(&a.out.join("H.csv"), &res.h.matrix())?;
    write_matrix_csv(&a.out.join("sigma1.csv"), res.k_factor.sigma1().matrix())?;
    write_matrix_csv(&a.out.join("sigma2.csv"), res.k_factor.sigma2().matrix())?;
    write_json(
        &a.out.join("summary.json"),
        &json!({
            "p1": dims.p1(),
            "p2": dims.p2(),
            "sqrt": format!("{:?}", opts.sqrt_kind).to_lowercase(),
            "iterations": res.iterations,
            "converged": res.converged,
            "divergence_value": res.divergence_value,
            "trace_core": res.core.trace(),
        }),
    )
}

pub fn cmd_cse(a: &CseArgs) -> Result<(), Error> {
    let dims = dims_of(&a.dims)?;
    let opts = a.solver.options()?;
    let samples = read_samples_csv(&a.input, dims)?;
    let s = sample_covariance(&samples, dims.p())?;
    let res = cse(&s, samples.len(), dims, &opts)?;

    fs::create_dir_all(&a.out)?;
    write_matrix_csv(&a.out.join("sigma_hat.csv"), res.estimate.matrix())?;
    write_matrix_csv(&a.out.join("k_hat.csv"), res.k_hat.kron().matrix())?;
    write_json(
        &a.out.join("summary.json"),
        &json!({
            "n": samples.len(),
            "p1": dims.p1(),
            "p2": dims.p2(),
            "w_hat": res.fit.w_hat,
            "nu_hat": json_float(res.fit.nu_hat),
            "converged": res.converged,
            "iterations": res.iterations,
        }),
    )
}

pub fn parse_nu_list(items: &[String]) -> Result<Vec<f64>, Error> {
    items.iter().map(|s| crate::io::parse_float(s, 0)).collect()
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<(), Error> {
    let config = SimConfig {
        dims: dims_of(&a.dims)?,
        nu_list: parse_nu_list(&a.nu)?,
        n_list: a.n.clone(),
        reps: a.reps,
        seed: Seed(a.seed),
        kcd: a.solver.options()?,
        threads: None,
    };
    let records = run_study(&config)?;
    let mut buf = Vec::new();
    write_records_csv(&mut buf, &records)?;
    fs::write(&a.out, buf)?;
    if let Some(path) = &a.summary {
        let mut buf = Vec::new();
        write_summary_csv(&mut buf, &summarize(&records)?)?;
        fs::write(path, buf)?;
    }
    Ok(())
}

pub fn cmd_qda_train(a: &QdaTrainArgs) -> Result<(), Error> {
    let dims = dims_of(&a.dims)?;
    let opts = a.solver.options()?;
    let estimator: Estimator = a.estimator.parse()?;
    let train = read_dataset_csv(&a.train, dims)?;
    let models = fit_class_models(&train, estimator, &opts)?;
    let file = ModelFile::from_models(dims, estimator, &models);
    let text = serde_json::to_string_pretty(&file).map_err(|e| Error::InvalidInput(e.to_string()))?;
    fs::write(&a.out, text + "\n")?;
    Ok(())
}

pub fn read_model_file(path: &Path) -> Result<(Dims, Vec<ClassModel>), Error> {
    let text = fs::read_to_string(path)?;
    let file: ModelFile =
        serde_json::from_str(&text).map_err(|e| Error::Parse { line: e.line(), message: e.to_string() })?;
    let dims = file.dims()?;
    Ok((dims, file.into_models()?))
}

pub fn cmd_qda_predict(a: &QdaPredictArgs) -> Result<(), Error> {
    let (dims, models) = read_model_file(&a.model)?;
    let test = read_dataset_csv(&a.test, dims)?;
    let conf = confusion(&models, &test)?;
    let predicted = predict(&models, &test)?;

    fs::create_dir_all(&a.out)?;
    let mut pred = String::from("index,label,predicted\n");
    for (i, ((label, _), k)) in test.samples().iter().zip(&predicted).enumerate() {
        pred.push_str(&format!("{i},{label},{}\n", models[*k].label));
    }
    fs::write(a.out.join("predictions.csv"), pred)?;

    let mut table = String::from("label");
    for l in &conf.labels {
        table.push(',');
        table.push_str(l);
    }
    table.push('\n');
    for (i, l) in conf.labels.iter().enumerate() {
        table.push_str(l);
        for j in 0..conf.labels.len() {
            table.push_str(&format!(",{}", conf.counts[(i, j)]));
        }
        table.push('\n');
    }
    fs::write(a.out.join("confusion.csv"), table)?;

    let per_class: serde_json::Map<String, serde_json::Value> = conf
        .labels
        .iter()
        .zip(conf.per_class_accuracy())
        .map(|(l, acc)| (l.clone(), acc.map(|v| json!(v)).unwrap_or(serde_json::Value::Null)))
        .collect();
    write_json(
        &a.out.join("summary.json"),
        &json!({
            "n_test": conf.total(),
            "accuracy": conf.accuracy(),
            "per_class_accuracy": per_class,
        }),
    )
}

/// Renders a matrix exactly as the CLI writes it.
pub fn render_matrix(m: &DMatrix<f64>) -> String {
    matrix_to_csv(m)
}
