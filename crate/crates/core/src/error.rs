use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not positive definite (smallest eigenvalue {min_eig:e}, threshold {threshold:e})")]
    NotPositiveDefinite { min_eig: f64, threshold: f64 },

    #[error("separable factor lost positive definiteness at iteration {iteration}")]
    FactorSingular { iteration: usize },

    #[error("argument outside the domain: {0}")]
    Domain(String),

    #[error("symmetric eigensolver did not converge")]
    EigenNoConvergence,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("class {class}: {source}")]
    Class {
        class: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// True for failures of the numerical routines, as opposed to malformed
    /// arguments.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NotPositiveDefinite { .. }
            | Error::FactorSingular { .. }
            | Error::EigenNoConvergence => true,
            Error::Class { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
