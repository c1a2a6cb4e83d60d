use thiserror::Error;

/// Errors raised anywhere in the inverse-scattering pipeline.
///
/// The variants map onto the CLI exit-code classes: validation problems,
/// numerical gate failures and exceptional energies.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("threshold energy: lambda = {0} is an integer (critical value of the symbol)")]
    ThresholdEnergy(f64),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("missing value at lattice point {0:?}")]
    MissingValue(Vec<i64>),

    #[error("singular point: gradient of the symbol vanishes at {0:?}")]
    SingularPoint(Vec<f64>),

    #[error("no convergence in {what}: {detail}")]
    NoConvergence { what: String, detail: String },

    #[error("Dirichlet eigenvalue: interior block is singular (condition number {cond:.3e})")]
    DirichletEigenvalue { cond: f64 },

    #[error("exceptional energy in {what}: matrix is numerically singular (condition number {cond:.3e})")]
    ExceptionalEnergy { what: String, cond: f64 },

    #[error("rank deficiency in {what}: sigma_min/sigma_max = {ratio:.3e}")]
    RankDeficient { what: String, ratio: f64 },

    #[error("index semantics mismatch: {0}")]
    IndexMismatch(String),

    #[error("sweep failed at level {level}, section {section:?}: {detail}")]
    Sweep {
        level: i64,
        section: Vec<i64>,
        detail: String,
    },

    #[error("gate failed: {0}")]
    Gate(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
