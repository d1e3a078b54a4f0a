use thiserror::Error;

/// Errors surfaced by the analytic, optimization, simulation, and experiment
/// layers. Config parsing reports line-level diagnostics; everything else
/// names the violated constraint.
#[derive(Debug, Error)]
pub enum Error {
    #[error("rate must be positive, got {0}")]
    NonpositiveRate(f64),

    #[error("unstable queue: arrival rate {lambda} >= service rate {mu}")]
    UnstableQueue { lambda: f64, mu: f64 },

    #[error("invalid chain: {0}")]
    InvalidChain(String),

    #[error("level grids cannot be aligned: merged grid has {0} levels (cap 128)")]
    IncompatibleGrids(usize),

    #[error("position must be >= 1 for this comparison, got {0}")]
    InvalidPosition(usize),

    #[error("quadrature did not converge to {tol:e} (estimated error {err:e})")]
    QuadratureFailure { tol: f64, err: f64 },

    #[error("no feasible grid point: every (mu_i, mu_j) violates stability or bounds")]
    NoFeasiblePoint,

    #[error("finite-difference step underflows the feasible region at mu = {0}")]
    StepUnderflow(f64),

    #[error("config parse error at line {line}: {msg}")]
    ParseError { line: usize, msg: String },

    #[error("invalid config: {0}")]
    ValidationError(String),

    #[error("missing input: {0}")]
    MissingInput(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Process exit code for the CLI: config problems exit 1, runtime
    /// failures exit 2.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ParseError { .. } | Error::ValidationError(_) => 1,
            _ => 2,
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
