use std::path::PathBuf;

/// Errors raised by the authentication lab.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    /// `|sin θ_i + λ·gradient/(2π n₁)| > 1`: no propagating reflected ray.
    #[error("evanescent reflection: arcsine argument {argument} lies outside [-1, 1]")]
    Evanescent { argument: f64 },

    #[error("length mismatch: expected {expected} elements, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("phase is undefined for a zero-magnitude value")]
    UndefinedPhase,

    #[error("incompatible trial plan: {0}")]
    IncompatiblePlan(String),

    #[error("no feasible grid point: all {0} gradients give evanescent reflections")]
    NoFeasiblePoint(usize),

    #[error("exhaustive search refused: {required} candidates exceed the limit of {limit}")]
    ExhaustiveTooLarge { required: u128, limit: u128 },

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
