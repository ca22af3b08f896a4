use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("quadrature did not converge: estimate {estimate:e}, error estimate {error:e}")]
    Quadrature { estimate: f64, error: f64 },
    #[error("singular matrix: pivot {pivot:e} at row {row}")]
    Singular { row: usize, pivot: f64 },
    #[error("ill-conditioned matrix: condition estimate {condition:e}, smallest pivot {pivot:e} at row {row}")]
    IllConditioned { condition: f64, row: usize, pivot: f64 },
    #[error("degenerate kernel: lambda({x}) = {lambda:e} below floor")]
    DegenerateKernel { x: f64, lambda: f64 },
    #[error("no convergence after {iterations} iterations (last increment {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("values leave the invertible range in cells {0:?}")]
    RangeViolation(Vec<usize>),
    #[error("(M3) infeasible: kernel vanishes on every annulus")]
    PoincareInfeasible,
    #[error("incompatible problems: {0}")]
    Incompatible(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error("preset {preset}, parameter {parameter}: {source}")]
    Preset { preset: String, parameter: f64, source: Box<Error> },
}

impl Error {
    /// True for failures of the numerics (as opposed to bad input or I/O).
    pub fn is_numeric(&self) -> bool {
        if let Error::Preset { source, .. } = self {
            return source.is_numeric();
        }
        matches!(
            self,
            Error::Quadrature { .. }
                | Error::Singular { .. }
                | Error::IllConditioned { .. }
                | Error::DegenerateKernel { .. }
                | Error::NoConvergence { .. }
                | Error::NonFinite(_)
                | Error::RangeViolation(_)
                | Error::PoincareInfeasible
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
