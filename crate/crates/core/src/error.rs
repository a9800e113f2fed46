use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate level-set gradient |∇φ| = {norm:e} at {point:?}")]
    DegenerateGradient { point: [f64; 3], norm: f64 },

    #[error("closest-point projection of {point:?} did not converge (residual {residual:e})")]
    NoConvergence { point: [f64; 3], residual: f64 },

    #[error("mesh node projection failed: {0}")]
    ProjectionFailure(Box<Error>),

    #[error("singular element metric on element {element} (det g = {det:e})")]
    SingularMetric { element: usize, det: f64 },

    #[error("finite element spaces do not share a mesh or have the wrong arity: {0}")]
    SpaceMismatch(String),

    #[error("sparse factorization failed: {0}")]
    SingularSystem(String),

    #[error("GMRES did not converge after {iterations} iterations (relative residual {residual:e})")]
    SolverNoConvergence { iterations: usize, residual: f64 },

    #[error("problem has no exact solution to compare against")]
    MissingExactSolution,

    #[error("at least two refinement levels are needed for a rate, got {0}")]
    InsufficientLevels(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("level {level}: {source}")]
    AtLevel {
        level: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn at_level(self, level: usize) -> Self {
        Error::AtLevel { level, source: Box::new(self) }
    }

    /// Innermost error with level context stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtLevel { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
