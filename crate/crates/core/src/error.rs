use thiserror::Error;

/// Errors produced by the samplers, models and experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix of dimension {dim} is not positive definite after jitter escalation")]
    NotPositiveDefinite { dim: usize },

    #[error("matrix is not symmetric (relative asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("closed-form solution undefined: {0}")]
    Domain(String),

    #[error("model state became non-finite")]
    NonFiniteState,

    #[error("degenerate ensemble: effective sample size {ess:.4}")]
    DegenerateEnsemble { ess: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Attaches the observation step at which a failure happened.
    pub fn at_step(self, step: usize) -> Self {
        match self {
            e @ Error::AtStep { .. } => e,
            e => Error::AtStep {
                step,
                source: Box::new(e),
            },
        }
    }

    /// The step index carried by the error, if any.
    pub fn step(&self) -> Option<usize> {
        match self {
            Error::AtStep { step, .. } => Some(*step),
            _ => None,
        }
    }

    /// Unwraps step context.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtStep { source, .. } => source.root(),
            e => e,
        }
    }

    /// True for failures of the numerics rather than of inputs or I/O.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self.root(),
            Error::NotPositiveDefinite { .. }
                | Error::NotSymmetric { .. }
                | Error::Domain(_)
                | Error::NonFiniteState
                | Error::DegenerateEnsemble { .. }
        )
    }
}

pub(crate) trait StepContext<T> {
    fn at_step(self, step: usize) -> Result<T>;
}

impl<T> StepContext<T> for Result<T> {
    fn at_step(self, step: usize) -> Result<T> {
        self.map_err(|e| e.at_step(step))
    }
}
