//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by the simulation and mitigation pipeline.
///
/// `Capacity` and `Regime` mark inputs that are outside what the exact
/// machinery can or should handle; callers that map errors to process exit
/// codes treat them (together with `EmptySector`) as regime/capacity failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("capacity exceeded for {what}: requested {requested}, limit {limit}")]
    Capacity {
        what: &'static str,
        requested: u128,
        limit: u128,
    },

    #[error("no-collision assumption violated: {0}")]
    Regime(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("estimate undefined: no samples in sector k={k}")]
    EmptySector { k: u32 },

    #[error("dependency factor undefined: baseline deviation is zero")]
    UndefinedDependency,

    #[error("dependency factor {value} outside [0, 1]; fall back to plain linear solving")]
    DependencyOutOfRange { value: f64 },

    #[error("degenerate exponential fit: {0}; use linear extrapolation instead")]
    FitDegenerate(String),

    #[error("singular extrapolation system: {0}")]
    SingularSystem(String),

    #[error("cannot normalize: total mitigated mass is zero")]
    CannotNormalize,

    #[error("matrix is not unitary: max deviation {deviation:.3e}")]
    NotUnitary { deviation: f64 },

    #[error("stage {stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Wrap an error with the pipeline stage it occurred in.
    pub fn at_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// True for errors that indicate the requested computation is outside
    /// the supported regime or budget (as opposed to bad arguments or I/O).
    pub fn is_regime_or_capacity(&self) -> bool {
        match self {
            Error::Capacity { .. } | Error::Regime(_) | Error::EmptySector { .. } => true,
            Error::Stage { source, .. } => source.is_regime_or_capacity(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
