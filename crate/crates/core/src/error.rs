use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A model was evaluated outside its domain (e.g. `v <= 0` in a `1/v` term).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("system is not stabilizable: {0}")]
    NotStabilizable(String),

    #[error("synthesis failed ({status:?}): {detail}")]
    Synthesis {
        status: crate::synthesis::SdpStatus,
        detail: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("planner: {0}")]
    Planner(String),

    #[error("simulation aborted at t = {t:.3} s: {reason}")]
    SimulationAbort { t: f64, reason: String },

    #[error("empty telemetry")]
    EmptyTelemetry,

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed data: {0}")]
    Parse(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
