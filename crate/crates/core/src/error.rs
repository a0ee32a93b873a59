use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid scenario or parameter choice.
    #[error("configuration error: {0}")]
    Config(String),

    /// A caller broke a documented precondition (dimension mismatch and the like).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Communication topology is unusable for the requested operation.
    #[error("topology error: {0}")]
    Topology(String),

    #[error("guarded domain: {0}")]
    Domain(String),

    #[error("analysis error: {0}")]
    Analysis(String),

    /// The integrator produced a non-finite value.
    #[error("numeric failure at tick {tick} (t = {time}) for robot {robot}: {what}")]
    Numeric {
        tick: usize,
        time: f64,
        robot: usize,
        what: String,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("config parse error: {0}")]
    TomlDe(#[from] toml::de::Error),

    #[error("config serialize error: {0}")]
    TomlSer(#[from] toml::ser::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}
