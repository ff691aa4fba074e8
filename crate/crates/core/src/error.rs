use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid or inconsistent configuration; `path` is the offending key.
    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("expression error at offset {offset}: {message}")]
    Expression { offset: usize, message: String },

    #[error("degenerate landscape: {0}")]
    DegenerateLandscape(String),

    #[error("history lookup at t={query} is ahead of the current time {now}")]
    HistoryAhead { query: f64, now: f64 },

    #[error("history horizon too short: kernel tail mass {tail_mass:e} beyond the buffer")]
    Horizon { tail_mass: f64 },

    #[error("step rejected: {0}")]
    StepRejected(String),

    #[error("numerical divergence at t={t}: {detail}")]
    Divergence { t: f64, detail: String },

    #[error("root finder did not converge after {iterations} iterations: {detail}")]
    RootFinder { iterations: usize, detail: String },

    #[error("analysis unavailable: {0}")]
    AnalysisUnavailable(String),

    #[error("measure undefined: {0}")]
    MeasureUndefined(String),

    #[error("window [{start}, {end}] is outside the trajectory span [{first}, {last}]")]
    Window {
        start: f64,
        end: f64,
        first: f64,
        last: f64,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("kernel support truncation loses mass {0:e}; widen the support")]
    Truncation(f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Failures of the numerics rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Divergence { .. }
                | Error::StepRejected(_)
                | Error::RootFinder { .. }
                | Error::Horizon { .. }
                | Error::HistoryAhead { .. }
        )
    }

    /// Process exit status of the command line tool for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) | Error::Json(_) => 4,
            e if e.is_numerical() => 3,
            _ => 2,
        }
    }
}
