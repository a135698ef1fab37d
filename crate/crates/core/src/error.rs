use thiserror::Error;

/// Failures surfaced by the analysis pipeline.
///
/// Variants split into input problems (bad files, invalid models, caller
/// misuse) and numerical problems (singular systems, unsupported chain
/// structure); see [`Error::is_numerical`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("model is invalid: {0}")]
    InvalidModel(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("parameter {0:?} has no bound value")]
    UnboundParameter(String),

    #[error("parameter {symbol:?} must be positive and finite, got {value}")]
    InvalidParameter { symbol: String, value: f64 },

    #[error("transition {0:?} is not enabled in the given marking")]
    NotEnabled(String),

    #[error("unknown transition {0:?}")]
    UnknownTransition(String),

    #[error("state-count limit of {0} exceeded during reachability exploration")]
    StateLimit(usize),

    #[error("vanishing loop unsupported: immediate transitions cycle through {0}")]
    VanishingLoop(String),

    #[error("transient state {0} has zero total outgoing rate")]
    ZeroRate(String),

    #[error("no absorption: state {0} cannot reach an absorbing state")]
    NoAbsorption(String),

    #[error("steady state meaningless: chain has absorbing state {0}")]
    SteadyStateMeaningless(String),

    #[error("singular linear system ({0})")]
    Singular(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("log format: {0}")]
    LogFormat(String),

    #[error("cannot estimate rate for {0}: no enabled time observed")]
    NoExposure(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl Error {
    /// True for failures of the numerical machinery rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::VanishingLoop(_)
                | Error::ZeroRate(_)
                | Error::NoAbsorption(_)
                | Error::SteadyStateMeaningless(_)
                | Error::Singular(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
