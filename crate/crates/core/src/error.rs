use thiserror::Error;

/// Errors raised by model loading and inference routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("observations are impossible under the model at t={t}")]
    ImpossibleData { t: usize },

    #[error("regime {regime} received total responsibility {mass:e} (< 1e-12); re-initialise the model")]
    RegimeStarvation { regime: usize, component: Option<usize>, mass: f64 },

    #[error("no valid regime path: {0}")]
    NoValidPath(String),

    #[error("segment likelihood provider returned NaN for segment [{start}, {end}] in regime {regime}")]
    ProviderNan { start: usize, end: usize, regime: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("exact mixture holds {components} components, above the cap of {cap}; use collapsed mode")]
    MixtureCapExceeded { components: usize, cap: usize },

    #[error("enumeration guard exceeded: {count} configurations (limit {limit})")]
    GuardExceeded { count: u128, limit: u128 },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("generation produced a non-finite sample at t={t}")]
    NonFiniteSample { t: usize },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures caused by the arithmetic rather than by the inputs' structure.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Numerical(_)
                | Error::ImpossibleData { .. }
                | Error::RegimeStarvation { .. }
                | Error::ProviderNan { .. }
                | Error::NonFiniteSample { .. }
                | Error::MixtureCapExceeded { .. }
                | Error::NoValidPath(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
