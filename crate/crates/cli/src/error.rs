use nvphot::ensemble_sim::SimError;
use nvphot::sizing::SizingError;
use nvphot::spectra::SpectrumError;
use nvphot::{OpticsError, RateError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, unreadable or malformed files, invalid parameters.
    #[error("{0}")]
    Input(String),
    /// The computation itself failed (no convergence, singular model).
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        Self::Input(msg.into())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Input(_) => 2,
            Self::Numerical(_) => 3,
        }
    }
}

impl From<OpticsError> for CliError {
    fn from(e: OpticsError) -> Self {
        Self::Input(e.to_string())
    }
}

impl From<RateError> for CliError {
    fn from(e: RateError) -> Self {
        match e {
            RateError::SingularShelving | RateError::UndefinedRatio => Self::Numerical(e.to_string()),
            _ => Self::Input(e.to_string()),
        }
    }
}

impl From<SpectrumError> for CliError {
    fn from(e: SpectrumError) -> Self {
        Self::Input(e.to_string())
    }
}

impl From<SizingError> for CliError {
    fn from(e: SizingError) -> Self {
        match e {
            SizingError::NoFittedCrystals | SizingError::Fit { .. } => Self::Numerical(e.to_string()),
            _ => Self::Input(e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Rate(r) => r.into(),
            _ => Self::Input(e.to_string()),
        }
    }
}
