use std::fmt;

use sponsorship_survival::cox::CoxError;
use sponsorship_survival::forecast::ForecastError;
use sponsorship_survival::nonparametric::LifeTableError;
use sponsorship_survival::panel::PanelError;
use sponsorship_survival::synth::SynthError;

/// A failure reported as `error[CODE] message` with exit status 1 (bad
/// input) or 2 (numerical failure).
#[derive(Debug)]
pub struct CliError {
    pub code: String,
    pub message: String,
    pub numeric: bool,
}

impl CliError {
    pub fn validation(code: &str, message: impl Into<String>) -> Self {
        Self {
            code: code.to_string(),
            message: message.into(),
            numeric: false,
        }
    }

    pub fn exit_code(&self) -> u8 {
        if self.numeric {
            2
        } else {
            1
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Keep the diagnostic on one line.
        let message = self
            .message
            .split_whitespace()
            .collect::<Vec<_>>()
            .join(" ");
        write!(f, "error[{}] {}", self.code, message)
    }
}

impl From<CoxError> for CliError {
    fn from(e: CoxError) -> Self {
        Self {
            code: e.code().to_string(),
            message: e.to_string(),
            numeric: e.is_numeric(),
        }
    }
}

impl From<PanelError> for CliError {
    fn from(e: PanelError) -> Self {
        Self::validation(e.code(), e.to_string())
    }
}

impl From<LifeTableError> for CliError {
    fn from(e: LifeTableError) -> Self {
        Self::validation(e.code(), e.to_string())
    }
}

impl From<ForecastError> for CliError {
    fn from(e: ForecastError) -> Self {
        match e {
            ForecastError::Cox(c) => c.into(),
            e => Self::validation(e.code(), e.to_string()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::Cox(c) => c.into(),
            e => Self::validation(e.code(), e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::validation("Io", e.to_string())
    }
}
