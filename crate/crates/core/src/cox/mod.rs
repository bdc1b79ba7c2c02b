//! Cox proportional hazards fitting on counting-process panels.
//!
//! The partial likelihood is maximised by Newton–Raphson with step halving.
//! Standard errors come from the observed information and from a sandwich
//! estimator that sums score residuals within clusters (sponsorships by
//! default).

mod covariance;
mod fit;
mod likelihood;
mod protocol;
mod report;
mod vif;

use thiserror::Error;

pub use covariance::{clustered_covariance, robust_covariance};
pub use fit::{fit_cox, BaselineStep, CoxModel, FitOptions};
pub use likelihood::{partial_log_likelihood, LikelihoodEval, PartialLikelihood, TiesMethod};
pub use protocol::{
    hierarchical_fit, hierarchical_fit_design, information_criteria, BlockTest, FitReport,
};
pub use report::{
    describe_effect, hazard_ratio_table, render_report_json, render_report_text,
    significance_stars, CoefficientRow,
};
pub use vif::{vif, VifEntry};

use crate::panel::PanelError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoxError {
    #[error("the design has no events; nothing to fit")]
    NoEvents,
    #[error("coefficient vector has length {got}, design has {expected} columns")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("model is not identifiable: {}", match .column {
        Some(c) => format!("column `{c}` has zero variance"),
        None => "information matrix is singular".to_string(),
    })]
    NonIdentifiable { column: Option<String> },
    #[error("coefficient `{column}` diverged past |beta| = {limit} at iteration {iteration} (monotone likelihood)")]
    MonotoneLikelihood {
        column: String,
        limit: f64,
        iteration: usize,
    },
    #[error("Newton-Raphson did not converge in {iterations} iterations")]
    NotConverged { iterations: usize },
    #[error("information matrix is singular")]
    SingularInformation,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Design(#[from] PanelError),
}

impl CoxError {
    pub fn code(&self) -> &'static str {
        match self {
            CoxError::NoEvents => "NoEvents",
            CoxError::DimensionMismatch { .. } => "DimensionMismatch",
            CoxError::NonIdentifiable { .. } => "NonIdentifiable",
            CoxError::MonotoneLikelihood { .. } => "MonotoneLikelihood",
            CoxError::NotConverged { .. } => "NotConverged",
            CoxError::SingularInformation => "SingularInformation",
            CoxError::InvalidInput(_) => "InvalidInput",
            CoxError::Design(e) => e.code(),
        }
    }

    /// True for failures of the numerical method rather than of the input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            CoxError::MonotoneLikelihood { .. }
                | CoxError::NotConverged { .. }
                | CoxError::SingularInformation
        ) || matches!(self, CoxError::NonIdentifiable { column: None })
    }
}
