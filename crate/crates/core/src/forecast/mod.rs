//! Survival curves, expected durations and revenue for sponsor profiles under
//! a fitted Cox model.

mod audit;
mod profile;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cox::{BaselineStep, CoxError, CoxModel, PartialLikelihood};
use crate::nonparametric::SurvivorCurve;
use crate::panel::DesignMatrix;

pub use audit::{portfolio_audit, profiles_from_portfolio, render_audit_text, AuditRecord};
pub use profile::CovariateProfile;

/// Default forecast horizon in periods.
pub const DEFAULT_HORIZON: u32 = 50;
/// `S(horizon) / S(tenure)` above this marks a duration as truncated.
pub const TRUNCATION_THRESHOLD: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ForecastError {
    #[error("model has no baseline hazard; refit or attach one before forecasting")]
    BaselineMissing,
    #[error("profile has {got} covariate values, model has {expected} columns")]
    ProfileDimensionMismatch { expected: usize, got: usize },
    #[error("profile refers to unknown column `{0}`")]
    UnknownColumn(String),
    #[error("invalid profile: {0}")]
    BadProfile(String),
    #[error("invalid horizon: {0}")]
    BadHorizon(String),
    #[error(transparent)]
    Cox(#[from] CoxError),
}

impl ForecastError {
    pub fn code(&self) -> &'static str {
        match self {
            ForecastError::BaselineMissing => "BaselineMissing",
            ForecastError::ProfileDimensionMismatch { .. } => "ProfileDimensionMismatch",
            ForecastError::UnknownColumn(_) => "UnknownColumn",
            ForecastError::BadProfile(_) => "BadProfile",
            ForecastError::BadHorizon(_) => "BadHorizon",
            ForecastError::Cox(e) => e.code(),
        }
    }
}

/// Breslow estimator of the baseline cumulative hazard: at each event period
/// `t` the increment is `d_t / sum_{risk set} exp(x·beta)`.
pub fn baseline_cumulative_hazard(
    model: &CoxModel,
    x: &DesignMatrix,
) -> Result<Vec<BaselineStep>, CoxError> {
    if model.columns.as_slice() != x.names() {
        return Err(CoxError::DimensionMismatch {
            expected: model.n_params(),
            got: x.n_cols(),
        });
    }
    let lik = PartialLikelihood::new(x, model.ties)?;
    let eta = lik.linear_predictor(model.coefficients.as_slice());
    let mut cumulative = 0.0;
    Ok(lik
        .risk_sets()
        .groups
        .iter()
        .map(|g| {
            let denom: f64 = g.at_risk.iter().map(|&i| eta[i].exp()).sum();
            let increment = g.events.len() as f64 / denom;
            cumulative += increment;
            BaselineStep {
                period: g.time,
                increment,
                cumulative,
            }
        })
        .collect())
}

/// Returns `model` with its baseline hazard estimated on `x`.
pub fn attach_baseline(mut model: CoxModel, x: &DesignMatrix) -> Result<CoxModel, CoxError> {
    model.baseline = baseline_cumulative_hazard(&model, x)?;
    Ok(model)
}

/// How period hazards turn into a survivor curve.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurvivalForm {
    /// `S(t|x) = prod_{s<=t} (1 - dH0(s))^exp(x·beta)`; equals the life table
    /// when `beta = 0`.
    #[default]
    ProductLimit,
    /// `S(t|x) = exp(-sum_{s<=t} dH0(s) exp(x·beta))`.
    Exponential,
}

impl std::fmt::Display for SurvivalForm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SurvivalForm::ProductLimit => "product_limit",
            SurvivalForm::Exponential => "exponential",
        })
    }
}

impl std::str::FromStr for SurvivalForm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "product_limit" | "product" => Ok(SurvivalForm::ProductLimit),
            "exponential" => Ok(SurvivalForm::Exponential),
            other => Err(format!("unknown survival form `{other}`")),
        }
    }
}

/// Survivor curve of `profile` on periods `0..=horizon`.
pub fn survival_profile(
    model: &CoxModel,
    profile: &CovariateProfile,
    horizon: u32,
    form: SurvivalForm,
) -> Result<SurvivorCurve, ForecastError> {
    if horizon == 0 {
        return Err(ForecastError::BadHorizon(
            "horizon must be at least 1".into(),
        ));
    }
    if model.baseline.is_empty() {
        return Err(ForecastError::BaselineMissing);
    }
    let increments: BTreeMap<u32, f64> = model
        .baseline
        .iter()
        .map(|s| (s.period, s.increment))
        .collect();
    let eta = profile.linear_predictors(model, horizon)?;
    let mut values = Vec::with_capacity(horizon as usize + 1);
    values.push(1.0);
    let mut log_s = 0.0;
    for t in 1..=horizon {
        let dh = increments.get(&t).copied().unwrap_or(0.0);
        let risk = eta[t as usize - 1].exp();
        log_s += match form {
            SurvivalForm::ProductLimit => {
                let keep = (1.0 - dh).clamp(0.0, 1.0);
                if keep == 0.0 {
                    f64::NEG_INFINITY
                } else {
                    risk * keep.ln()
                }
            }
            SurvivalForm::Exponential => -dh * risk,
        };
        values.push(log_s.exp());
    }
    SurvivorCurve::from_values(values).map_err(|e| ForecastError::BadProfile(e.to_string()))
}

/// Restricted mean duration up to `horizon`, optionally given survival to
/// `current_tenure`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DurationEstimate {
    /// Expected total years, including the tenure already served.
    pub total: f64,
    pub remaining: f64,
    /// True when more than 5% of the conditional survival mass lies past
    /// the horizon, so the estimate is biased low.
    pub truncated: bool,
}

/// `k + sum_{t=k}^{horizon-1} S(t) / S(k)` for tenure `k`; with `k = 0` this is
/// the plain restricted mean `sum_{t<horizon} S(t)`.
pub fn expected_duration(
    curve: &SurvivorCurve,
    current_tenure: u32,
    horizon: u32,
) -> Result<DurationEstimate, ForecastError> {
    if current_tenure >= horizon {
        return Err(ForecastError::BadHorizon(format!(
            "horizon {horizon} does not extend past the current tenure {current_tenure}"
        )));
    }
    let k = current_tenure;
    let sk = curve.at(k);
    if sk <= 0.0 {
        return Ok(DurationEstimate {
            total: k as f64,
            remaining: 0.0,
            truncated: false,
        });
    }
    let remaining: f64 = (k..horizon).map(|t| curve.at(t) / sk).sum();
    Ok(DurationEstimate {
        total: k as f64 + remaining,
        remaining,
        truncated: curve.at(horizon) / sk > TRUNCATION_THRESHOLD,
    })
}

/// Expected spend: duration times annual fee.
pub fn revenue_forecast(expected_duration: f64, annual_fee: f64) -> f64 {
    expected_duration * annual_fee
}

/// Currency in millions with two decimals, e.g. `"10.96M"`.
pub fn format_millions(amount: f64) -> String {
    format!("{:.2}M", amount / 1e6)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForecastReport {
    pub sponsorship_id: String,
    pub horizon: u32,
    pub survival_form: SurvivalForm,
    pub current_tenure: u32,
    pub survival: Vec<(u32, f64)>,
    /// `S(k + 1) / S(k)` at tenure `k`.
    pub next_period_renewal: f64,
    pub expected_duration: f64,
    pub expected_remaining_duration: f64,
    pub annual_fee: f64,
    pub expected_revenue: f64,
    pub expected_remaining_revenue: f64,
    pub truncated: bool,
}

pub fn forecast(
    model: &CoxModel,
    profile: &CovariateProfile,
    horizon: u32,
    form: SurvivalForm,
) -> Result<ForecastReport, ForecastError> {
    let curve = survival_profile(model, profile, horizon, form)?;
    let k = profile.current_tenure;
    let duration = expected_duration(&curve, k, horizon)?;
    let sk = curve.at(k);
    Ok(ForecastReport {
        sponsorship_id: profile.sponsorship_id.clone(),
        horizon,
        survival_form: form,
        current_tenure: k,
        survival: curve.points().to_vec(),
        next_period_renewal: if sk > 0.0 { curve.at(k + 1) / sk } else { 0.0 },
        expected_duration: duration.total,
        expected_remaining_duration: duration.remaining,
        annual_fee: profile.annual_fee,
        expected_revenue: revenue_forecast(duration.total, profile.annual_fee),
        expected_remaining_revenue: revenue_forecast(duration.remaining, profile.annual_fee),
        truncated: duration.truncated,
    })
}

impl ForecastReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "sponsorship: {}", self.sponsorship_id);
        let _ = writeln!(
            out,
            "horizon: {} periods ({} survival)",
            self.horizon, self.survival_form
        );
        let _ = writeln!(out, "current tenure: {} years", self.current_tenure);
        let _ = writeln!(
            out,
            "next-period renewal probability: {:.4}",
            self.next_period_renewal
        );
        let _ = writeln!(
            out,
            "expected total duration: {:.2} years",
            self.expected_duration
        );
        let _ = writeln!(
            out,
            "expected remaining duration: {:.2} years",
            self.expected_remaining_duration
        );
        let _ = writeln!(out, "annual fee: {}", format_millions(self.annual_fee));
        let _ = writeln!(
            out,
            "expected total revenue: {}",
            format_millions(self.expected_revenue)
        );
        let _ = writeln!(
            out,
            "expected remaining revenue: {}",
            format_millions(self.expected_remaining_revenue)
        );
        if self.truncated {
            let _ = writeln!(
                out,
                "warning: more than 5% survival remains at the horizon; durations are truncated"
            );
        }
        out
    }
}

#[cfg(test)]
mod tests;
