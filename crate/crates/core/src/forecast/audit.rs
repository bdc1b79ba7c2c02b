use std::fmt::Write as _;

use serde::Serialize;

use super::{
    expected_duration, format_millions, survival_profile, CovariateProfile, ForecastError,
    SurvivalForm,
};
use crate::cox::CoxModel;
use crate::panel::PortfolioEntry;

/// Triage scores for one current sponsor.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditRecord {
    pub sponsorship_id: String,
    pub current_tenure: u32,
    pub annual_fee: f64,
    /// `1 - S(k + 1) / S(k)` at tenure `k`.
    pub exit_1y: f64,
    /// `1 - S(k + 2) / S(k)`.
    pub exit_2y: f64,
    pub expected_remaining_years: f64,
    pub expected_remaining_revenue: f64,
    /// More than 5% of the curve remains at the horizon.
    pub truncated: bool,
}

pub fn profiles_from_portfolio(
    entries: &[PortfolioEntry],
) -> Result<Vec<CovariateProfile>, ForecastError> {
    entries
        .iter()
        .map(|e| {
            Ok(
                CovariateProfile::from_covariates(&e.sponsorship_id, e.covariates.clone())
                    .with_fee(e.annual_fee)?
                    .with_tenure(e.current_tenure),
            )
        })
        .collect()
}

/// Scores every sponsor and sorts by two-year exit probability, highest
/// first, ties broken by ascending id.
pub fn portfolio_audit(
    model: &CoxModel,
    portfolio: &[CovariateProfile],
    horizon: u32,
    form: SurvivalForm,
) -> Result<Vec<AuditRecord>, ForecastError> {
    let mut out = portfolio
        .iter()
        .map(|p| {
            let k = p.current_tenure;
            let h = horizon.max(k + 2);
            let curve = survival_profile(model, p, h, form)?;
            let sk = curve.at(k);
            let exit = |d: u32| {
                if sk > 0.0 {
                    (1.0 - curve.at(k + d) / sk).clamp(0.0, 1.0)
                } else {
                    1.0
                }
            };
            let duration = expected_duration(&curve, k, h)?;
            Ok(AuditRecord {
                sponsorship_id: p.sponsorship_id.clone(),
                current_tenure: k,
                annual_fee: p.annual_fee,
                exit_1y: exit(1),
                exit_2y: exit(2),
                expected_remaining_years: duration.remaining,
                expected_remaining_revenue: duration.remaining * p.annual_fee,
                truncated: duration.truncated,
            })
        })
        .collect::<Result<Vec<_>, ForecastError>>()?;
    out.sort_by(|a, b| {
        b.exit_2y
            .total_cmp(&a.exit_2y)
            .then_with(|| a.sponsorship_id.cmp(&b.sponsorship_id))
    });
    Ok(out)
}

pub fn render_audit_text(records: &[AuditRecord]) -> String {
    let id_w = records
        .iter()
        .map(|r| r.sponsorship_id.chars().count())
        .chain(["sponsorship_id".len()])
        .max()
        .unwrap_or(0)
        + 2;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<id_w$}{:>8}{:>10}{:>10}{:>12}{:>14}",
        "sponsorship_id", "tenure", "exit_1y", "exit_2y", "remaining", "revenue_left"
    );
    for r in records {
        let _ = writeln!(
            out,
            "{:<id_w$}{:>8}{:>10.4}{:>10.4}{:>12.2}{:>14}{}",
            r.sponsorship_id,
            r.current_tenure,
            r.exit_1y,
            r.exit_2y,
            r.expected_remaining_years,
            format_millions(r.expected_remaining_revenue),
            if r.truncated { " +" } else { "" }
        );
    }
    if records.iter().any(|r| r.truncated) {
        out.push_str(
            "+ more than 5% survival remains at the horizon; remaining figures are lower bounds\n",
        );
    }
    out
}
