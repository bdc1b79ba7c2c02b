use std::collections::BTreeMap;

use serde::Deserialize;

use super::ForecastError;
use crate::cox::CoxModel;
use crate::panel::{ColumnSpec, Covariates};

/// Names a sponsor profile may carry a per-period path for.
const SPONSOR_PATHS: [&str; 3] = ["gdp_growth", "cpi_inflation", "clutter"];

#[derive(Debug, Clone, PartialEq)]
enum Source {
    /// One value per model column, in model order.
    Values(Vec<f64>),
    /// A sponsor description, expanded through the model's column names.
    Sponsor(Covariates),
}

/// A sponsor to forecast: covariate values, fee, and years already served.
///
/// Time-varying inputs are flat unless a path is given; a path's value at
/// period `t` is `path[t - 1]`, with the last entry repeated past its end.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateProfile {
    pub sponsorship_id: String,
    pub annual_fee: f64,
    pub current_tenure: u32,
    source: Source,
    paths: BTreeMap<String, Vec<f64>>,
}

impl CovariateProfile {
    /// Raw design values, one per model column.
    pub fn from_values(id: impl Into<String>, values: Vec<f64>) -> Self {
        Self::new(id.into(), Source::Values(values))
    }

    /// Design values by column name; every model column must be present.
    pub fn from_named(
        id: impl Into<String>,
        model: &CoxModel,
        named: &BTreeMap<String, f64>,
    ) -> Result<Self, ForecastError> {
        if let Some(unknown) = named.keys().find(|k| !model.columns.contains(k)) {
            return Err(ForecastError::UnknownColumn(unknown.clone()));
        }
        if named.len() != model.n_params() {
            return Err(ForecastError::ProfileDimensionMismatch {
                expected: model.n_params(),
                got: named.len(),
            });
        }
        let values = model.columns.iter().map(|c| named[c]).collect();
        Ok(Self::from_values(id, values))
    }

    pub fn from_covariates(id: impl Into<String>, covariates: Covariates) -> Self {
        Self::new(id.into(), Source::Sponsor(covariates))
    }

    fn new(sponsorship_id: String, source: Source) -> Self {
        Self {
            sponsorship_id,
            annual_fee: 0.0,
            current_tenure: 0,
            source,
            paths: BTreeMap::new(),
        }
    }

    pub fn with_fee(mut self, annual_fee: f64) -> Result<Self, ForecastError> {
        if !annual_fee.is_finite() || annual_fee < 0.0 {
            return Err(ForecastError::BadProfile(format!(
                "annual fee {annual_fee} is negative or not finite"
            )));
        }
        self.annual_fee = annual_fee;
        Ok(self)
    }

    pub fn with_tenure(mut self, years: u32) -> Self {
        self.current_tenure = years;
        self
    }

    /// Per-period values for one input. For a sponsor profile the name is
    /// `gdp_growth`, `cpi_inflation` or `clutter`; for a value profile it is a
    /// model column name (checked when the profile is evaluated).
    pub fn with_path(mut self, name: &str, values: Vec<f64>) -> Result<Self, ForecastError> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(ForecastError::BadProfile(format!(
                "path `{name}` must be non-empty and finite"
            )));
        }
        if matches!(self.source, Source::Sponsor(_)) && !SPONSOR_PATHS.contains(&name) {
            return Err(ForecastError::UnknownColumn(name.to_string()));
        }
        self.paths.insert(name.to_string(), values);
        Ok(self)
    }

    /// Linear predictor `x(t)·beta` for periods `1..=horizon`.
    pub fn linear_predictors(
        &self,
        model: &CoxModel,
        horizon: u32,
    ) -> Result<Vec<f64>, ForecastError> {
        let beta = model.coefficients.as_slice();
        let at = |path: &[f64], t: u32| path[(t as usize - 1).min(path.len() - 1)];
        match &self.source {
            Source::Values(values) => {
                if values.len() != beta.len() {
                    return Err(ForecastError::ProfileDimensionMismatch {
                        expected: beta.len(),
                        got: values.len(),
                    });
                }
                let mut overrides = Vec::new();
                for (name, path) in &self.paths {
                    let j = model
                        .columns
                        .iter()
                        .position(|c| c == name)
                        .ok_or_else(|| ForecastError::UnknownColumn(name.clone()))?;
                    overrides.push((j, path));
                }
                Ok((1..=horizon)
                    .map(|t| {
                        let mut x = values.clone();
                        for (j, path) in &overrides {
                            x[*j] = at(path, t);
                        }
                        dot(&x, beta)
                    })
                    .collect())
            }
            Source::Sponsor(base) => {
                let specs = model
                    .columns
                    .iter()
                    .map(|c| {
                        ColumnSpec::parse(c).map_err(|_| ForecastError::UnknownColumn(c.clone()))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Ok((1..=horizon)
                    .map(|t| {
                        let mut c = base.clone();
                        if let Some(p) = self.paths.get("gdp_growth") {
                            c.gdp_growth = at(p, t);
                        }
                        if let Some(p) = self.paths.get("cpi_inflation") {
                            c.cpi_inflation = at(p, t);
                        }
                        if let Some(p) = self.paths.get("clutter") {
                            c.clutter = at(p, t).round().max(1.0) as u32;
                        }
                        let x: Vec<f64> = specs.iter().map(|s| s.evaluate(&c)).collect();
                        dot(&x, beta)
                    })
                    .collect())
            }
        }
    }

    /// Reads a profile document:
    ///
    /// ```json
    /// {"sponsorship_id": "nfl_auto", "annual_fee": 2250000, "current_tenure": 0,
    ///  "sponsor": {"sponsorship_type": "league", "big_four_property": "nfl"},
    ///  "paths": {"gdp_growth": [2.0, 2.5]}}
    /// ```
    ///
    /// `sponsor` may be replaced by `covariates`, a map from model column
    /// name to value.
    pub fn from_json(text: &str, model: &CoxModel) -> Result<Self, ForecastError> {
        let doc: ProfileDoc =
            serde_json::from_str(text).map_err(|e| ForecastError::BadProfile(e.to_string()))?;
        let id = doc.sponsorship_id.unwrap_or_else(|| "profile".to_string());
        let profile = match (doc.sponsor, doc.covariates) {
            (Some(s), None) => Self::from_covariates(id, s),
            (None, Some(named)) => Self::from_named(id, model, &named)?,
            _ => {
                return Err(ForecastError::BadProfile(
                    "exactly one of `sponsor` or `covariates` is required".into(),
                ))
            }
        };
        let mut profile = profile
            .with_fee(doc.annual_fee.unwrap_or(0.0))?
            .with_tenure(doc.current_tenure.unwrap_or(0));
        for (name, path) in doc.paths {
            profile = profile.with_path(&name, path)?;
        }
        Ok(profile)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileDoc {
    sponsorship_id: Option<String>,
    annual_fee: Option<f64>,
    current_tenure: Option<u32>,
    sponsor: Option<Covariates>,
    covariates: Option<BTreeMap<String, f64>>,
    #[serde(default)]
    paths: BTreeMap<String, Vec<f64>>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
