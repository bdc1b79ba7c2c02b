//! Synthetic panels from a discrete-time proportional hazards process, plus
//! brute-force oracles for checking the Cox fitter.
//!
//! Randomness comes from ChaCha8 seeded with the spec's `seed`, so a spec
//! always produces the same panel on every platform.

mod oracle;

use std::collections::BTreeMap;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cox::CoxError;
use crate::panel::{
    ColumnSpec, Covariates, Dataset, Flag, PanelError, PanelObservation, SponsorCategory,
    SponsorLocation, SponsorshipType,
};

pub use oracle::{finite_diff_check, grid_search_mle, DerivativeErrors, GridOptimum};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid generator spec: {0}")]
    BadSpec(String),
    #[error("hazard can reach {max_hazard:.4} >= 1 for a reachable covariate value; set \"clamp\": true to allow clamping")]
    HazardOverflow { max_hazard: f64 },
    #[error("grid search is exhaustive and supports at most 2 columns, design has {0}")]
    TooManyColumns(usize),
    #[error("finite-difference step must be positive and finite, got {0}")]
    BadStep(f64),
    #[error(transparent)]
    Cox(#[from] CoxError),
    #[error(transparent)]
    Panel(#[from] PanelError),
}

impl SynthError {
    pub fn code(&self) -> &'static str {
        match self {
            SynthError::BadSpec(_) => "BadSpec",
            SynthError::HazardOverflow { .. } => "HazardOverflow",
            SynthError::TooManyColumns(_) => "TooManyColumns",
            SynthError::BadStep(_) => "BadStep",
            SynthError::Cox(e) => e.code(),
            SynthError::Panel(e) => e.code(),
        }
    }
}

/// Uniform range for a continuous input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuousRange {
    pub min: f64,
    pub max: f64,
    /// Redraw every period instead of once per spell.
    #[serde(default)]
    pub time_varying: bool,
}

/// How the categorical covariates are drawn.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CategoricalMix {
    /// Every spell takes the categories of `base`.
    #[default]
    Fixed,
    /// Types by the spell shares of the overview table, locations and
    /// categories by the observation shares of the descriptive table; league,
    /// naming-rights and jersey spells draw a big-four property uniformly from
    /// {mlb, nba, nhl, nfl, none}.
    Observed,
    /// Every type, location, category and big-four property equally likely;
    /// each big-four league goes with a league sponsorship.
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub spells: usize,
    /// Mandatory; there is no implicit seed.
    pub seed: Option<u64>,
    /// Per-period baseline hazard; the last value repeats up to `max_horizon`.
    pub baseline_hazard: Vec<f64>,
    pub max_horizon: u32,
    #[serde(default)]
    pub censoring_rate: f64,
    /// Clamp hazards just below 1 instead of rejecting the spec.
    #[serde(default)]
    pub clamp: bool,
    #[serde(default)]
    pub categorical_mix: CategoricalMix,
    /// Values used for anything not drawn.
    #[serde(default)]
    pub base: Covariates,
    /// Prevalence of each binary characteristic, keyed by flag name.
    #[serde(default)]
    pub binary: BTreeMap<String, f64>,
    /// Uniform ranges for `gdp_growth`, `cpi_inflation` and `clutter`.
    #[serde(default)]
    pub continuous: BTreeMap<String, ContinuousRange>,
    /// True coefficients keyed by design column name.
    #[serde(default)]
    pub effects: BTreeMap<String, f64>,
}

impl GeneratorSpec {
    /// A spec with no covariate effects.
    pub fn new(spells: usize, seed: u64, baseline_hazard: Vec<f64>, max_horizon: u32) -> Self {
        Self {
            spells,
            seed: Some(seed),
            baseline_hazard,
            max_horizon,
            censoring_rate: 0.0,
            clamp: false,
            categorical_mix: CategoricalMix::Fixed,
            base: Covariates::default(),
            binary: BTreeMap::new(),
            continuous: BTreeMap::new(),
            effects: BTreeMap::new(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, SynthError> {
        serde_json::from_str(text).map_err(|e| SynthError::BadSpec(e.to_string()))
    }

    pub fn baseline_at(&self, period: u32) -> f64 {
        let i = (period as usize - 1).min(self.baseline_hazard.len() - 1);
        self.baseline_hazard[i]
    }

    /// True marginal survivor `prod (1 - h_t)` when all effects are zero.
    pub fn null_survivor(&self, period: u32) -> f64 {
        (1..=period).map(|t| 1.0 - self.baseline_at(t)).product()
    }

    fn validate(&self) -> Result<(u64, Vec<(ColumnSpec, f64)>, Vec<(Flag, f64)>), SynthError> {
        let bad = |m: String| Err(SynthError::BadSpec(m));
        let Some(seed) = self.seed else {
            return bad("`seed` is mandatory".into());
        };
        if self.baseline_hazard.is_empty() {
            return bad("`baseline_hazard` needs at least one value".into());
        }
        if let Some(h) = self
            .baseline_hazard
            .iter()
            .find(|h| !(0.0..1.0).contains(*h))
        {
            return bad(format!("baseline hazard {h} is outside [0, 1)"));
        }
        if self.max_horizon == 0 {
            return bad("`max_horizon` must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.censoring_rate) {
            return bad(format!(
                "censoring rate {} is outside [0, 1)",
                self.censoring_rate
            ));
        }
        let mut flags = Vec::new();
        for (name, &p) in &self.binary {
            let flag: Flag = name
                .parse()
                .map_err(|_| SynthError::BadSpec(format!("unknown binary covariate `{name}`")))?;
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("prevalence {p} for `{name}` is outside [0, 1]"));
            }
            flags.push((flag, p));
        }
        for (name, r) in &self.continuous {
            let (lo, hi) = match name.as_str() {
                "gdp_growth" => (-100.0, 100.0),
                "cpi_inflation" => (-100.0, 5000.0),
                "clutter" => (1.0, f64::from(u32::MAX)),
                _ => return bad(format!("unknown continuous covariate `{name}`")),
            };
            if !(r.min <= r.max && r.min >= lo && r.max <= hi) {
                return bad(format!(
                    "range for `{name}` must satisfy {lo} <= min <= max <= {hi}"
                ));
            }
        }
        let effects = self
            .effects
            .iter()
            .map(|(name, &b)| {
                if !b.is_finite() {
                    return Err(SynthError::BadSpec(format!(
                        "effect for `{name}` is not finite"
                    )));
                }
                Ok((ColumnSpec::parse(name)?, b))
            })
            .collect::<Result<Vec<_>, SynthError>>()?;
        Ok((seed, effects, flags))
    }

    /// Range of values a design column can take under this spec.
    fn column_range(&self, spec: &ColumnSpec, flags: &[(Flag, f64)]) -> (f64, f64) {
        let point = |v: f64| (v, v);
        let drawn = self.categorical_mix != CategoricalMix::Fixed;
        match spec {
            ColumnSpec::Type(_)
            | ColumnSpec::Location(_)
            | ColumnSpec::Category(_)
            | ColumnSpec::Property(_)
                if drawn =>
            {
                (0.0, 1.0)
            }
            ColumnSpec::Flag(f) => match flags.iter().find(|(g, _)| g == f) {
                Some(&(_, p)) if p == 0.0 => (0.0, 0.0),
                Some(&(_, p)) if p == 1.0 => (1.0, 1.0),
                Some(_) => (0.0, 1.0),
                None => point(spec.evaluate(&self.base)),
            },
            ColumnSpec::GdpGrowth | ColumnSpec::CpiInflation | ColumnSpec::Clutter => {
                match self.continuous.get(&spec.name()) {
                    Some(r) if spec == &ColumnSpec::Clutter => (r.min.ceil(), r.max.floor()),
                    Some(r) => (r.min, r.max),
                    None => point(spec.evaluate(&self.base)),
                }
            }
            ColumnSpec::Product(a, b) => {
                let (a0, a1) = self.column_range(a, flags);
                let (b0, b1) = self.column_range(b, flags);
                let c = [a0 * b0, a0 * b1, a1 * b0, a1 * b1];
                (
                    c.iter().copied().fold(f64::INFINITY, f64::min),
                    c.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                )
            }
            _ => point(spec.evaluate(&self.base)),
        }
    }
}

const TYPE_WEIGHTS: [(SponsorshipType, f64); 7] = [
    (SponsorshipType::Olympic, 33.0),
    (SponsorshipType::WorldCup, 47.0),
    (SponsorshipType::NamingRights, 219.0),
    (SponsorshipType::JerseyShirt, 774.0),
    (SponsorshipType::League, 551.0),
    (SponsorshipType::EventTitle, 926.0),
    (SponsorshipType::Team, 3286.0),
];

const LOCATION_WEIGHTS: [(SponsorLocation, f64); 6] = [
    (SponsorLocation::Africa, 30.0),
    (SponsorLocation::Asia, 2582.0),
    (SponsorLocation::Australia, 156.0),
    (SponsorLocation::Europe, 8949.0),
    (SponsorLocation::NorthAmerica, 11588.0),
    (SponsorLocation::SouthAmerica, 155.0),
];

/// Observation counts per named category; "other" takes the remainder of 23,460.
const CATEGORY_COUNTS: [(SponsorCategory, f64); 23] = [
    (SponsorCategory::AlcoholicBeverage, 894.0),
    (SponsorCategory::NonAlcoholicBeverage, 733.0),
    (SponsorCategory::Automotive, 3160.0),
    (SponsorCategory::Insurance, 858.0),
    (SponsorCategory::Apparel, 787.0),
    (SponsorCategory::Retail, 1420.0),
    (SponsorCategory::Tech, 3546.0),
    (SponsorCategory::Qsr, 351.0),
    (SponsorCategory::Food, 1027.0),
    (SponsorCategory::Media, 382.0),
    (SponsorCategory::Bank, 1302.0),
    (SponsorCategory::CreditCard, 353.0),
    (SponsorCategory::FinancialServices, 845.0),
    (SponsorCategory::MedicalHospitals, 173.0),
    (SponsorCategory::Pharmaceutical, 100.0),
    (SponsorCategory::PersonalCare, 891.0),
    (SponsorCategory::Airline, 569.0),
    (SponsorCategory::ShippingMail, 225.0),
    (SponsorCategory::UtilitiesPower, 1039.0),
    (SponsorCategory::Hotel, 135.0),
    (SponsorCategory::Betting, 226.0),
    (SponsorCategory::Tire, 571.0),
    (SponsorCategory::Telecom, 1162.0),
];

struct Categorical<T> {
    values: Vec<T>,
    index: WeightedIndex<f64>,
}

impl<T: Copy> Categorical<T> {
    fn new(pairs: &[(T, f64)]) -> Self {
        Self {
            values: pairs.iter().map(|p| p.0).collect(),
            index: WeightedIndex::new(pairs.iter().map(|p| p.1)).expect("positive weights"),
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> T {
        self.values[self.index.sample(rng)]
    }
}

/// Draws a panel: each spell draws its covariates, then in every period
/// exits with probability `baseline(t) * exp(x(t)·beta)`, otherwise is
/// censored with probability `censoring_rate`, until `max_horizon`.
pub fn generate_panel(spec: &GeneratorSpec) -> Result<Dataset, SynthError> {
    let (seed, effects, flags) = spec.validate()?;

    let max_eta: f64 = effects
        .iter()
        .map(|(c, b)| {
            let (lo, hi) = spec.column_range(c, &flags);
            (b * lo).max(b * hi)
        })
        .sum();
    let max_base = spec.baseline_hazard.iter().copied().fold(0.0, f64::max);
    let max_hazard = max_base * max_eta.exp();
    if max_hazard >= 1.0 && !spec.clamp {
        return Err(SynthError::HazardOverflow { max_hazard });
    }

    let mut categories: Vec<(SponsorCategory, f64)> = CATEGORY_COUNTS.to_vec();
    let named: f64 = categories.iter().map(|c| c.1).sum();
    categories.push((SponsorCategory::Other, 23460.0 - named));
    let types = Categorical::new(&TYPE_WEIGHTS);
    let locations = Categorical::new(&LOCATION_WEIGHTS);
    let categories = Categorical::new(&categories);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = spec.spells.to_string().len().max(6);
    let uniform = |rng: &mut ChaCha8Rng, r: &ContinuousRange| {
        if r.max > r.min {
            rng.gen_range(r.min..=r.max)
        } else {
            r.min
        }
    };
    let clutter_draw = |rng: &mut ChaCha8Rng, r: &ContinuousRange| {
        let lo = r.min.ceil() as u32;
        let hi = (r.max.floor() as u32).max(lo);
        rng.gen_range(lo..=hi)
    };

    let mut observations = Vec::new();
    for s in 0..spec.spells {
        let id = format!("S{:0width$}", s + 1);
        let mut cov = spec.base.clone();
        if spec.categorical_mix == CategoricalMix::Uniform {
            let k = rng.gen_range(0..SponsorshipType::ALL.len() + 4);
            match k.checked_sub(SponsorshipType::ALL.len()) {
                Some(p) => {
                    cov.sponsorship_type = SponsorshipType::League;
                    cov.big_four_property = Some(crate::panel::BigFourProperty::ALL[p]);
                }
                None => {
                    cov.sponsorship_type = SponsorshipType::ALL[k];
                    cov.big_four_property = None;
                }
            }
            cov.sponsor_location =
                SponsorLocation::ALL[rng.gen_range(0..SponsorLocation::ALL.len())];
            cov.sponsor_category =
                SponsorCategory::ALL[rng.gen_range(0..SponsorCategory::ALL.len())];
        }
        if spec.categorical_mix == CategoricalMix::Observed {
            cov.sponsorship_type = types.draw(&mut rng);
            cov.sponsor_location = locations.draw(&mut rng);
            cov.sponsor_category = categories.draw(&mut rng);
            cov.big_four_property = match cov.sponsorship_type {
                SponsorshipType::League
                | SponsorshipType::NamingRights
                | SponsorshipType::JerseyShirt => {
                    let k = rng.gen_range(0..5usize);
                    crate::panel::BigFourProperty::ALL.get(k).copied()
                }
                _ => None,
            };
        }
        for &(flag, p) in &flags {
            cov.set_flag(flag, rng.gen_bool(p));
        }
        for (name, r) in &spec.continuous {
            match name.as_str() {
                "gdp_growth" => cov.gdp_growth = uniform(&mut rng, r),
                "cpi_inflation" => cov.cpi_inflation = uniform(&mut rng, r),
                _ => cov.clutter = clutter_draw(&mut rng, r),
            }
        }

        for t in 1..=spec.max_horizon {
            if t > 1 {
                for (name, r) in spec.continuous.iter().filter(|(_, r)| r.time_varying) {
                    match name.as_str() {
                        "gdp_growth" => cov.gdp_growth = uniform(&mut rng, r),
                        "cpi_inflation" => cov.cpi_inflation = uniform(&mut rng, r),
                        _ => cov.clutter = clutter_draw(&mut rng, r),
                    }
                }
            }
            let eta: f64 = effects.iter().map(|(c, b)| b * c.evaluate(&cov)).sum();
            let hazard = (spec.baseline_at(t) * eta.exp()).min(1.0 - 1e-12);
            let exit = rng.gen::<f64>() < hazard;
            let censor = !exit && rng.gen::<f64>() < spec.censoring_rate;
            observations.push(PanelObservation {
                sponsorship_id: id.clone(),
                period: t,
                covariates: cov.clone(),
                event: exit,
                cluster_id: id.clone(),
            });
            if exit || censor {
                break;
            }
        }
    }
    Ok(Dataset::new(observations)?)
}

#[cfg(test)]
mod tests;
