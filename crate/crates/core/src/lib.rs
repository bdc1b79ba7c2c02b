//! Survival analysis for sponsorship panels: life tables, Cox proportional
//! hazards fitting with cluster-robust errors, and renewal forecasts.

pub mod cox;
pub mod forecast;
pub mod nonparametric;
pub mod panel;
pub mod plot;
pub mod synth;
