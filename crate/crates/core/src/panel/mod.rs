//! Sponsorship panel data: one row per sponsorship-year.
//!
//! Rows are validated on load so that every sponsorship occupies a contiguous
//! run of periods `1..=d` and only the last row may carry the exit event.

mod csv_io;
mod design;
mod types;

use std::collections::BTreeMap;
use std::ops::Range;

use thiserror::Error;

pub use csv_io::{
    parse_panel_csv, parse_portfolio_csv, render_panel_csv, PortfolioEntry, PORTFOLIO_COLUMNS,
    REQUIRED_COLUMNS,
};
pub use design::{design_matrix, Block, BlockSpec, ColumnSpec, DesignMatrix, DEFAULT_BLOCK_SIZES};
pub use types::{
    BigFourProperty, Covariates, Flag, PanelObservation, SponsorCategory, SponsorLocation,
    SponsorshipSpell, SponsorshipType, UnknownToken,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PanelError {
    #[error("input contains no data rows")]
    EmptyInput,
    #[error("required column `{0}` is missing from the header")]
    MissingColumn(String),
    #[error("line {line}: column `{column}` has unrecognised value {token:?}")]
    BadEnumToken {
        line: usize,
        column: String,
        token: String,
    },
    #[error("line {line}: column `{column}` could not parse {token:?}")]
    BadValue {
        line: usize,
        column: String,
        token: String,
    },
    #[error("line {line}: column `{column}` value {value} is out of range")]
    OutOfRange {
        line: usize,
        column: String,
        value: f64,
    },
    #[error("sponsorship `{0}` does not cover periods 1..d without gaps or duplicates")]
    NonContiguousPeriods(String),
    #[error("sponsorship `{0}` has an event before its final period")]
    EventNotTerminal(String),
    #[error("malformed CSV: {0}")]
    Csv(String),
    #[error("block specification names unknown column `{0}`")]
    UnknownBlockColumn(String),
    #[error("invalid block specification: {0}")]
    BadBlockSpec(String),
    #[error("design matrix: {0}")]
    BadDesign(String),
}

impl PanelError {
    /// Stable identifier printed by the command line front end.
    pub fn code(&self) -> &'static str {
        match self {
            PanelError::EmptyInput => "EmptyInput",
            PanelError::MissingColumn(_) => "MissingColumn",
            PanelError::BadEnumToken { .. } => "BadEnumToken",
            PanelError::BadValue { .. } => "BadValue",
            PanelError::OutOfRange { .. } => "OutOfRange",
            PanelError::NonContiguousPeriods(_) => "NonContiguousPeriods",
            PanelError::EventNotTerminal(_) => "EventNotTerminal",
            PanelError::Csv(_) => "MalformedCsv",
            PanelError::UnknownBlockColumn(_) => "UnknownBlockColumn",
            PanelError::BadBlockSpec(_) => "BadBlockSpec",
            PanelError::BadDesign(_) => "BadDesign",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct SpellSpan {
    spell: SponsorshipSpell,
    rows: Range<usize>,
}

/// A validated, immutable panel.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    observations: Vec<PanelObservation>,
    spans: Vec<SpellSpan>,
}

impl Dataset {
    /// Sorts rows by (sponsorship id, period) and checks the per-spell rules.
    pub fn new(mut observations: Vec<PanelObservation>) -> Result<Self, PanelError> {
        observations.sort_by(|a, b| {
            a.sponsorship_id
                .cmp(&b.sponsorship_id)
                .then(a.period.cmp(&b.period))
        });

        let mut spans = Vec::new();
        let mut start = 0;
        while start < observations.len() {
            let id = &observations[start].sponsorship_id;
            let mut end = start;
            while end < observations.len() && &observations[end].sponsorship_id == id {
                end += 1;
            }
            let rows = &observations[start..end];
            for (offset, row) in rows.iter().enumerate() {
                if row.period as usize != offset + 1 {
                    return Err(PanelError::NonContiguousPeriods(id.clone()));
                }
            }
            if rows[..rows.len() - 1].iter().any(|r| r.event) {
                return Err(PanelError::EventNotTerminal(id.clone()));
            }
            let last = &rows[rows.len() - 1];
            spans.push(SpellSpan {
                spell: SponsorshipSpell {
                    sponsorship_id: id.clone(),
                    duration: rows.len() as u32,
                    ended: last.event,
                    cluster_id: rows[0].cluster_id.clone(),
                },
                rows: start..end,
            });
            start = end;
        }

        Ok(Self {
            observations,
            spans,
        })
    }

    pub fn observations(&self) -> &[PanelObservation] {
        &self.observations
    }

    /// Number of panel rows (sponsorship-years).
    pub fn n_observations(&self) -> usize {
        self.observations.len()
    }

    /// Number of distinct sponsorships.
    pub fn n_spells(&self) -> usize {
        self.spans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// Rows belonging to each sponsorship, in id order.
    pub fn spell_rows(&self) -> impl Iterator<Item = (&SponsorshipSpell, &[PanelObservation])> {
        self.spans
            .iter()
            .map(move |s| (&s.spell, &self.observations[s.rows.clone()]))
    }

    /// Per-period tally of (at risk, ended, censored), keyed by period.
    pub fn period_accounting(&self) -> BTreeMap<u32, (usize, usize, usize)> {
        let mut table: BTreeMap<u32, (usize, usize, usize)> = BTreeMap::new();
        for obs in &self.observations {
            table.entry(obs.period).or_default().0 += 1;
        }
        for span in &self.spans {
            let entry = table.entry(span.spell.duration).or_default();
            if span.spell.ended {
                entry.1 += 1;
            } else {
                entry.2 += 1;
            }
        }
        table
    }
}

/// One spell per sponsorship, duration = last period, ended = last event flag.
pub fn spells_from_panel(dataset: &Dataset) -> Vec<SponsorshipSpell> {
    dataset.spans.iter().map(|s| s.spell.clone()).collect()
}

/// Expands spells into panel rows that all share `covariates`.
///
/// Used to rebuild a panel from published life-table aggregates, where only
/// durations and exit status are known.
pub fn panel_from_spells(spells: &[SponsorshipSpell], covariates: &Covariates) -> Dataset {
    let mut rows = Vec::with_capacity(spells.iter().map(|s| s.duration as usize).sum());
    for spell in spells {
        for period in 1..=spell.duration {
            rows.push(PanelObservation {
                sponsorship_id: spell.sponsorship_id.clone(),
                period,
                covariates: covariates.clone(),
                event: spell.ended && period == spell.duration,
                cluster_id: spell.cluster_id.clone(),
            });
        }
    }
    Dataset::new(rows).expect("spells expand to a contiguous panel")
}
