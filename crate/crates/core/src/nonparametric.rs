//! Life tables, discrete survivor and hazard functions, median lifetime and
//! kernel-smoothed hazards.
//!
//! Periods are whole years. A spell that is censored at the end of period `j`
//! still counts in period `j`'s risk set, so `hazard(j) = ended(j) / beginning(j)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::panel::SponsorshipSpell;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LifeTableError {
    #[error("no spells to tabulate")]
    EmptySpells,
    #[error("median undefined: survivor curve never falls to .5 (floor {floor:.4})")]
    MedianUndefined { floor: f64 },
    #[error("bandwidth must be at least 1 period, got {0}")]
    BadBandwidth(u32),
    #[error("invalid survivor curve: {0}")]
    InvalidCurve(String),
    #[error("malformed life table: {0}")]
    Malformed(String),
}

impl LifeTableError {
    pub fn code(&self) -> &'static str {
        match self {
            LifeTableError::EmptySpells => "EmptySpells",
            LifeTableError::MedianUndefined { .. } => "MedianUndefined",
            LifeTableError::BadBandwidth(_) => "BadBandwidth",
            LifeTableError::InvalidCurve(_) => "InvalidCurve",
            LifeTableError::Malformed(_) => "MalformedLifeTable",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifeTableRow {
    pub period: u32,
    pub beginning: usize,
    pub ended: usize,
    pub censored: usize,
    pub hazard: f64,
    pub survivor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifeTable {
    pub rows: Vec<LifeTableRow>,
    pub overall_hazard: f64,
}

/// Tabulates spells into one row per period `1..=max duration`.
pub fn life_table(spells: &[SponsorshipSpell]) -> Result<LifeTable, LifeTableError> {
    let horizon = spells
        .iter()
        .map(|s| s.duration)
        .max()
        .ok_or(LifeTableError::EmptySpells)? as usize;

    let mut ended = vec![0usize; horizon + 1];
    let mut censored = vec![0usize; horizon + 1];
    for s in spells {
        if s.ended {
            ended[s.duration as usize] += 1;
        } else {
            censored[s.duration as usize] += 1;
        }
    }

    let mut rows = Vec::with_capacity(horizon);
    let mut at_risk = spells.len();
    let mut survivor = 1.0;
    for j in 1..=horizon {
        let hazard = if at_risk == 0 {
            0.0
        } else {
            ended[j] as f64 / at_risk as f64
        };
        survivor *= 1.0 - hazard;
        rows.push(LifeTableRow {
            period: j as u32,
            beginning: at_risk,
            ended: ended[j],
            censored: censored[j],
            hazard,
            survivor,
        });
        at_risk -= ended[j] + censored[j];
    }

    let mut table = LifeTable {
        rows,
        overall_hazard: 0.0,
    };
    table.overall_hazard = overall_hazard(&table).0;
    Ok(table)
}

/// Rebuilds a spell set from per-period (ended, censored) counts, where
/// `counts[j - 1]` belongs to period `j`.
pub fn spells_from_counts(counts: &[(usize, usize)]) -> Vec<SponsorshipSpell> {
    let mut spells = Vec::new();
    for (j, &(ended, censored)) in counts.iter().enumerate() {
        let period = j as u32 + 1;
        for (k, flag) in std::iter::repeat(true)
            .take(ended)
            .chain(std::iter::repeat(false).take(censored))
            .enumerate()
        {
            let tag = if flag { 'e' } else { 'c' };
            spells.push(SponsorshipSpell::new(
                format!("p{period:03}{tag}{k:05}"),
                period,
                flag,
            ));
        }
    }
    spells
}

/// Total events over total at-risk rows, and its complement, the renewal rate.
pub fn overall_hazard(table: &LifeTable) -> (f64, f64) {
    let events: usize = table.rows.iter().map(|r| r.ended).sum();
    let exposure: usize = table.rows.iter().map(|r| r.beginning).sum();
    let hazard = if exposure == 0 {
        0.0
    } else {
        events as f64 / exposure as f64
    };
    (hazard, 1.0 - hazard)
}

/// Survivor values at periods 0, 1, 2, ... with `S(0) = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivorCurve {
    points: Vec<(u32, f64)>,
}

impl SurvivorCurve {
    /// `values[t]` is the survivor value at period `t`; `values[0]` must be 1.
    pub fn from_values(values: Vec<f64>) -> Result<Self, LifeTableError> {
        match values.first() {
            Some(v) if (*v - 1.0).abs() < 1e-12 => {}
            _ => {
                return Err(LifeTableError::InvalidCurve(
                    "curve must start at 1.0".into(),
                ))
            }
        }
        for w in values.windows(2) {
            if w[1] > w[0] + 1e-12 {
                return Err(LifeTableError::InvalidCurve("curve increases".into()));
            }
        }
        if values.iter().any(|v| !(0.0..=1.0 + 1e-12).contains(v)) {
            return Err(LifeTableError::InvalidCurve("value outside [0, 1]".into()));
        }
        Ok(Self {
            points: values
                .into_iter()
                .enumerate()
                .map(|(t, v)| (t as u32, v))
                .collect(),
        })
    }

    pub fn from_table(table: &LifeTable) -> Self {
        let mut points = vec![(0, 1.0)];
        points.extend(table.rows.iter().map(|r| (r.period, r.survivor)));
        Self { points }
    }

    pub fn points(&self) -> &[(u32, f64)] {
        &self.points
    }

    /// Survivor value at period `t`; beyond the last point the curve stays flat.
    pub fn at(&self, t: u32) -> f64 {
        let idx = (t as usize).min(self.points.len() - 1);
        self.points[idx].1
    }

    pub fn last_period(&self) -> u32 {
        self.points.last().map(|p| p.0).unwrap_or(0)
    }
}

/// Time at which the survivor curve reaches .5, linearly interpolated between
/// the last period above .5 and the next one.
pub fn median_lifetime(curve: &SurvivorCurve) -> Result<f64, LifeTableError> {
    let pts = curve.points();
    if let Some(&(t, _)) = pts.iter().find(|(_, s)| (s - 0.5).abs() < 1e-12) {
        return Ok(t as f64);
    }
    let floor = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let m = pts
        .iter()
        .rposition(|(_, s)| *s > 0.5)
        .filter(|&i| i + 1 < pts.len())
        .ok_or(LifeTableError::MedianUndefined { floor })?;
    let (tm, sm) = pts[m];
    let (tn, sn) = pts[m + 1];
    Ok(tm as f64 + (sm - 0.5) / (sm - sn) * (tn - tm) as f64)
}

/// Epanechnikov-weighted moving average of the interval hazards.
///
/// Period `j` mixes hazards at `j - b ..= j + b` with weights
/// `1 - (k / (b + 1))^2`, renormalised at the table boundaries.
pub fn smoothed_hazard(
    table: &LifeTable,
    bandwidth: u32,
) -> Result<Vec<(u32, f64)>, LifeTableError> {
    if bandwidth < 1 {
        return Err(LifeTableError::BadBandwidth(bandwidth));
    }
    let b = bandwidth as i64;
    let scale = (b + 1) as f64;
    let n = table.rows.len() as i64;
    let out = (0..n)
        .map(|i| {
            let (mut num, mut den) = (0.0, 0.0);
            for k in -b..=b {
                let j = i + k;
                if j < 0 || j >= n {
                    continue;
                }
                let u = k as f64 / scale;
                let w = 1.0 - u * u;
                num += w * table.rows[j as usize].hazard;
                den += w;
            }
            (table.rows[i as usize].period, num / den)
        })
        .collect();
    Ok(out)
}

impl LifeTable {
    /// CSV with columns `period,beginning,ended,censored,hazard,survivor`,
    /// rates at six decimals.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("period,beginning,ended,censored,hazard,survivor\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{:.6},{:.6}\n",
                r.period, r.beginning, r.ended, r.censored, r.hazard, r.survivor
            ));
        }
        out
    }

    /// Reads the CSV written by [`LifeTable::to_csv`]. Hazard and survivor are
    /// recomputed from the counts rather than taken from the rounded columns.
    pub fn from_csv(text: &str) -> Result<Self, LifeTableError> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| LifeTableError::Malformed(e.to_string()))?
            .clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| LifeTableError::Malformed(format!("missing column `{name}`")))
        };
        let (ip, ib, ie, ic) = (
            col("period")?,
            col("beginning")?,
            col("ended")?,
            col("censored")?,
        );
        let mut rows = Vec::new();
        let mut survivor = 1.0;
        for record in reader.records() {
            let record = record.map_err(|e| LifeTableError::Malformed(e.to_string()))?;
            let field =
                |i: usize| -> Result<usize, LifeTableError> {
                    record.get(i).unwrap_or("").parse().map_err(|_| {
                        LifeTableError::Malformed(format!("bad count in {:?}", record))
                    })
                };
            let (period, beginning, ended, censored) =
                (field(ip)?, field(ib)?, field(ie)?, field(ic)?);
            if ended > beginning {
                return Err(LifeTableError::Malformed(format!(
                    "period {period}: more events than at risk"
                )));
            }
            let hazard = if beginning == 0 {
                0.0
            } else {
                ended as f64 / beginning as f64
            };
            survivor *= 1.0 - hazard;
            rows.push(LifeTableRow {
                period: period as u32,
                beginning,
                ended,
                censored,
                hazard,
                survivor,
            });
        }
        if rows.is_empty() {
            return Err(LifeTableError::EmptySpells);
        }
        let mut table = LifeTable {
            rows,
            overall_hazard: 0.0,
        };
        table.overall_hazard = overall_hazard(&table).0;
        Ok(table)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spells(list: &[(u32, bool)]) -> Vec<SponsorshipSpell> {
        list.iter()
            .enumerate()
            .map(|(i, &(d, e))| SponsorshipSpell::new(format!("s{i}"), d, e))
            .collect()
    }

    #[test]
    fn empty_is_an_error() {
        assert_eq!(life_table(&[]).unwrap_err(), LifeTableError::EmptySpells);
    }

    #[test]
    fn everyone_ends_in_year_one() {
        let t = life_table(&spells(&[(1, true), (1, true), (1, true)])).unwrap();
        assert_eq!(t.rows[0].hazard, 1.0);
        assert_eq!(t.rows[0].survivor, 0.0);
        assert_eq!(overall_hazard(&t), (1.0, 0.0));
    }

    #[test]
    fn four_spell_product_limit() {
        let t = life_table(&spells(&[(1, true), (1, false), (2, true), (2, false)])).unwrap();
        assert_eq!(t.rows[0].hazard, 0.25);
        assert_eq!(t.rows[0].survivor, 0.75);
        assert_eq!(t.rows[1].hazard, 0.5);
        assert_eq!(t.rows[1].survivor, 0.375);
    }

    #[test]
    fn no_events() {
        let t = life_table(&spells(&[(2, false), (3, false)])).unwrap();
        assert_eq!(overall_hazard(&t), (0.0, 1.0));
        assert!(matches!(
            median_lifetime(&SurvivorCurve::from_table(&t)),
            Err(LifeTableError::MedianUndefined { .. })
        ));
    }

    #[test]
    fn median_on_exact_half() {
        let c = SurvivorCurve::from_values(vec![1.0, 0.5]).unwrap();
        assert_eq!(median_lifetime(&c).unwrap(), 1.0);
        let c = SurvivorCurve::from_values(vec![1.0, 0.8, 0.5, 0.1]).unwrap();
        assert_eq!(median_lifetime(&c).unwrap(), 2.0);
    }

    #[test]
    fn median_constant_quarter_hazard() {
        let values: Vec<f64> = (0..6).map(|t| 0.75f64.powi(t)).collect();
        let c = SurvivorCurve::from_values(values).unwrap();
        // 2 + .0625 / .140625
        assert!((median_lifetime(&c).unwrap() - 22.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn curve_validation() {
        assert!(SurvivorCurve::from_values(vec![0.9, 0.5]).is_err());
        assert!(SurvivorCurve::from_values(vec![1.0, 0.5, 0.6]).is_err());
    }

    #[test]
    fn bandwidth_zero_rejected() {
        let t = life_table(&spells(&[(1, true), (2, true)])).unwrap();
        assert_eq!(
            smoothed_hazard(&t, 0).unwrap_err(),
            LifeTableError::BadBandwidth(0)
        );
    }

    #[test]
    fn smoothing_preserves_constants() {
        // constant hazard .5 over four periods: 16 spells
        let counts = [(8, 0), (4, 0), (2, 0), (2, 0)];
        let mut t = life_table(&spells_from_counts(&counts)).unwrap();
        t.rows.truncate(3);
        for bw in 1..5 {
            for (_, v) in smoothed_hazard(&t, bw).unwrap() {
                assert!((v - 0.5).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn smoothing_matches_direct_weighted_sum() {
        let counts = [(5, 1), (3, 2), (4, 0), (1, 1), (2, 0), (1, 0)];
        let t = life_table(&spells_from_counts(&counts)).unwrap();
        let h: Vec<f64> = t.rows.iter().map(|r| r.hazard).collect();
        let s = smoothed_hazard(&t, 1).unwrap();
        // interior point 3 (index 2): weights .75, 1, .75
        let expected = (0.75 * h[1] + h[2] + 0.75 * h[3]) / 2.5;
        assert!((s[2].1 - expected).abs() < 1e-15);
        // left boundary renormalises over the two available points
        let expected = (h[0] + 0.75 * h[1]) / 1.75;
        assert!((s[0].1 - expected).abs() < 1e-15);
        assert_eq!(s.len(), t.rows.len());
    }

    #[test]
    fn csv_round_trip_recomputes_rates() {
        let t = life_table(&spells(&[(1, true), (1, false), (2, true), (3, false)])).unwrap();
        let back = LifeTable::from_csv(&t.to_csv()).unwrap();
        assert_eq!(back, t);
        assert!(t.to_csv().contains("1,4,1,1,0.250000,0.750000"));
    }

    proptest! {
        #[test]
        fn table_invariants(list in prop::collection::vec((1u32..12, any::<bool>()), 1..80)) {
            let t = life_table(&spells(&list)).unwrap();
            let mut product = 1.0;
            for (i, r) in t.rows.iter().enumerate() {
                prop_assert!((0.0..=1.0).contains(&r.hazard));
                prop_assert!((0.0..=1.0).contains(&r.survivor));
                product *= 1.0 - r.hazard;
                prop_assert!((r.survivor - product).abs() < 1e-12);
                if let Some(next) = t.rows.get(i + 1) {
                    prop_assert_eq!(r.beginning - r.ended - r.censored, next.beginning);
                    prop_assert!(next.survivor <= r.survivor);
                }
            }
        }

        #[test]
        fn median_at_integer_crossing(head in prop::collection::vec(0.0f64..0.5, 0..5), tail in prop::collection::vec(0.0f64..0.5, 0..5)) {
            // build a curve that hits exactly .5 at period head.len() + 1
            let mut values = vec![1.0];
            let mut s: f64 = 1.0;
            for h in &head {
                s = 0.5 + (s - 0.5) * (1.0 - h);
                values.push(s);
            }
            values.push(0.5);
            let mut s = 0.5;
            for h in &tail {
                s *= 1.0 - h;
                values.push(s);
            }
            let c = SurvivorCurve::from_values(values).unwrap();
            prop_assert_eq!(median_lifetime(&c).unwrap(), (head.len() + 1) as f64);
        }
    }
}
