use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::CoxError;
use crate::panel::DesignMatrix;

/// Approximation used when several events share one period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TiesMethod {
    Breslow,
    #[default]
    Efron,
}

impl fmt::Display for TiesMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TiesMethod::Breslow => "breslow",
            TiesMethod::Efron => "efron",
        })
    }
}

impl FromStr for TiesMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "breslow" => Ok(TiesMethod::Breslow),
            "efron" => Ok(TiesMethod::Efron),
            other => Err(format!(
                "unknown ties method {other:?} (expected efron or breslow)"
            )),
        }
    }
}

/// Rows at risk and rows failing at one distinct event time.
#[derive(Debug, Clone)]
pub(crate) struct RiskGroup {
    pub time: u32,
    pub at_risk: Vec<usize>,
    pub events: Vec<usize>,
}

/// Risk sets of a counting-process design: at event time `t`, every row with
/// `entry < t <= exit` is at risk.
#[derive(Debug, Clone)]
pub(crate) struct RiskSets {
    pub groups: Vec<RiskGroup>,
}

impl RiskSets {
    pub fn new(x: &DesignMatrix) -> Self {
        let mut times: Vec<u32> = x
            .exit()
            .iter()
            .zip(x.events())
            .filter(|(_, e)| **e)
            .map(|(t, _)| *t)
            .collect();
        times.sort_unstable();
        times.dedup();

        let mut groups: Vec<RiskGroup> = times
            .iter()
            .map(|&time| RiskGroup {
                time,
                at_risk: Vec::new(),
                events: Vec::new(),
            })
            .collect();
        for i in 0..x.n_rows() {
            let (entry, exit) = (x.entry()[i], x.exit()[i]);
            let first = times.partition_point(|&t| t <= entry);
            for g in groups[first..].iter_mut() {
                if g.time > exit {
                    break;
                }
                g.at_risk.push(i);
                if x.events()[i] && g.time == exit {
                    g.events.push(i);
                }
            }
        }
        RiskSets { groups }
    }
}

/// Log partial likelihood with its analytic gradient and Hessian.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodEval {
    pub value: f64,
    pub gradient: DVector<f64>,
    pub hessian: DMatrix<f64>,
}

/// Reusable evaluator that caches the risk-set structure of a design.
pub struct PartialLikelihood<'a> {
    x: &'a DesignMatrix,
    risk: RiskSets,
    ties: TiesMethod,
}

/// Per-group weighted sums, rescaled by `exp(-shift)` for stability.
struct GroupSums {
    shift: f64,
    s0: f64,
    s1: Vec<f64>,
    s2: Vec<f64>,
    d0: f64,
    d1: Vec<f64>,
    d2: Vec<f64>,
    event_eta: f64,
    event_x: Vec<f64>,
}

impl<'a> PartialLikelihood<'a> {
    pub fn new(x: &'a DesignMatrix, ties: TiesMethod) -> Result<Self, CoxError> {
        if x.n_events() == 0 {
            return Err(CoxError::NoEvents);
        }
        Ok(Self {
            x,
            risk: RiskSets::new(x),
            ties,
        })
    }

    pub fn ties(&self) -> TiesMethod {
        self.ties
    }

    pub(crate) fn risk_sets(&self) -> &RiskSets {
        &self.risk
    }

    fn check(&self, beta: &[f64]) -> Result<(), CoxError> {
        if beta.len() != self.x.n_cols() {
            return Err(CoxError::DimensionMismatch {
                expected: self.x.n_cols(),
                got: beta.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn linear_predictor(&self, beta: &[f64]) -> Vec<f64> {
        (0..self.x.n_rows())
            .map(|i| self.x.row(i).iter().zip(beta).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn group_sums(&self, g: &RiskGroup, eta: &[f64], order: u8) -> GroupSums {
        let p = self.x.n_cols();
        let shift = g
            .at_risk
            .iter()
            .map(|&i| eta[i])
            .fold(f64::NEG_INFINITY, f64::max);
        let mut sums = GroupSums {
            shift,
            s0: 0.0,
            s1: vec![0.0; if order >= 1 { p } else { 0 }],
            s2: vec![0.0; if order >= 2 { p * p } else { 0 }],
            d0: 0.0,
            d1: vec![0.0; if order >= 1 { p } else { 0 }],
            d2: vec![0.0; if order >= 2 { p * p } else { 0 }],
            event_eta: 0.0,
            event_x: vec![0.0; if order >= 1 { p } else { 0 }],
        };
        let accumulate = |w: f64, row: &[f64], s0: &mut f64, s1: &mut [f64], s2: &mut [f64]| {
            *s0 += w;
            if order >= 1 {
                for (a, xa) in row.iter().enumerate() {
                    s1[a] += w * xa;
                }
            }
            if order >= 2 {
                for a in 0..p {
                    let wa = w * row[a];
                    for b in 0..=a {
                        s2[a * p + b] += wa * row[b];
                    }
                }
            }
        };
        for &i in &g.at_risk {
            let w = (eta[i] - shift).exp();
            accumulate(w, self.x.row(i), &mut sums.s0, &mut sums.s1, &mut sums.s2);
        }
        for &i in &g.events {
            let w = (eta[i] - shift).exp();
            let row = self.x.row(i);
            sums.event_eta += eta[i];
            if order >= 1 {
                for (a, xa) in row.iter().enumerate() {
                    sums.event_x[a] += xa;
                }
            }
            if self.ties == TiesMethod::Efron {
                accumulate(w, row, &mut sums.d0, &mut sums.d1, &mut sums.d2);
            }
        }
        sums
    }

    /// Tie fraction for the `l`-th of `d` events in a group.
    fn fraction(&self, l: usize, d: usize) -> f64 {
        match self.ties {
            TiesMethod::Breslow => 0.0,
            TiesMethod::Efron => l as f64 / d as f64,
        }
    }

    /// Log partial likelihood only.
    pub fn value(&self, beta: &[f64]) -> Result<f64, CoxError> {
        self.check(beta)?;
        let eta = self.linear_predictor(beta);
        let mut value = 0.0;
        for g in &self.risk.groups {
            let s = self.group_sums(g, &eta, 0);
            let d = g.events.len();
            value += s.event_eta;
            for l in 0..d {
                let phi = s.s0 - self.fraction(l, d) * s.d0;
                value -= s.shift + phi.ln();
            }
        }
        Ok(value)
    }

    /// Value, gradient and Hessian.
    pub fn evaluate(&self, beta: &[f64]) -> Result<LikelihoodEval, CoxError> {
        self.check(beta)?;
        let p = self.x.n_cols();
        let eta = self.linear_predictor(beta);
        let mut value = 0.0;
        let mut grad = vec![0.0; p];
        let mut hess = vec![0.0; p * p];
        let mut s1 = vec![0.0; p];
        for g in &self.risk.groups {
            let s = self.group_sums(g, &eta, 2);
            let d = g.events.len();
            value += s.event_eta;
            for a in 0..p {
                grad[a] += s.event_x[a];
            }
            for l in 0..d {
                let f = self.fraction(l, d);
                let phi = s.s0 - f * s.d0;
                value -= s.shift + phi.ln();
                for a in 0..p {
                    s1[a] = (s.s1[a] - f * s.d1[a]) / phi;
                    grad[a] -= s1[a];
                }
                for a in 0..p {
                    for b in 0..=a {
                        let s2 = (s.s2[a * p + b] - f * s.d2[a * p + b]) / phi;
                        hess[a * p + b] -= s2 - s1[a] * s1[b];
                    }
                }
            }
        }
        let hessian = DMatrix::from_fn(p, p, |a, b| {
            if b <= a {
                hess[a * p + b]
            } else {
                hess[b * p + a]
            }
        });
        Ok(LikelihoodEval {
            value,
            gradient: DVector::from_vec(grad),
            hessian,
        })
    }

    /// Per-row score residuals; row `i` of the result sums to the gradient
    /// when added over all rows.
    pub fn score_residuals(&self, beta: &[f64]) -> Result<Vec<Vec<f64>>, CoxError> {
        self.check(beta)?;
        let p = self.x.n_cols();
        let eta = self.linear_predictor(beta);
        let mut resid = vec![vec![0.0; p]; self.x.n_rows()];
        for g in &self.risk.groups {
            let s = self.group_sums(g, &eta, 1);
            let d = g.events.len();
            let df = d as f64;
            // a = mean of the per-step weighted means; b*/c* weight the
            // compensator terms for non-event and event rows respectively.
            let mut a = vec![0.0; p];
            let (mut b0, mut c0) = (0.0, 0.0);
            let mut b1 = vec![0.0; p];
            let mut c1 = vec![0.0; p];
            for l in 0..d {
                let f = self.fraction(l, d);
                let phi = s.s0 - f * s.d0;
                let keep = 1.0 - f;
                b0 += 1.0 / phi;
                c0 += keep / phi;
                for k in 0..p {
                    let mean = (s.s1[k] - f * s.d1[k]) / phi;
                    a[k] += mean / df;
                    b1[k] += mean / phi;
                    c1[k] += keep * mean / phi;
                }
            }
            let is_event: std::collections::HashSet<usize> = g.events.iter().copied().collect();
            for &i in &g.at_risk {
                let w = (eta[i] - s.shift).exp();
                let row = self.x.row(i);
                let event = is_event.contains(&i);
                let (w0, w1) = if event && self.ties == TiesMethod::Efron {
                    (c0, &c1)
                } else {
                    (b0, &b1)
                };
                for k in 0..p {
                    let mut r = -w * (row[k] * w0 - w1[k]);
                    if event {
                        r += row[k] - a[k];
                    }
                    resid[i][k] += r;
                }
            }
        }
        Ok(resid)
    }
}

/// Log partial likelihood, gradient and Hessian of `beta` on `x`.
pub fn partial_log_likelihood(
    x: &DesignMatrix,
    beta: &[f64],
    ties: TiesMethod,
) -> Result<LikelihoodEval, CoxError> {
    PartialLikelihood::new(x, ties)?.evaluate(beta)
}
