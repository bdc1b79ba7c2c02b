use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::covariance::sandwich;
use super::likelihood::{PartialLikelihood, TiesMethod};
use super::CoxError;
use crate::panel::DesignMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub ties: TiesMethod,
    /// Relative change in log-likelihood that ends the iteration.
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    /// Any coefficient beyond this magnitude is reported as monotone likelihood.
    pub max_abs_beta: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            ties: TiesMethod::Efron,
            tol: 1e-8,
            max_iter: 100,
            max_halvings: 20,
            max_abs_beta: 20.0,
        }
    }
}

impl FitOptions {
    pub fn with_ties(ties: TiesMethod) -> Self {
        Self {
            ties,
            ..Self::default()
        }
    }
}

/// One step of the Breslow baseline cumulative hazard.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineStep {
    pub period: u32,
    pub increment: f64,
    pub cumulative: f64,
}

/// A fitted Cox model. Immutable once fitted, apart from attaching the
/// baseline hazard.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ModelFile", try_from = "ModelFile")]
pub struct CoxModel {
    pub columns: Vec<String>,
    pub labels: Vec<String>,
    pub blocks: Vec<String>,
    pub coefficients: DVector<f64>,
    /// Inverse observed information.
    pub covariance_model: DMatrix<f64>,
    /// Cluster-robust sandwich covariance.
    pub covariance_clustered: DMatrix<f64>,
    pub log_likelihood: f64,
    pub ties: TiesMethod,
    pub iterations: usize,
    pub converged: bool,
    pub n_observations: usize,
    pub n_events: usize,
    pub n_clusters: usize,
    pub baseline: Vec<BaselineStep>,
    /// Log-likelihood after each accepted Newton step, starting value first.
    pub trace: Vec<f64>,
}

impl CoxModel {
    pub fn n_params(&self) -> usize {
        self.columns.len()
    }

    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.columns
            .iter()
            .position(|c| c == name)
            .map(|j| self.coefficients[j])
    }

    pub fn se_model(&self) -> Vec<f64> {
        (0..self.n_params())
            .map(|j| self.covariance_model[(j, j)].max(0.0).sqrt())
            .collect()
    }

    pub fn se_clustered(&self) -> Vec<f64> {
        (0..self.n_params())
            .map(|j| self.covariance_clustered[(j, j)].max(0.0).sqrt())
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serialises")
    }

    pub fn from_json(text: &str) -> Result<Self, CoxError> {
        serde_json::from_str(text).map_err(|e| CoxError::InvalidInput(e.to_string()))
    }
}

/// Persisted layout: matrices flattened row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelFile {
    version: String,
    columns: Vec<String>,
    labels: Vec<String>,
    blocks: Vec<String>,
    coefficients: Vec<f64>,
    covariance_model: Vec<f64>,
    covariance_clustered: Vec<f64>,
    log_likelihood: f64,
    ties: TiesMethod,
    iterations: usize,
    converged: bool,
    n_observations: usize,
    n_events: usize,
    n_clusters: usize,
    baseline: Vec<BaselineStep>,
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

impl From<CoxModel> for ModelFile {
    fn from(m: CoxModel) -> Self {
        ModelFile {
            version: env!("CARGO_PKG_VERSION").to_string(),
            coefficients: m.coefficients.as_slice().to_vec(),
            covariance_model: row_major(&m.covariance_model),
            covariance_clustered: row_major(&m.covariance_clustered),
            columns: m.columns,
            labels: m.labels,
            blocks: m.blocks,
            log_likelihood: m.log_likelihood,
            ties: m.ties,
            iterations: m.iterations,
            converged: m.converged,
            n_observations: m.n_observations,
            n_events: m.n_events,
            n_clusters: m.n_clusters,
            baseline: m.baseline,
        }
    }
}

impl TryFrom<ModelFile> for CoxModel {
    type Error = String;

    fn try_from(f: ModelFile) -> Result<Self, Self::Error> {
        let p = f.columns.len();
        if f.coefficients.len() != p || f.labels.len() != p || f.blocks.len() != p {
            return Err(format!(
                "model lists {p} columns but vectors differ in length"
            ));
        }
        if f.covariance_model.len() != p * p || f.covariance_clustered.len() != p * p {
            return Err(format!("covariance matrices must hold {} entries", p * p));
        }
        Ok(CoxModel {
            coefficients: DVector::from_vec(f.coefficients),
            covariance_model: DMatrix::from_row_slice(p, p, &f.covariance_model),
            covariance_clustered: DMatrix::from_row_slice(p, p, &f.covariance_clustered),
            columns: f.columns,
            labels: f.labels,
            blocks: f.blocks,
            log_likelihood: f.log_likelihood,
            ties: f.ties,
            iterations: f.iterations,
            converged: f.converged,
            n_observations: f.n_observations,
            n_events: f.n_events,
            n_clusters: f.n_clusters,
            baseline: f.baseline,
            trace: Vec::new(),
        })
    }
}

/// Maximises the partial likelihood from `beta = 0`.
pub fn fit_cox(x: &DesignMatrix, options: &FitOptions) -> Result<CoxModel, CoxError> {
    fit_from(x, options, vec![0.0; x.n_cols()])
}

pub(crate) fn fit_from(
    x: &DesignMatrix,
    options: &FitOptions,
    start: Vec<f64>,
) -> Result<CoxModel, CoxError> {
    if !(options.tol > 0.0) || options.max_iter == 0 {
        return Err(CoxError::InvalidInput(
            "tolerance must be positive and max_iter at least 1".into(),
        ));
    }
    if x.n_events() == 0 {
        return Err(CoxError::NoEvents);
    }
    if let Some(c) = x.degenerate_columns().first() {
        return Err(CoxError::NonIdentifiable {
            column: Some(c.clone()),
        });
    }
    let lik = PartialLikelihood::new(x, options.ties)?;
    let p = x.n_cols();

    let mut beta = DVector::from_vec(start);
    let mut eval = lik.evaluate(beta.as_slice())?;
    let mut trace = vec![eval.value];
    let mut iterations = 0;
    let mut converged = p == 0;
    // The last accepted step changed the log-likelihood by less than `tol`.
    let mut settled = false;

    while !converged {
        let info = -&eval.hessian;
        let chol = info
            .cholesky()
            .ok_or(CoxError::NonIdentifiable { column: None })?;
        let step = chol.solve(&eval.gradient);
        // A settled likelihood alone is not enough: along a monotone direction
        // it flattens while the Newton step stays near 1.
        let small = (0..p).all(|j| step[j].abs() <= options.tol.sqrt() * beta[j].abs().max(1.0));
        if settled && small {
            converged = true;
            break;
        }
        if iterations == options.max_iter {
            return Err(CoxError::NotConverged { iterations });
        }
        iterations += 1;

        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=options.max_halvings {
            let candidate = &beta + &step * scale;
            let value = lik.value(candidate.as_slice())?;
            if value.is_finite() && value >= eval.value {
                accepted = Some(candidate);
                break;
            }
            scale *= 0.5;
        }
        let Some(candidate) = accepted else {
            // No ascent along the Newton direction at working precision.
            converged = true;
            break;
        };

        if let Some(j) = (0..p).find(|&j| candidate[j].abs() > options.max_abs_beta) {
            return Err(CoxError::MonotoneLikelihood {
                column: x.names()[j].clone(),
                limit: options.max_abs_beta,
                iteration: iterations,
            });
        }

        let next = lik.evaluate(candidate.as_slice())?;
        let change = (next.value - eval.value).abs() / next.value.abs().max(f64::MIN_POSITIVE);
        beta = candidate;
        eval = next;
        trace.push(eval.value);
        settled = change < options.tol;
        if eval.gradient.amax() < 1e-8 {
            converged = true;
        }
    }

    let (covariance_model, covariance_clustered) = if p == 0 {
        (DMatrix::zeros(0, 0), DMatrix::zeros(0, 0))
    } else {
        let info = -&eval.hessian;
        let bread = info
            .cholesky()
            .ok_or(CoxError::SingularInformation)?
            .inverse();
        let meat_cov = sandwich(&lik, beta.as_slice(), &bread, x.clusters())?;
        (symmetrize(bread), meat_cov)
    };

    Ok(CoxModel {
        columns: x.names().to_vec(),
        labels: x.labels().to_vec(),
        blocks: x.column_blocks().to_vec(),
        coefficients: beta,
        covariance_model,
        covariance_clustered,
        log_likelihood: eval.value,
        ties: options.ties,
        iterations,
        converged,
        n_observations: x.n_rows(),
        n_events: x.n_events(),
        n_clusters: x.cluster_labels().len(),
        baseline: Vec::new(),
        trace,
    })
}

pub(crate) fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tied_four() -> DesignMatrix {
        DesignMatrix::from_survival_times(
            vec!["x".into()],
            &[vec![1.0], vec![0.0], vec![1.0], vec![0.0]],
            &[1, 1, 2, 2],
            &[true; 4],
        )
        .unwrap()
    }

    #[test]
    fn tied_instance_optimum_is_zero() {
        for ties in [TiesMethod::Breslow, TiesMethod::Efron] {
            let m = fit_cox(&tied_four(), &FitOptions::with_ties(ties)).unwrap();
            assert!(m.coefficients[0].abs() < 1e-12);
            assert!(m.converged);
            assert_eq!(m.ties, ties);
        }
    }

    #[test]
    fn constant_column_is_not_identifiable() {
        let x = DesignMatrix::from_survival_times(
            vec!["x".into()],
            &[vec![1.0], vec![1.0], vec![1.0]],
            &[1, 2, 3],
            &[true, false, true],
        )
        .unwrap();
        assert_eq!(
            fit_cox(&x, &FitOptions::default()).unwrap_err(),
            CoxError::NonIdentifiable {
                column: Some("x".into())
            }
        );
    }

    #[test]
    fn perfectly_sorted_events_are_monotone() {
        // higher x always fails first: likelihood increases without bound
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![0.5 * (6.0 - i as f64)]).collect();
        let x = DesignMatrix::from_survival_times(
            vec!["x".into()],
            &rows,
            &[1, 2, 3, 4, 5, 6],
            &[true; 6],
        )
        .unwrap();
        assert!(matches!(
            fit_cox(&x, &FitOptions::default()),
            Err(CoxError::MonotoneLikelihood { .. })
        ));
    }

    #[test]
    fn flattening_likelihood_is_not_convergence() {
        // Every x = 1 subject leaves at t = 1 while x = 0 subjects are still
        // at risk; later events carry no information about beta.
        let mut rows = Vec::new();
        let (mut times, mut events) = (Vec::new(), Vec::new());
        for i in 0..6 {
            rows.push(vec![1.0]);
            times.push(1);
            events.push(true);
            rows.push(vec![0.0]);
            times.push(3);
            events.push(i % 2 == 0);
        }
        let x =
            DesignMatrix::from_survival_times(vec!["x".into()], &rows, &times, &events).unwrap();
        assert!(matches!(
            fit_cox(&x, &FitOptions::default()),
            Err(CoxError::MonotoneLikelihood { .. })
        ));
    }

    #[test]
    fn iteration_cap() {
        let x = DesignMatrix::from_survival_times(
            vec!["x".into()],
            &[vec![0.5], vec![-1.0], vec![2.0], vec![0.1], vec![1.0]],
            &[1, 2, 2, 3, 4],
            &[true, true, false, true, true],
        )
        .unwrap();
        let options = FitOptions {
            max_iter: 1,
            tol: 1e-300,
            ..FitOptions::default()
        };
        assert_eq!(
            fit_cox(&x, &options).unwrap_err(),
            CoxError::NotConverged { iterations: 1 }
        );
    }

    #[test]
    fn null_model() {
        let x = DesignMatrix::from_survival_times(
            vec![],
            &[vec![], vec![], vec![]],
            &[1, 1, 2],
            &[true, false, true],
        )
        .unwrap();
        let m = fit_cox(&x, &FitOptions::with_ties(TiesMethod::Breslow)).unwrap();
        assert_eq!(m.n_params(), 0);
        // ln(1/3) + ln(1/1)
        assert!((m.log_likelihood - (1.0f64 / 3.0).ln()).abs() < 1e-14);
    }

    #[test]
    fn json_round_trip() {
        let x = DesignMatrix::from_survival_times(
            vec!["a".into(), "b".into()],
            &[
                vec![1.0, 0.3],
                vec![0.0, 1.2],
                vec![1.0, -0.5],
                vec![0.0, 0.1],
                vec![1.0, 0.9],
                vec![0.0, -1.1],
            ],
            &[1, 1, 2, 3, 3, 4],
            &[true, false, true, true, false, true],
        )
        .unwrap();
        let m = fit_cox(&x, &FitOptions::default()).unwrap();
        let text = m.to_json();
        let back = CoxModel::from_json(&text).unwrap();
        assert_eq!(back.coefficients, m.coefficients);
        assert_eq!(back.covariance_model, m.covariance_model);
        assert_eq!(back.covariance_clustered, m.covariance_clustered);
        let raw: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(raw["covariance_model"].as_array().unwrap().len(), 4);
        assert_eq!(
            raw["covariance_model"][1].as_f64().unwrap(),
            m.covariance_model[(0, 1)]
        );
        assert_eq!(raw["ties"], "efron");
        assert!(raw["version"].is_string());
    }
}
