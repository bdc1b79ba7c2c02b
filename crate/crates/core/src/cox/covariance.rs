use nalgebra::DMatrix;

use super::fit::{symmetrize, CoxModel};
use super::likelihood::PartialLikelihood;
use super::CoxError;
use crate::panel::DesignMatrix;

/// `bread * (sum_c g_c g_c^T) * bread`, where `g_c` sums the score residuals
/// of the rows in cluster `c`.
pub(crate) fn sandwich(
    lik: &PartialLikelihood<'_>,
    beta: &[f64],
    bread: &DMatrix<f64>,
    clusters: &[usize],
) -> Result<DMatrix<f64>, CoxError> {
    let p = beta.len();
    let resid = lik.score_residuals(beta)?;
    if clusters.len() != resid.len() {
        return Err(CoxError::InvalidInput(format!(
            "{} cluster ids for {} rows",
            clusters.len(),
            resid.len()
        )));
    }
    let n_clusters = clusters.iter().copied().max().map_or(0, |m| m + 1);
    let mut totals = vec![vec![0.0; p]; n_clusters];
    for (row, &c) in resid.iter().zip(clusters) {
        for k in 0..p {
            totals[c][k] += row[k];
        }
    }
    let mut meat = DMatrix::<f64>::zeros(p, p);
    for g in &totals {
        for a in 0..p {
            for b in 0..p {
                meat[(a, b)] += g[a] * g[b];
            }
        }
    }
    Ok(symmetrize(bread * meat * bread))
}

fn bread<'a>(
    model: &CoxModel,
    x: &'a DesignMatrix,
) -> Result<(PartialLikelihood<'a>, DMatrix<f64>), CoxError> {
    if !model.converged {
        return Err(CoxError::InvalidInput("model has not converged".into()));
    }
    if model.columns.as_slice() != x.names() {
        return Err(CoxError::DimensionMismatch {
            expected: model.n_params(),
            got: x.n_cols(),
        });
    }
    let lik = PartialLikelihood::new(x, model.ties)?;
    let eval = lik.evaluate(model.coefficients.as_slice())?;
    let bread = (-eval.hessian)
        .cholesky()
        .ok_or(CoxError::SingularInformation)?
        .inverse();
    Ok((lik, bread))
}

/// Cluster-robust covariance of a fitted model; `clusters[i]` is the cluster
/// index of row `i` (any non-negative labels).
pub fn clustered_covariance(
    model: &CoxModel,
    x: &DesignMatrix,
    clusters: &[usize],
) -> Result<DMatrix<f64>, CoxError> {
    let (lik, bread) = bread(model, x)?;
    sandwich(&lik, model.coefficients.as_slice(), &bread, clusters)
}

/// Sandwich covariance with every row its own cluster.
pub fn robust_covariance(model: &CoxModel, x: &DesignMatrix) -> Result<DMatrix<f64>, CoxError> {
    let singletons: Vec<usize> = (0..x.n_rows()).collect();
    clustered_covariance(model, x, &singletons)
}
