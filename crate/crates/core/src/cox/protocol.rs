use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::fit::{fit_from, CoxModel, FitOptions};
use super::report::{hazard_ratio_table, CoefficientRow};
use super::vif::{vif, VifEntry};
use super::{CoxError, TiesMethod};
use crate::panel::{design_matrix, BlockSpec, Dataset, DesignMatrix};

/// `(AIC, BIC)` with `AIC = -2LL + 2k` and `BIC = -2LL + k ln n`.
pub fn information_criteria(log_likelihood: f64, k: usize, n: usize) -> (f64, f64) {
    let deviance = -2.0 * log_likelihood;
    let k = k as f64;
    (deviance + 2.0 * k, deviance + k * (n.max(1) as f64).ln())
}

/// Wald test that the coefficients of one entered block are jointly zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockTest {
    pub block: String,
    pub df: usize,
    pub chi2: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    /// 1-based position in the hierarchical sequence.
    pub model: usize,
    pub coefficients: Vec<CoefficientRow>,
    pub block_test: Option<BlockTest>,
    pub log_likelihood: f64,
    pub aic: f64,
    pub bic: f64,
    pub n_observations: usize,
    pub n_events: usize,
    pub n_clusters: usize,
    pub k: usize,
    pub ties: TiesMethod,
    pub iterations: usize,
    /// Empty when the model has fewer than two columns.
    pub vif: Vec<VifEntry>,
}

impl FitReport {
    fn build(
        index: usize,
        model: &CoxModel,
        x: &DesignMatrix,
        block: Option<&str>,
    ) -> Result<Self, CoxError> {
        let (aic, bic) =
            information_criteria(model.log_likelihood, model.n_params(), model.n_observations);
        let block_test = match block {
            Some(name) => Some(wald_block_test(model, name)?),
            None => None,
        };
        let vif = if x.n_cols() >= 2 { vif(x)? } else { Vec::new() };
        Ok(Self {
            model: index,
            coefficients: hazard_ratio_table(model),
            block_test,
            log_likelihood: model.log_likelihood,
            aic,
            bic,
            n_observations: model.n_observations,
            n_events: model.n_events,
            n_clusters: model.n_clusters,
            k: model.n_params(),
            ties: model.ties,
            iterations: model.iterations,
            vif,
        })
    }
}

/// Wald chi-square for the columns of `block`, using the clustered covariance.
pub(crate) fn wald_block_test(model: &CoxModel, block: &str) -> Result<BlockTest, CoxError> {
    let idx: Vec<usize> = (0..model.n_params())
        .filter(|&j| model.blocks[j] == block)
        .collect();
    if idx.is_empty() {
        return Err(CoxError::InvalidInput(format!(
            "model has no columns in block `{block}`"
        )));
    }
    let b = DVector::from_iterator(idx.len(), idx.iter().map(|&j| model.coefficients[j]));
    let v = DMatrix::from_fn(idx.len(), idx.len(), |r, c| {
        model.covariance_clustered[(idx[r], idx[c])]
    });
    let solved = v
        .clone()
        .cholesky()
        .map(|ch| ch.solve(&b))
        .or_else(|| v.lu().solve(&b))
        .ok_or(CoxError::SingularInformation)?;
    let chi2 = b.dot(&solved).max(0.0);
    let df = idx.len();
    let p_value = ChiSquared::new(df as f64)
        .map(|d| d.sf(chi2))
        .unwrap_or(f64::NAN);
    Ok(BlockTest {
        block: block.to_string(),
        df,
        chi2,
        p_value,
    })
}

/// Fits models 1..K, entering one block at a time in `spec` order.
pub fn hierarchical_fit(
    dataset: &Dataset,
    spec: &BlockSpec,
    options: &FitOptions,
) -> Result<Vec<(CoxModel, FitReport)>, CoxError> {
    let x = design_matrix(dataset, spec)?;
    hierarchical_fit_design(&x, options)
}

/// Hierarchical protocol on an assembled design. Each model starts from the
/// previous estimates with zeros for the new block, so the maximised
/// log-likelihood cannot fall from one model to the next.
pub fn hierarchical_fit_design(
    x: &DesignMatrix,
    options: &FitOptions,
) -> Result<Vec<(CoxModel, FitReport)>, CoxError> {
    let blocks = x.block_order();
    let mut out: Vec<(CoxModel, FitReport)> = Vec::with_capacity(blocks.len());
    for (k, block) in blocks.iter().enumerate() {
        let xk = x.leading_blocks(k + 1);
        let mut start = vec![0.0; xk.n_cols()];
        if let Some((prev, _)) = out.last() {
            start[..prev.n_params()].copy_from_slice(prev.coefficients.as_slice());
        }
        let model = fit_from(&xk, options, start)?;
        let report = FitReport::build(k + 1, &model, &xk, Some(block))?;
        out.push((model, report));
    }
    Ok(out)
}
