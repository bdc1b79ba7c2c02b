use nalgebra::{DMatrix, DVector};
use serde::{Serialize, Serializer};

use super::CoxError;
use crate::panel::DesignMatrix;

/// R² at or above `1 - COLLINEAR_TOL` counts as perfect collinearity.
const COLLINEAR_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VifEntry {
    pub name: String,
    #[serde(serialize_with = "finite_or_null")]
    pub vif: f64,
    pub perfectly_collinear: bool,
}

fn finite_or_null<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

/// Variance inflation factors from auxiliary regressions (with intercept) of
/// each column on all the others.
pub fn vif(x: &DesignMatrix) -> Result<Vec<VifEntry>, CoxError> {
    let p = x.n_cols();
    let n = x.n_rows();
    if p < 2 {
        return Err(CoxError::InvalidInput(
            "VIF needs at least two columns".into(),
        ));
    }
    if let Some(c) = x.degenerate_columns().first() {
        return Err(CoxError::NonIdentifiable {
            column: Some(c.clone()),
        });
    }

    // Centering absorbs the intercept of every auxiliary regression.
    let means: Vec<f64> = (0..p)
        .map(|j| (0..n).map(|i| x.value(i, j)).sum::<f64>() / n as f64)
        .collect();
    let z = DMatrix::from_fn(n, p, |i, j| x.value(i, j) - means[j]);
    let gram = z.transpose() * &z;

    (0..p)
        .map(|j| {
            let others: Vec<usize> = (0..p).filter(|&k| k != j).collect();
            let sub = DMatrix::from_fn(p - 1, p - 1, |a, b| gram[(others[a], others[b])]);
            let rhs = DVector::from_fn(p - 1, |a, _| gram[(others[a], j)]);
            let scale = sub.amax().max(f64::MIN_POSITIVE);
            let coef = sub
                .svd(true, true)
                .solve(&rhs, scale * 1e-13)
                .map_err(|e| CoxError::InvalidInput(e.to_string()))?;
            let total = gram[(j, j)];
            let explained = rhs.dot(&coef);
            let r2 = (explained / total).clamp(0.0, 1.0);
            let collinear = r2 >= 1.0 - COLLINEAR_TOL;
            Ok(VifEntry {
                name: x.names()[j].clone(),
                vif: if collinear {
                    f64::INFINITY
                } else {
                    1.0 / (1.0 - r2)
                },
                perfectly_collinear: collinear,
            })
        })
        .collect()
}
