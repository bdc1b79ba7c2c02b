use serde::Serialize;

use super::SynthError;
use crate::cox::{PartialLikelihood, TiesMethod};
use crate::panel::DesignMatrix;

/// Cap on evaluated grid points, to keep a mistyped resolution from hanging.
const MAX_GRID_POINTS: usize = 50_000_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridOptimum {
    pub beta: Vec<f64>,
    pub value: f64,
    /// The best point lies on the edge of the grid, as it does when the
    /// likelihood keeps rising past the bounds.
    pub monotone_suspected: bool,
}

/// Exhaustive search of the partial likelihood over `[lo, hi]^p` at spacing
/// `resolution`, for `p <= 2`.
pub fn grid_search_mle(
    x: &DesignMatrix,
    bounds: (f64, f64),
    resolution: f64,
    ties: TiesMethod,
) -> Result<GridOptimum, SynthError> {
    let p = x.n_cols();
    if p > 2 {
        return Err(SynthError::TooManyColumns(p));
    }
    let (lo, hi) = bounds;
    if !(lo.is_finite() && hi.is_finite() && lo < hi)
        || !(resolution > 0.0 && resolution.is_finite())
    {
        return Err(SynthError::BadSpec(
            "grid needs finite bounds lo < hi and a positive resolution".into(),
        ));
    }
    let steps = ((hi - lo) / resolution).round() as usize;
    let per_axis = steps + 1;
    if per_axis.saturating_pow(p as u32) > MAX_GRID_POINTS {
        return Err(SynthError::BadSpec(format!(
            "grid of {per_axis}^{p} points is too large"
        )));
    }
    let lik = PartialLikelihood::new(x, ties)?;
    let coord = |i: usize| {
        if i == steps {
            hi
        } else {
            lo + i as f64 * resolution
        }
    };

    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut idx = vec![0usize; p];
    loop {
        let beta: Vec<f64> = idx.iter().map(|&i| coord(i)).collect();
        let v = lik.value(&beta)?;
        if v.is_finite() && best.as_ref().map_or(true, |(b, _)| v > *b) {
            best = Some((v, idx.clone()));
        }
        // Odometer increment over the p axes.
        let mut k = 0;
        while k < p {
            idx[k] += 1;
            if idx[k] <= steps {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == p {
            break;
        }
    }
    let (value, idx) =
        best.ok_or_else(|| SynthError::BadSpec("likelihood is not finite on the grid".into()))?;
    Ok(GridOptimum {
        beta: idx.iter().map(|&i| coord(i)).collect(),
        value,
        monotone_suspected: idx.iter().any(|&i| i == 0 || i == steps),
    })
}

/// Worst discrepancies between analytic and central-difference derivatives.
///
/// Each error is `max|analytic - numeric| / max(1, max|numeric|, max|analytic|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivativeErrors {
    pub gradient: f64,
    pub hessian: f64,
    /// `max|H - H^T|` of the analytic Hessian.
    pub hessian_asymmetry: f64,
}

pub fn finite_diff_check(
    x: &DesignMatrix,
    beta: &[f64],
    step: f64,
    ties: TiesMethod,
) -> Result<DerivativeErrors, SynthError> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(SynthError::BadStep(step));
    }
    let lik = PartialLikelihood::new(x, ties)?;
    let eval = lik.evaluate(beta)?;
    let p = beta.len();

    let shifted = |j: usize, h: f64| {
        let mut b = beta.to_vec();
        b[j] += h;
        b
    };
    let mut num_grad = vec![0.0; p];
    let mut num_hess = vec![vec![0.0; p]; p];
    for j in 0..p {
        let plus = shifted(j, step);
        let minus = shifted(j, -step);
        num_grad[j] = (lik.value(&plus)? - lik.value(&minus)?) / (2.0 * step);
        let gp = lik.evaluate(&plus)?.gradient;
        let gm = lik.evaluate(&minus)?.gradient;
        for i in 0..p {
            num_hess[i][j] = (gp[i] - gm[i]) / (2.0 * step);
        }
    }

    let rel = |pairs: Vec<(f64, f64)>| {
        let diff = pairs.iter().map(|(a, n)| (a - n).abs()).fold(0.0, f64::max);
        let scale = pairs
            .iter()
            .flat_map(|(a, n)| [a.abs(), n.abs()])
            .fold(1.0, f64::max);
        diff / scale
    };
    let gradient = rel((0..p).map(|j| (eval.gradient[j], num_grad[j])).collect());
    let hessian = rel((0..p)
        .flat_map(|i| (0..p).map(move |j| (i, j)))
        .map(|(i, j)| (eval.hessian[(i, j)], num_hess[i][j]))
        .collect());
    let hessian_asymmetry = if p == 0 {
        0.0
    } else {
        (&eval.hessian - eval.hessian.transpose()).amax()
    };
    Ok(DerivativeErrors {
        gradient,
        hessian,
        hessian_asymmetry,
    })
}
