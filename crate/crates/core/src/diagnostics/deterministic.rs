//! Single-run diagnostics: standardized errors, pivoted Cholesky errors,
//! QQ pairs and credible-interval coverage.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::distributions::std_normal_quantile;
use crate::emulator::PointPrediction;
use crate::error::{domain, Error, Result};

/// eᵢ = (yᵢ − Mᵢ) / √(Vᵢ + σᵢ²)
pub fn standardized_errors(preds: &[PointPrediction], y: &[f64]) -> Result<Vec<f64>> {
    if preds.len() != y.len() {
        return domain(format!(
            "{} predictions for {} observations",
            preds.len(),
            y.len()
        ));
    }
    preds
        .iter()
        .zip(y)
        .map(|(p, &yi)| {
            let v = p.total_variance();
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Numerical(format!(
                    "total predictive variance {v} is not positive"
                )));
            }
            Ok((yi - p.mean) / v.sqrt())
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PivotedErrors {
    /// Errors in pivot order.
    pub errors: Vec<f64>,
    /// Index of the observation used at each pivot step.
    pub pivot_order: Vec<usize>,
}

/// Decorrelated errors G⁻¹Pᵀ(y − m) from the pivoted factorization
/// PᵀΣP = GGᵀ. Pivots take the largest remaining conditional variance, the
/// lowest index on ties.
pub fn pivoted_cholesky_errors(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    y: &[f64],
) -> Result<PivotedErrors> {
    let n = y.len();
    if mean.len() != n || cov.nrows() != n || cov.ncols() != n {
        return domain("mean, covariance and observations have inconsistent sizes");
    }
    if n == 0 {
        return domain("no observations");
    }
    let mut d: Vec<f64> = cov.diagonal().iter().copied().collect();
    let scale = d.iter().copied().fold(0.0, f64::max);
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::Numerical(
            "covariance diagonal is not positive".into(),
        ));
    }
    // l[i] holds row i of the factor, indexed by original observation
    let mut l = vec![vec![0.0; n]; n];
    let mut picked = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for k in 0..n {
        let mut best = usize::MAX;
        for j in 0..n {
            if !picked[j] && (best == usize::MAX || d[j] > d[best]) {
                best = j;
            }
        }
        if !(d[best] > 1e-14 * scale) {
            return Err(Error::Numerical(format!(
                "covariance is singular at pivot step {k}"
            )));
        }
        picked[best] = true;
        order.push(best);
        let g = d[best].sqrt();
        l[best][k] = g;
        for i in 0..n {
            if picked[i] {
                continue;
            }
            let s: f64 = (0..k).map(|t| l[i][t] * l[best][t]).sum();
            let v = (cov[(i, best)] - s) / g;
            l[i][k] = v;
            d[i] -= v * v;
        }
    }
    let mut errors = vec![0.0; n];
    for a in 0..n {
        let row = &l[order[a]];
        let s: f64 = (0..a).map(|b| row[b] * errors[b]).sum();
        errors[a] = (y[order[a]] - mean[order[a]] - s) / row[a];
    }
    Ok(PivotedErrors {
        errors,
        pivot_order: order,
    })
}

/// (theoretical N(0,1) quantile at (i − 0.5)/n, i-th sorted error).
pub fn qq_points(errors: &[f64]) -> Result<Vec<(f64, f64)>> {
    if errors.is_empty() {
        return domain("QQ plot needs at least one value");
    }
    let mut s = errors.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &v)| Ok((std_normal_quantile((i as f64 + 0.5) / n)?, v)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoveragePoint {
    pub level: f64,
    pub coverage: f64,
}

/// Fraction of observations inside the central `level` predictive interval
/// M ± z·√(V + σ²), for each level.
pub fn credible_interval_coverage(
    preds: &[PointPrediction],
    y: &[f64],
    levels: &[f64],
) -> Result<Vec<CoveragePoint>> {
    let e = standardized_errors(preds, y)?;
    levels
        .iter()
        .map(|&level| {
            if !(0.0..=1.0).contains(&level) {
                return domain(format!("coverage level {level} is outside [0, 1]"));
            }
            let half = if level >= 1.0 {
                f64::INFINITY
            } else {
                std_normal_quantile(0.5 + 0.5 * level)?
            };
            let inside = e.iter().filter(|v| v.abs() <= half).count();
            Ok(CoveragePoint {
                level,
                coverage: inside as f64 / e.len() as f64,
            })
        })
        .collect()
}
