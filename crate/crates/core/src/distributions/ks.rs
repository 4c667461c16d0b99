//! One-sample Kolmogorov–Smirnov test.

use crate::error::{domain, Result};

/// sup |F_n − F| for a continuous reference CDF `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(values: &[f64], cdf: F) -> Result<f64> {
    if values.is_empty() {
        return domain("KS statistic needs at least one value");
    }
    if values.iter().any(|v| v.is_nan()) {
        return domain("KS statistic got NaN");
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in v.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    Ok(d)
}

/// Asymptotic p-value of the KS statistic `d` with sample size `n`, using
/// Stephens' small-sample adjustment of the Kolmogorov series.
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * lambda * lambda).exp();
        sum += if k as u64 % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// KS p-value of `values` against Uniform(lo, hi).
pub fn ks_uniform_pvalue(values: &[f64], lo: f64, hi: f64) -> Result<f64> {
    let d = ks_statistic(values, |x| ((x - lo) / (hi - lo)).clamp(0.0, 1.0))?;
    Ok(ks_pvalue(d, values.len()))
}
