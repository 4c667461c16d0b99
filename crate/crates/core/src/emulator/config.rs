use serde::{Deserialize, Serialize};

use super::optim::NelderMeadSettings;
use crate::error::{domain, Result};

/// Hyperparameter search and heteroscedastic-loop settings. Variances refer
/// to standardized outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GpFitConfig {
    pub n_starts: usize,
    pub lengthscale_bounds: (f64, f64),
    pub variance_bounds: (f64, f64),
    pub lengthscale_start: (f64, f64),
    pub signal_variance_start: (f64, f64),
    pub nugget_start: (f64, f64),
    pub optimizer: NelderMeadSettings,
    pub het_max_iterations: usize,
    /// Largest change of the standardized training-point mean that counts
    /// as converged.
    pub het_tolerance: f64,
}

impl Default for GpFitConfig {
    fn default() -> Self {
        Self {
            n_starts: 10,
            lengthscale_bounds: (1e-3, 10.0),
            variance_bounds: (1e-8, 1e3),
            lengthscale_start: (0.05, 1.0),
            signal_variance_start: (0.1, 3.0),
            nugget_start: (1e-3, 1.0),
            optimizer: NelderMeadSettings::default(),
            het_max_iterations: 20,
            het_tolerance: 1e-4,
        }
    }
}

fn check_range(name: &str, r: (f64, f64)) -> Result<()> {
    if !(r.0 > 0.0 && r.0 <= r.1 && r.1.is_finite()) {
        return domain(format!("{name} must satisfy 0 < low <= high < inf"));
    }
    Ok(())
}

impl GpFitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_starts == 0 {
            return domain("n_starts must be >= 1");
        }
        check_range("lengthscale_bounds", self.lengthscale_bounds)?;
        check_range("variance_bounds", self.variance_bounds)?;
        check_range("lengthscale_start", self.lengthscale_start)?;
        check_range("signal_variance_start", self.signal_variance_start)?;
        check_range("nugget_start", self.nugget_start)?;
        if self.het_max_iterations == 0 {
            return domain("het_max_iterations must be >= 1");
        }
        if !(self.het_tolerance > 0.0) {
            return domain("het_tolerance must be > 0");
        }
        Ok(())
    }

    /// Log-space box for `[ln ℓ_1..d, ln σ_f², (ln g)]`.
    pub(crate) fn log_bounds(&self, d: usize, with_nugget: bool) -> (Vec<f64>, Vec<f64>) {
        let (l_lo, l_hi) = self.lengthscale_bounds;
        let (v_lo, v_hi) = self.variance_bounds;
        let k = if with_nugget { 2 } else { 1 };
        let mut lo = vec![l_lo.ln(); d];
        let mut hi = vec![l_hi.ln(); d];
        lo.extend(std::iter::repeat_n(v_lo.ln(), k));
        hi.extend(std::iter::repeat_n(v_hi.ln(), k));
        (lo, hi)
    }

    pub(crate) fn log_start_ranges(&self, d: usize, with_nugget: bool) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![self.lengthscale_start.0.ln(); d];
        let mut hi = vec![self.lengthscale_start.1.ln(); d];
        lo.push(self.signal_variance_start.0.ln());
        hi.push(self.signal_variance_start.1.ln());
        if with_nugget {
            lo.push(self.nugget_start.0.ln());
            hi.push(self.nugget_start.1.ln());
        }
        (lo, hi)
    }

    /// ℓ = 0.2, σ_f² = 1, g = 0.1.
    pub(crate) fn default_start(&self, d: usize, with_nugget: bool) -> Vec<f64> {
        let mut v = vec![0.2f64.ln(); d];
        v.push(0.0);
        if with_nugget {
            v.push(0.1f64.ln());
        }
        v
    }
}
