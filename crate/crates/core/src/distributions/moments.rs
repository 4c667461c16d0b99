use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Denominator used for the sample standard deviation Ŝ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SdConvention {
    /// n − 1 denominator.
    #[default]
    Unbiased,
    /// n denominator.
    Population,
}

/// Replicate summary statistics at a single input location.
///
/// Skewness is `(1/n) Σ (y − ȳ)³ / Ŝ³` and excess kurtosis
/// `(1/n) Σ (y − ȳ)⁴ / Ŝ⁴ − 3`, with Ŝ taken from the chosen
/// [`SdConvention`]. Neither is bias corrected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleMoments {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub variance: f64,
    pub skewness: Option<f64>,
    pub excess_kurtosis: Option<f64>,
}

impl SampleMoments {
    pub fn is_degenerate(&self) -> bool {
        self.sd == 0.0
    }
}

pub fn sample_moments(values: &[f64]) -> Result<SampleMoments> {
    sample_moments_with(values, SdConvention::Unbiased)
}

pub fn sample_moments_with(values: &[f64], convention: SdConvention) -> Result<SampleMoments> {
    let n = values.len();
    if n < 2 {
        return Err(Error::InsufficientReplication { needed: 2, got: n });
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in values {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let denom = match convention {
        SdConvention::Unbiased => nf - 1.0,
        SdConvention::Population => nf,
    };
    let mut variance = m2 / denom;
    let scale = values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    // identical values can leave rounding-level residue in the deviations
    let degenerate =
        values.iter().all(|&v| v == values[0]) || variance.sqrt() <= 64.0 * f64::EPSILON * scale;
    if degenerate {
        variance = 0.0;
    }
    let sd = variance.sqrt();
    let skewness = (n >= 3 && !degenerate).then(|| (m3 / nf) / (sd * sd * sd));
    let excess_kurtosis = (n >= 4 && !degenerate).then(|| (m4 / nf) / (variance * variance) - 3.0);
    Ok(SampleMoments {
        n,
        mean,
        sd,
        variance,
        skewness,
        excess_kurtosis,
    })
}

/// Sample skewness only; `None` when n < 3 or the values are constant.
pub fn sample_skewness(values: &[f64], convention: SdConvention) -> Option<f64> {
    sample_moments_with(values, convention).ok()?.skewness
}

pub fn sample_excess_kurtosis(values: &[f64], convention: SdConvention) -> Option<f64> {
    sample_moments_with(values, convention)
        .ok()?
        .excess_kurtosis
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn symmetric_set() {
        let m = sample_moments(&[-1.0, 0.0, 1.0]).unwrap();
        assert_eq!(m.mean, 0.0);
        assert_eq!(m.skewness, Some(0.0));
        assert_eq!(m.excess_kurtosis, None);
    }

    #[test]
    fn hand_evaluated_skewness() {
        let m = sample_moments(&[0.0, 0.0, 0.0, 1.0]).unwrap();
        assert!((m.mean - 0.25).abs() < 1e-15);
        assert!((m.sd - 0.5).abs() < 1e-15);
        assert!((m.skewness.unwrap() - 0.75).abs() < 1e-14);
        // (1/4)(3 * 0.25^4 + 0.75^4) / 0.5^4 - 3
        let kurt = 0.25 * (3.0 * 0.25f64.powi(4) + 0.75f64.powi(4)) / 0.0625 - 3.0;
        assert!((m.excess_kurtosis.unwrap() - kurt).abs() < 1e-14);
    }

    #[test]
    fn population_convention() {
        let m = sample_moments_with(&[0.0, 0.0, 0.0, 1.0], SdConvention::Population).unwrap();
        assert!((m.variance - 0.1875).abs() < 1e-15);
        assert!((m.skewness.unwrap() - 0.09375 / 0.1875f64.powf(1.5)).abs() < 1e-13);
    }

    #[test]
    fn too_few_values() {
        assert!(matches!(
            sample_moments(&[1.0]),
            Err(Error::InsufficientReplication { needed: 2, got: 1 })
        ));
    }

    #[test]
    fn constant_values_are_flagged_not_nan() {
        let m = sample_moments(&[0.1, 0.1, 0.1, 0.1]).unwrap();
        assert!(m.is_degenerate());
        assert_eq!(m.skewness, None);
        assert_eq!(m.excess_kurtosis, None);
    }

    proptest! {
        #[test]
        fn shift_invariance(
            xs in prop::collection::vec(-10.0f64..10.0, 4..40),
            c in -100.0f64..100.0,
        ) {
            let a = sample_moments(&xs).unwrap();
            prop_assume!(a.sd > 1e-3);
            let shifted: Vec<f64> = xs.iter().map(|x| x + c).collect();
            let b = sample_moments(&shifted).unwrap();
            prop_assert!((b.mean - a.mean - c).abs() < 1e-10 * (1.0 + c.abs()));
            prop_assert!((b.sd - a.sd).abs() <= 1e-12 * a.sd * (1.0 + c.abs()));
            let (sa, sb) = (a.skewness.unwrap(), b.skewness.unwrap());
            prop_assert!((sa - sb).abs() <= 1e-10 * (1.0 + c.abs()) * (1.0 + sa.abs()));
            let (ka, kb) = (a.excess_kurtosis.unwrap(), b.excess_kurtosis.unwrap());
            prop_assert!((ka - kb).abs() <= 1e-10 * (1.0 + c.abs()) * (1.0 + ka.abs()));
        }

        #[test]
        fn scale_invariance(
            xs in prop::collection::vec(-10.0f64..10.0, 4..40),
            k in 0.01f64..100.0,
        ) {
            let a = sample_moments(&xs).unwrap();
            prop_assume!(a.sd > 1e-3);
            let scaled: Vec<f64> = xs.iter().map(|x| x * k).collect();
            let b = sample_moments(&scaled).unwrap();
            prop_assert!((b.sd - k * a.sd).abs() <= 1e-12 * k * a.sd);
            prop_assert!((b.skewness.unwrap() - a.skewness.unwrap()).abs() < 1e-11);
            prop_assert!((b.excess_kurtosis.unwrap() - a.excess_kurtosis.unwrap()).abs() < 1e-10);
        }
    }
}
