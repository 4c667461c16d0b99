use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::distributions::{GEN_NORMAL_MIN_EXCESS_KURTOSIS, SKEW_NORMAL_MAX_SKEWNESS};
use crate::error::{domain, Error, Result};
use crate::rng::RngStream;

/// Law of the tolerance draws over their interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToleranceShape {
    #[default]
    Uniform,
    /// Symmetric triangular, peaked at the interval midpoint.
    Triangular,
}

impl ToleranceShape {
    pub fn draw(self, lo: f64, hi: f64, rng: &mut RngStream) -> f64 {
        let t = match self {
            ToleranceShape::Uniform => rng.random::<f64>(),
            ToleranceShape::Triangular => 0.5 * (rng.random::<f64>() + rng.random::<f64>()),
        };
        lo + (hi - lo) * t
    }

    /// Inverse CDF on `[lo, hi]` at probability `p`.
    pub fn quantile(self, lo: f64, hi: f64, p: f64) -> f64 {
        let t = match self {
            ToleranceShape::Uniform => p,
            ToleranceShape::Triangular => {
                if p < 0.5 {
                    (0.5 * p).sqrt()
                } else {
                    1.0 - (0.5 * (1.0 - p)).sqrt()
                }
            }
        };
        lo + (hi - lo) * t
    }
}

/// One uniform draw inside each of `n` equal strata of (0, 1).
pub(crate) fn stratified_uniforms(n: usize, rng: &mut RngStream) -> impl Iterator<Item = f64> + '_ {
    (0..n).map(move |k| {
        let u: f64 = rng.random();
        ((k as f64 + u) / n as f64).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON)
    })
}

/// Tolerance to error for the variance, skewness and kurtosis diagnostics.
/// `None` disables the tolerance for that diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToleranceSpec {
    /// Multipliers (a, b) on the predicted sd.
    #[serde(with = "none_or")]
    pub sd: Option<(f64, f64)>,
    /// Half-width w of the skewness interval (−w, w).
    #[serde(with = "none_or")]
    pub skewness: Option<f64>,
    /// Half-width w of the excess-kurtosis interval (−w, w).
    #[serde(with = "none_or")]
    pub kurtosis: Option<f64>,
    pub shape: ToleranceShape,
}

impl Default for ToleranceSpec {
    fn default() -> Self {
        Self {
            sd: Some((0.8, 1.2)),
            skewness: Some(0.5),
            kurtosis: Some(0.5),
            shape: ToleranceShape::Uniform,
        }
    }
}

impl ToleranceSpec {
    pub fn none() -> Self {
        Self {
            sd: None,
            skewness: None,
            kurtosis: None,
            shape: ToleranceShape::Uniform,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some((a, b)) = self.sd {
            if !(a > 0.0 && a <= b && b.is_finite()) {
                return domain(format!("sd tolerance ({a}, {b}) must satisfy 0 < a <= b"));
            }
        }
        if let Some(w) = self.skewness {
            if !(w >= 0.0) {
                return domain("skewness tolerance must be >= 0");
            }
            if w >= SKEW_NORMAL_MAX_SKEWNESS {
                return Err(Error::UnattainableSkewness(w));
            }
        }
        if let Some(w) = self.kurtosis {
            if !(w >= 0.0) || !w.is_finite() {
                return domain("kurtosis tolerance must be a finite value >= 0");
            }
            if -w <= GEN_NORMAL_MIN_EXCESS_KURTOSIS {
                return Err(Error::UnattainableKurtosis(-w));
            }
        }
        Ok(())
    }
}

/// `None` as the string "none", otherwise the value itself.
mod none_or {
    use super::*;

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr<T> {
        Text(String),
        Value(T),
    }

    pub fn serialize<T: Serialize, S: Serializer>(
        v: &Option<T>,
        s: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        match v {
            Some(v) => v.serialize(s),
            None => s.serialize_str("none"),
        }
    }

    pub fn deserialize<'de, T: Deserialize<'de>, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<Option<T>, D::Error> {
        match Repr::<T>::deserialize(d)? {
            Repr::Value(v) => Ok(Some(v)),
            Repr::Text(t) if t.eq_ignore_ascii_case("none") => Ok(None),
            Repr::Text(t) => Err(serde::de::Error::custom(format!(
                "expected a tolerance value or \"none\", got {t:?}"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_with_none() {
        let t = ToleranceSpec {
            sd: None,
            ..ToleranceSpec::default()
        };
        let s = serde_json::to_string(&t).unwrap();
        assert!(s.contains("\"sd\":\"none\""));
        let back: ToleranceSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
        let partial: ToleranceSpec = serde_json::from_str(r#"{"skewness": 0.3}"#).unwrap();
        assert_eq!(partial.sd, Some((0.8, 1.2)));
        assert_eq!(partial.skewness, Some(0.3));
        assert!(serde_json::from_str::<ToleranceSpec>(r#"{"sd": "wide"}"#).is_err());
    }

    #[test]
    fn validation() {
        assert!(ToleranceSpec::default().validate().is_ok());
        let bad = ToleranceSpec {
            sd: Some((1.2, 0.8)),
            ..ToleranceSpec::none()
        };
        assert!(bad.validate().is_err());
        let bad = ToleranceSpec {
            skewness: Some(0.996),
            ..ToleranceSpec::none()
        };
        assert!(matches!(
            bad.validate(),
            Err(Error::UnattainableSkewness(_))
        ));
        let bad = ToleranceSpec {
            kurtosis: Some(1.3),
            ..ToleranceSpec::none()
        };
        assert!(matches!(
            bad.validate(),
            Err(Error::UnattainableKurtosis(_))
        ));
    }

    #[test]
    fn draws_stay_in_interval() {
        let mut rng = RngStream::new(1, 0);
        for shape in [ToleranceShape::Uniform, ToleranceShape::Triangular] {
            let v: Vec<f64> = (0..10_000)
                .map(|_| shape.draw(0.8, 1.2, &mut rng))
                .collect();
            assert!(v.iter().all(|x| (0.8..=1.2).contains(x)));
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            assert!((mean - 1.0).abs() < 0.005);
        }
    }

    #[test]
    fn triangular_quantile_matches_draws() {
        let s = ToleranceShape::Triangular;
        assert_eq!(s.quantile(0.8, 1.2, 0.5), 1.0);
        assert!((s.quantile(0.0, 1.0, 0.125) - 0.25).abs() < 1e-15);
        assert!((s.quantile(0.0, 1.0, 0.875) - 0.75).abs() < 1e-15);
        let mut rng = RngStream::new(2, 0);
        let below = (0..20_000)
            .filter(|_| s.draw(0.0, 1.0, &mut rng) < 0.25)
            .count();
        assert!((below as f64 / 20_000.0 - 0.125).abs() < 0.01);
    }
}
