//! Skew-normal and generalised-normal families.
//!
//! Both contain the normal distribution (α = 0, β = 2) and are used to turn a
//! tolerated skewness or excess kurtosis into a concrete sampling law.

use std::f64::consts::{FRAC_2_PI, PI};

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use super::special::ln_gamma;
use crate::error::{domain, Error, Result};
use crate::rng::RngStream;

/// Supremum of |skewness| over the skew-normal family (δ → 1).
pub const SKEW_NORMAL_MAX_SKEWNESS: f64 = 0.995_271_746_431_156;

/// Infimum of the generalised-normal excess kurtosis (β → ∞, uniform limit).
pub const GEN_NORMAL_MIN_EXCESS_KURTOSIS: f64 = -1.2;

fn skewness_from_delta(delta: f64) -> f64 {
    let u = delta * FRAC_2_PI.sqrt();
    (4.0 - PI) / 2.0 * u.powi(3) / (1.0 - u * u).powf(1.5)
}

fn delta_of(alpha: f64) -> f64 {
    if alpha.is_infinite() {
        alpha.signum()
    } else {
        alpha / (1.0 + alpha * alpha).sqrt()
    }
}

/// Skewness of the skew-normal distribution with shape `alpha`.
pub fn skew_normal_skewness(alpha: f64) -> f64 {
    skewness_from_delta(delta_of(alpha))
}

/// Shape α whose skew-normal skewness equals `gamma`.
///
/// Inverts in closed form through δ: with t = (|γ| / ((4 − π)/2))^(2/3),
/// δ² = (π/2) · t / (1 + t).
pub fn skewness_to_alpha(gamma: f64) -> Result<f64> {
    if !gamma.is_finite() || gamma.abs() >= SKEW_NORMAL_MAX_SKEWNESS {
        return Err(Error::UnattainableSkewness(gamma));
    }
    if gamma == 0.0 {
        return Ok(0.0);
    }
    let t = (gamma.abs() / ((4.0 - PI) / 2.0)).powf(2.0 / 3.0);
    let delta = (PI / 2.0 * t / (1.0 + t)).sqrt();
    if delta >= 1.0 {
        return Err(Error::UnattainableSkewness(gamma));
    }
    Ok(gamma.signum() * delta / (1.0 - delta * delta).sqrt())
}

/// Excess kurtosis Γ(5/β)Γ(1/β)/Γ(3/β)² − 3 of the generalised normal.
pub fn gen_normal_excess_kurtosis(beta: f64) -> Result<f64> {
    if !(beta > 0.0) || !beta.is_finite() {
        return domain(format!(
            "generalised-normal shape must be positive, got {beta}"
        ));
    }
    let ln_ratio = ln_gamma(5.0 / beta) + ln_gamma(1.0 / beta) - 2.0 * ln_gamma(3.0 / beta);
    Ok(ln_ratio.exp() - 3.0)
}

/// Shape β whose generalised-normal excess kurtosis equals `kappa`.
///
/// Bisection on ln β over [0.1, 200], widening the bracket when the target
/// sits outside it.
pub fn kurtosis_to_beta(kappa: f64) -> Result<f64> {
    if !kappa.is_finite() || kappa <= GEN_NORMAL_MIN_EXCESS_KURTOSIS {
        return Err(Error::UnattainableKurtosis(kappa));
    }
    if kappa == 0.0 {
        return Ok(2.0);
    }
    let f = |ln_b: f64| gen_normal_excess_kurtosis(ln_b.exp()).map(|k| k - kappa);
    let (mut lo, mut hi) = (0.1f64.ln(), 200f64.ln());
    while f(lo)? < 0.0 {
        lo -= 1.0;
        if lo < 1e-3f64.ln() {
            return Err(Error::UnattainableKurtosis(kappa));
        }
    }
    while f(hi)? > 0.0 {
        hi += 2.0;
        if hi > 1e12f64.ln() {
            return Err(Error::UnattainableKurtosis(kappa));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

/// A location-scale family with a fixed shape parameter.
pub trait ShapeFamily: Sized {
    fn analytic_mean(&self) -> f64;
    fn analytic_sd(&self) -> f64;
    /// Same shape, location and scale chosen so the mean and sd match.
    fn with_moments(&self, mean: f64, sd: f64) -> Result<Self>;
    /// Fills `out` with independent draws.
    fn fill_sample(&self, rng: &mut RngStream, out: &mut [f64]);

    fn sample(&self, n: usize, rng: &mut RngStream) -> Vec<f64> {
        let mut out = vec![0.0; n];
        self.fill_sample(rng, &mut out);
        out
    }
}

/// Re-centres and re-scales `shape` to the requested mean and sd.
pub fn moment_matched<S: ShapeFamily>(target_mean: f64, target_sd: f64, shape: &S) -> Result<S> {
    shape.with_moments(target_mean, target_sd)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkewNormalParams {
    pub location: f64,
    pub scale: f64,
    pub alpha: f64,
}

impl SkewNormalParams {
    pub fn new(location: f64, scale: f64, alpha: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return domain(format!("skew-normal scale must be positive, got {scale}"));
        }
        if !location.is_finite() || alpha.is_nan() {
            return domain("skew-normal location and shape must be finite");
        }
        Ok(Self {
            location,
            scale,
            alpha,
        })
    }

    pub fn delta(&self) -> f64 {
        delta_of(self.alpha)
    }

    pub fn skewness(&self) -> f64 {
        skew_normal_skewness(self.alpha)
    }
}

impl ShapeFamily for SkewNormalParams {
    fn analytic_mean(&self) -> f64 {
        self.location + self.scale * self.delta() * FRAC_2_PI.sqrt()
    }

    fn analytic_sd(&self) -> f64 {
        let d = self.delta();
        self.scale * (1.0 - FRAC_2_PI * d * d).sqrt()
    }

    fn with_moments(&self, mean: f64, sd: f64) -> Result<Self> {
        if !(sd > 0.0) || !sd.is_finite() {
            return domain(format!("target sd must be positive, got {sd}"));
        }
        let d = self.delta();
        let scale = sd / (1.0 - FRAC_2_PI * d * d).sqrt();
        let location = mean - scale * d * FRAC_2_PI.sqrt();
        Self::new(location, scale, self.alpha)
    }

    /// Conditioning representation: with u0, v iid N(0,1) and
    /// u1 = δ u0 + √(1−δ²) v, the draw is u1 when u0 ≥ 0 and −u1 otherwise.
    fn fill_sample(&self, rng: &mut RngStream, out: &mut [f64]) {
        let d = self.delta();
        let c = (1.0 - d * d).max(0.0).sqrt();
        for slot in out.iter_mut() {
            let u0: f64 = rng.sample(StandardNormal);
            let v: f64 = rng.sample(StandardNormal);
            let u1 = d * u0 + c * v;
            let z = if u0 >= 0.0 { u1 } else { -u1 };
            *slot = self.location + self.scale * z;
        }
    }
}

/// Generalised normal with density ∝ exp(−(|x − μ| / s)^β).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenNormalParams {
    pub location: f64,
    pub scale: f64,
    pub beta: f64,
}

impl GenNormalParams {
    pub fn new(location: f64, scale: f64, beta: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return domain(format!(
                "generalised-normal scale must be positive, got {scale}"
            ));
        }
        if !(beta > 0.0) || !beta.is_finite() {
            return domain(format!(
                "generalised-normal shape must be positive, got {beta}"
            ));
        }
        if !location.is_finite() {
            return domain("generalised-normal location must be finite");
        }
        Ok(Self {
            location,
            scale,
            beta,
        })
    }

    /// Var = s² Γ(3/β) / Γ(1/β), so sd / s = this factor.
    fn sd_factor(beta: f64) -> f64 {
        (0.5 * (ln_gamma(3.0 / beta) - ln_gamma(1.0 / beta))).exp()
    }

    pub fn excess_kurtosis(&self) -> f64 {
        gen_normal_excess_kurtosis(self.beta).unwrap_or(f64::NAN)
    }
}

impl ShapeFamily for GenNormalParams {
    fn analytic_mean(&self) -> f64 {
        self.location
    }

    fn analytic_sd(&self) -> f64 {
        self.scale * Self::sd_factor(self.beta)
    }

    fn with_moments(&self, mean: f64, sd: f64) -> Result<Self> {
        if !(sd > 0.0) || !sd.is_finite() {
            return domain(format!("target sd must be positive, got {sd}"));
        }
        Self::new(mean, sd / Self::sd_factor(self.beta), self.beta)
    }

    /// |x − μ| / s is G^(1/β) with G ~ Gamma(1/β, 1); the sign is a fair coin.
    fn fill_sample(&self, rng: &mut RngStream, out: &mut [f64]) {
        let gamma = Gamma::new(1.0 / self.beta, 1.0).expect("shape validated at construction");
        let inv_beta = 1.0 / self.beta;
        for slot in out.iter_mut() {
            let g: f64 = gamma.sample(rng);
            let mag = g.powf(inv_beta);
            let signed = if rng.random::<bool>() { mag } else { -mag };
            *slot = self.location + self.scale * signed;
        }
    }
}

pub fn sample_skew_normal(params: &SkewNormalParams, n: usize, rng: &mut RngStream) -> Vec<f64> {
    params.sample(n, rng)
}

pub fn sample_gen_normal(params: &GenNormalParams, n: usize, rng: &mut RngStream) -> Vec<f64> {
    params.sample(n, rng)
}
