use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::tolerance::{stratified_uniforms, ToleranceSpec};
use crate::distributions::{
    chi_square_cdf, empirical_cdf, kurtosis_to_beta, sample_excess_kurtosis, sample_skewness,
    skewness_to_alpha, std_normal_quantile, student_t_cdf, GenNormalParams, SampleMoments,
    SdConvention, ShapeFamily, SkewNormalParams,
};
use crate::emulator::PointPrediction;
use crate::error::{domain, Error, Result};
use crate::rng::RngStream;

pub const FLAG_LEVEL: f64 = 0.95;
pub const STRONG_FLAG_LEVEL: f64 = 0.995;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticKind {
    Mean,
    Variance,
    Skewness,
    Kurtosis,
}

impl DiagnosticKind {
    pub const ALL: [DiagnosticKind; 4] = [
        DiagnosticKind::Mean,
        DiagnosticKind::Variance,
        DiagnosticKind::Skewness,
        DiagnosticKind::Kurtosis,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DiagnosticKind::Mean => "mean",
            DiagnosticKind::Variance => "variance",
            DiagnosticKind::Skewness => "skewness",
            DiagnosticKind::Kurtosis => "kurtosis",
        }
    }

    pub(crate) fn code(self) -> u64 {
        match self {
            DiagnosticKind::Mean => 1,
            DiagnosticKind::Variance => 2,
            DiagnosticKind::Skewness => 3,
            DiagnosticKind::Kurtosis => 4,
        }
    }

    /// Fewest replicates the diagnostic needs.
    pub fn min_replicates(self) -> usize {
        match self {
            DiagnosticKind::Mean | DiagnosticKind::Variance => 2,
            DiagnosticKind::Skewness => 3,
            DiagnosticKind::Kurtosis => 4,
        }
    }
}

/// U = 2(0.5 − p).
pub fn unexpectedness(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return domain(format!("probability {p} is outside [0, 1]"));
    }
    Ok(2.0 * (0.5 - p))
}

/// Unexpectedness of an observation `z` under a normal predictive law,
/// expressed through its standardized error.
pub fn normal_unexpectedness(standardized_error: f64) -> Result<f64> {
    unexpectedness(crate::distributions::std_normal_cdf(standardized_error)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnexpectednessResult {
    pub location: usize,
    pub kind: DiagnosticKind,
    /// Observed statistic (sample mean, variance, skewness or excess kurtosis).
    pub observed: f64,
    pub p: f64,
    pub u: f64,
    pub flag095: bool,
    pub flag0995: bool,
    /// 0 when P was evaluated exactly.
    pub mc_draws_used: usize,
    pub tolerance_applied: bool,
}

impl UnexpectednessResult {
    pub fn from_p(
        kind: DiagnosticKind,
        observed: f64,
        p: f64,
        mc_draws_used: usize,
        tolerance_applied: bool,
    ) -> Result<Self> {
        let u = unexpectedness(p)?;
        Ok(Self {
            location: 0,
            kind,
            observed,
            p,
            u,
            flag095: u.abs() > FLAG_LEVEL,
            flag0995: u.abs() > STRONG_FLAG_LEVEL,
            mc_draws_used,
            tolerance_applied,
        })
    }

    pub fn at(mut self, location: usize) -> Self {
        self.location = location;
        self
    }
}

fn check_moments(stats: &SampleMoments, needed: usize) -> Result<()> {
    if stats.n < needed {
        return Err(Error::InsufficientReplication {
            needed,
            got: stats.n,
        });
    }
    if stats.is_degenerate() {
        return Err(Error::DegenerateReplicates);
    }
    Ok(())
}

fn check_prediction(pred: &PointPrediction) -> Result<()> {
    if !(pred.intrinsic_variance > 0.0) || !pred.intrinsic_variance.is_finite() {
        return Err(Error::Model(format!(
            "intrinsic variance must be positive, got {}",
            pred.intrinsic_variance
        )));
    }
    if !(pred.mean_variance >= 0.0) || !pred.mean.is_finite() {
        return Err(Error::Model(
            "prediction has invalid mean or mean variance".into(),
        ));
    }
    Ok(())
}

/// Sample-mean diagnostic: P(ȳ_rand ≤ ȳ_obs) with the t pivot built on the
/// observed Ŝ and the emulator mean drawn from N(M, V), one draw per
/// probability stratum.
pub fn mean_unexpectedness(
    pred: &PointPrediction,
    stats: &SampleMoments,
    n_mc: usize,
    rng: &mut RngStream,
) -> Result<UnexpectednessResult> {
    check_moments(stats, 2)?;
    check_prediction(pred)?;
    let r = stats.n;
    let k = (r as f64).sqrt() / stats.sd;
    let df = r - 1;
    let (p, draws) = if pred.mean_variance == 0.0 || n_mc == 0 {
        (student_t_cdf((stats.mean - pred.mean) * k, df)?, 0)
    } else {
        let sv = pred.mean_variance.sqrt();
        let mut acc = 0.0;
        for u in stratified_uniforms(n_mc, rng) {
            let z = std_normal_quantile(u)?;
            acc += student_t_cdf((stats.mean - (pred.mean + sv * z)) * k, df)?;
        }
        (acc / n_mc as f64, n_mc)
    };
    UnexpectednessResult::from_p(DiagnosticKind::Mean, stats.mean, p, draws, false)
}

/// Sample-variance diagnostic from the χ²_{r−1} law of (r−1)S²/σ², averaged
/// over σ drawn from the sd tolerance when one is set.
pub fn variance_unexpectedness(
    pred: &PointPrediction,
    stats: &SampleMoments,
    tol: &ToleranceSpec,
    n_mc: usize,
    rng: &mut RngStream,
) -> Result<UnexpectednessResult> {
    check_prediction(pred)?;
    check_moments(stats, 2)?;
    tol.validate()?;
    let df = stats.n - 1;
    let q = df as f64 * stats.variance;
    let sigma2 = pred.intrinsic_variance;
    let (p, draws, tolerant) = match tol.sd {
        Some((a, b)) if n_mc > 0 => {
            let sigma = sigma2.sqrt();
            let mut acc = 0.0;
            for u in stratified_uniforms(n_mc, rng) {
                let s = sigma * tol.shape.quantile(a, b, u);
                acc += chi_square_cdf(q / (s * s), df)?;
            }
            (acc / n_mc as f64, n_mc, true)
        }
        _ => (chi_square_cdf(q / sigma2, df)?, 0, false),
    };
    UnexpectednessResult::from_p(DiagnosticKind::Variance, stats.variance, p, draws, tolerant)
}

/// Settings for the simulated skewness and kurtosis references.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReferenceOptions {
    pub sd_convention: SdConvention,
    /// Draw the reference mean from N(M, V) instead of fixing it at M.
    pub propagate_mean_uncertainty: bool,
}

impl Default for ReferenceOptions {
    fn default() -> Self {
        Self {
            sd_convention: SdConvention::Unbiased,
            propagate_mean_uncertainty: true,
        }
    }
}

fn observed_statistic(
    replicates: &[f64],
    needed: usize,
    stat: impl Fn(&[f64]) -> Option<f64>,
) -> Result<f64> {
    if replicates.len() < needed {
        return Err(Error::InsufficientReplication {
            needed,
            got: replicates.len(),
        });
    }
    if replicates.iter().any(|v| !v.is_finite()) {
        return domain("replicates must be finite");
    }
    stat(replicates).ok_or(Error::DegenerateReplicates)
}

#[allow(clippy::too_many_arguments)]
fn simulated_reference<S: ShapeFamily>(
    pred: &PointPrediction,
    r: usize,
    n_mc: usize,
    opts: &ReferenceOptions,
    rng: &mut RngStream,
    mut shape: impl FnMut(&mut RngStream) -> Result<S>,
    stat: impl Fn(&[f64]) -> Option<f64>,
) -> Result<Vec<f64>> {
    let sd = pred.intrinsic_variance.sqrt();
    let sv = pred.mean_variance.sqrt();
    let mut buf = vec![0.0; r];
    let mut out = Vec::with_capacity(n_mc);
    while out.len() < n_mc {
        let base = shape(rng)?;
        let m = if opts.propagate_mean_uncertainty && sv > 0.0 {
            let z: f64 = rng.sample(StandardNormal);
            pred.mean + sv * z
        } else {
            pred.mean
        };
        base.with_moments(m, sd)?.fill_sample(rng, &mut buf);
        if let Some(v) = stat(&buf) {
            out.push(v);
        }
    }
    Ok(out)
}

/// Sample-skewness diagnostic against a simulated reference of moment-matched
/// skew-normal samples, with the true skewness drawn from the tolerance.
pub fn skewness_unexpectedness(
    pred: &PointPrediction,
    replicates: &[f64],
    tol: &ToleranceSpec,
    n_mc: usize,
    rng: &mut RngStream,
) -> Result<UnexpectednessResult> {
    skewness_unexpectedness_with(
        pred,
        replicates,
        tol,
        n_mc,
        &ReferenceOptions::default(),
        rng,
    )
}

pub fn skewness_unexpectedness_with(
    pred: &PointPrediction,
    replicates: &[f64],
    tol: &ToleranceSpec,
    n_mc: usize,
    opts: &ReferenceOptions,
    rng: &mut RngStream,
) -> Result<UnexpectednessResult> {
    check_prediction(pred)?;
    tol.validate()?;
    if n_mc == 0 {
        return domain("skewness reference needs n_mc >= 1");
    }
    let conv = opts.sd_convention;
    let stat = |v: &[f64]| sample_skewness(v, conv);
    let observed = observed_statistic(replicates, 3, stat)?;
    let w = tol.skewness;
    let reference = simulated_reference(
        pred,
        replicates.len(),
        n_mc,
        opts,
        rng,
        |rng| {
            let alpha = match w {
                Some(w) if w > 0.0 => skewness_to_alpha(tol.shape.draw(-w, w, rng))?,
                _ => 0.0,
            };
            SkewNormalParams::new(0.0, 1.0, alpha)
        },
        stat,
    )?;
    let p = empirical_cdf(&reference, observed)?;
    UnexpectednessResult::from_p(
        DiagnosticKind::Skewness,
        observed,
        p,
        n_mc,
        matches!(w, Some(w) if w > 0.0),
    )
}

/// Sample excess-kurtosis diagnostic against a simulated reference of
/// moment-matched generalised-normal samples.
pub fn kurtosis_unexpectedness(
    pred: &PointPrediction,
    replicates: &[f64],
    tol: &ToleranceSpec,
    n_mc: usize,
    rng: &mut RngStream,
) -> Result<UnexpectednessResult> {
    kurtosis_unexpectedness_with(
        pred,
        replicates,
        tol,
        n_mc,
        &ReferenceOptions::default(),
        rng,
    )
}

pub fn kurtosis_unexpectedness_with(
    pred: &PointPrediction,
    replicates: &[f64],
    tol: &ToleranceSpec,
    n_mc: usize,
    opts: &ReferenceOptions,
    rng: &mut RngStream,
) -> Result<UnexpectednessResult> {
    check_prediction(pred)?;
    tol.validate()?;
    if n_mc == 0 {
        return domain("kurtosis reference needs n_mc >= 1");
    }
    let conv = opts.sd_convention;
    let stat = |v: &[f64]| sample_excess_kurtosis(v, conv);
    let observed = observed_statistic(replicates, 4, stat)?;
    let w = tol.kurtosis;
    let reference = simulated_reference(
        pred,
        replicates.len(),
        n_mc,
        opts,
        rng,
        |rng| {
            let beta = match w {
                Some(w) if w > 0.0 => kurtosis_to_beta(tol.shape.draw(-w, w, rng))?,
                _ => 2.0,
            };
            GenNormalParams::new(0.0, 1.0, beta)
        },
        stat,
    )?;
    let p = empirical_cdf(&reference, observed)?;
    UnexpectednessResult::from_p(
        DiagnosticKind::Kurtosis,
        observed,
        p,
        n_mc,
        matches!(w, Some(w) if w > 0.0),
    )
}
