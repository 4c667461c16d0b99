use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::config::GpFitConfig;
use super::gp::{GpCore, GpState, LikelihoodCache, ReplicateSummary};
use super::hom::{check_training, gp_serde, output_scale, search_hom};
use super::kernel::{CovarianceSpec, MeanSpec};
use super::optim::multi_start;
use crate::data::ReplicatedDataset;
use crate::distributions::special::{digamma, trigamma};
use crate::error::Result;
use crate::rng::RngStream;

const ROLE_INIT: u64 = 0;
const ROLE_MEAN: u64 = 1;
const ROLE_VAR: u64 = 2;

/// Heteroscedastic GP: a mean GP with per-location noise, plus a GP on the
/// log intrinsic variance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FittedHetGP {
    #[serde(with = "gp_serde")]
    pub(crate) mean_gp: GpCore,
    /// Latent GP over ln σ²(x), in output units squared.
    #[serde(with = "gp_serde")]
    pub(crate) variance_gp: GpCore,
    pub iterations: usize,
    pub converged: bool,
    #[serde(default)]
    pub log_likelihood: Option<f64>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl FittedHetGP {
    /// Intrinsic variance estimates at the training locations.
    pub fn training_variances(&self) -> &[f64] {
        &self.mean_gp.state().noise
    }

    pub fn mean_core(&self) -> &GpCore {
        &self.mean_gp
    }

    pub fn variance_core(&self) -> &GpCore {
        &self.variance_gp
    }

    /// σ²(x) = exp of the variance GP's posterior mean.
    pub fn intrinsic_variance(&self, xstar: &DMatrix<f64>) -> Result<Vec<f64>> {
        let (m, _) = self.variance_gp.predict_latent(xstar)?;
        Ok(m.into_iter().map(f64::exp).collect())
    }

    pub fn marginal_log_likelihood(&self) -> Result<f64> {
        self.mean_gp.log_likelihood()
    }
}

/// Bias-corrected log-variance targets and their sampling variances.
///
/// With ν = r − 1 ≥ 1, ln s² − ln σ² has mean ψ(ν/2) − ln(ν/2) and variance
/// ψ′(ν/2). A lone run uses the squared residual plus the latent variance,
/// whose log has mean offset ψ(½) + ln 2 and variance π²/2.
pub(crate) fn log_variance_targets(
    s: &ReplicateSummary,
    fitted_mean: &[f64],
    fitted_var: &[f64],
    floor: f64,
) -> (Vec<f64>, Vec<f64>) {
    let mut targets = Vec::with_capacity(s.n());
    let mut noise = Vec::with_capacity(s.n());
    for i in 0..s.n() {
        let r = s.counts[i];
        if r >= 2 {
            let nu = (r - 1) as f64;
            let s2 = (s.within_ss[i] / nu).max(floor);
            targets.push(s2.ln() - (digamma(nu / 2.0) - (nu / 2.0).ln()));
            noise.push(trigamma(nu / 2.0));
        } else {
            let e = ((s.means[i] - fitted_mean[i]).powi(2) + fitted_var[i]).max(floor);
            targets.push(e.ln() - (digamma(0.5) + 2f64.ln()));
            noise.push(PI * PI / 2.0);
        }
    }
    (targets, noise)
}

fn fit_variance_gp(
    std: &ReplicateSummary,
    targets: &[f64],
    target_noise: &[f64],
    config: &GpFitConfig,
    rng: &RngStream,
) -> Result<(Vec<f64>, f64)> {
    let d = std.dim();
    let n = std.n();
    let tbar = targets.iter().sum::<f64>() / n as f64;
    let tsum = ReplicateSummary::unreplicated(std.locations.clone(), targets.to_vec());
    let cache = LikelihoodCache::new(&tsum);
    let objective = |theta: &[f64]| -> f64 {
        let ls: Vec<f64> = theta[..d].iter().map(|v| v.exp()).collect();
        let sv2 = theta[d].exp();
        let g = theta[d + 1].exp();
        let noise: Vec<f64> = target_noise.iter().map(|t| t + g).collect();
        match cache.log_likelihood(&ls, sv2, &noise, tbar) {
            Ok(ll) => -ll,
            Err(_) => f64::INFINITY,
        }
    };
    let (lower, upper) = config.log_bounds(d, true);
    let (slo, shi) = config.log_start_ranges(d, true);
    let best = multi_start(
        &objective,
        &[config.default_start(d, true)],
        config.n_starts,
        &slo,
        &shi,
        &lower,
        &upper,
        &config.optimizer,
        &mut rng.clone(),
    )?;
    Ok((best.x, tbar))
}

fn fit_mean_given_noise(
    std: &ReplicateSummary,
    noise: &[f64],
    extra_start: &[f64],
    config: &GpFitConfig,
    rng: &RngStream,
) -> Result<Vec<f64>> {
    let d = std.dim();
    let cache = LikelihoodCache::new(std);
    let objective = |theta: &[f64]| -> f64 {
        let ls: Vec<f64> = theta[..d].iter().map(|v| v.exp()).collect();
        match cache.log_likelihood(&ls, theta[d].exp(), noise, 0.0) {
            Ok(ll) => -ll,
            Err(_) => f64::INFINITY,
        }
    };
    let (lower, upper) = config.log_bounds(d, false);
    let (slo, shi) = config.log_start_ranges(d, false);
    let best = multi_start(
        &objective,
        &[config.default_start(d, false), extra_start.to_vec()],
        config.n_starts,
        &slo,
        &shi,
        &lower,
        &upper,
        &config.optimizer,
        &mut rng.clone(),
    )?;
    Ok(best.x)
}

fn core(data: ReplicateSummary, theta: &[f64], noise: Vec<f64>, mean: f64) -> Result<GpCore> {
    let d = data.dim();
    let ls: Vec<f64> = theta[..d].iter().map(|v| v.exp()).collect();
    GpCore::new(GpState {
        data,
        noise,
        mean: MeanSpec::Constant(mean),
        covariance: CovarianceSpec::squared_exponential(ls, theta[d].exp())?,
    })
}

/// Iterative "most-likely" heteroscedastic fit.
///
/// Starts from a homoscedastic fit, then alternates: log-variance targets
/// from replicate pools (or residuals at lone runs), a GP on those targets,
/// and a mean GP refit with the smoothed variances held fixed. Stops when the
/// standardized training-point mean moves less than `het_tolerance`.
pub fn fit_hetgp(
    x: &DMatrix<f64>,
    y: &[f64],
    config: &GpFitConfig,
    rng: &RngStream,
) -> Result<FittedHetGP> {
    check_training(x, y)?;
    let data = ReplicatedDataset::from_runs(x, y, 0.0)?;
    fit_hetgp_data(&data, config, rng)
}

pub fn fit_hetgp_data(
    data: &ReplicatedDataset,
    config: &GpFitConfig,
    rng: &RngStream,
) -> Result<FittedHetGP> {
    config.validate()?;
    let (mu, mut sd) = output_scale(data);
    let mut warnings = Vec::new();
    if !(sd > 0.0) {
        warnings.push("outputs are constant".to_string());
        sd = 1.0;
    }
    let summary = ReplicateSummary::from_dataset(data);
    let std = summary.rescaled(mu, sd);
    let d = std.dim();
    let n = std.n();
    let (v_lo, v_hi) = config.variance_bounds;
    let xu = std.location_matrix();

    let init = search_hom(&std, config, &rng.substream(ROLE_INIT))?;
    let hom_start = init[..=d].to_vec();
    let mut noise = vec![init[d + 1].exp(); n];
    let mut mean_theta = hom_start.clone();
    let mut gp = core(std.clone(), &mean_theta, noise.clone(), 0.0)?;
    let (mut m_old, mut v_old) = gp.predict_latent(&xu)?;

    let mut var_fit = None;
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..config.het_max_iterations {
        iterations += 1;
        let (targets, tnoise) = log_variance_targets(&std, &m_old, &v_old, v_lo);
        let (vtheta, tbar) =
            fit_variance_gp(&std, &targets, &tnoise, config, &rng.substream(ROLE_VAR))?;
        let g = vtheta[d + 1].exp();
        let vnoise: Vec<f64> = tnoise.iter().map(|t| t + g).collect();
        let vgp = core(
            ReplicateSummary::unreplicated(std.locations.clone(), targets.clone()),
            &vtheta,
            vnoise.clone(),
            tbar,
        )?;
        let (logvar, _) = vgp.predict_latent(&xu)?;
        noise = logvar.iter().map(|l| l.exp().clamp(v_lo, v_hi)).collect();
        mean_theta =
            fit_mean_given_noise(&std, &noise, &hom_start, config, &rng.substream(ROLE_MEAN))?;
        gp = core(std.clone(), &mean_theta, noise.clone(), 0.0)?;
        let (m_new, v_new) = gp.predict_latent(&xu)?;
        let delta = m_new
            .iter()
            .zip(&m_old)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        m_old = m_new;
        v_old = v_new;
        var_fit = Some((vtheta, targets, vnoise, tbar));
        if delta < config.het_tolerance {
            converged = true;
            break;
        }
    }
    if !converged {
        warnings.push(format!(
            "heteroscedastic loop stopped after {iterations} iterations without converging"
        ));
    }

    // back to output units
    let s2 = sd * sd;
    let shift = s2.ln();
    let (vtheta, targets, vnoise, tbar) = var_fit.expect("at least one iteration");
    let variance_gp = core(
        ReplicateSummary::unreplicated(
            std.locations.clone(),
            targets.iter().map(|t| t + shift).collect(),
        ),
        &vtheta,
        vnoise,
        tbar + shift,
    )?;
    let mut orig_theta = mean_theta.clone();
    orig_theta[d] += shift;
    let mean_gp = core(
        summary,
        &orig_theta,
        noise.iter().map(|v| v * s2).collect(),
        mu,
    )?;
    let ll = mean_gp.log_likelihood()?;
    Ok(FittedHetGP {
        mean_gp,
        variance_gp,
        iterations,
        converged,
        log_likelihood: Some(ll),
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replicate_targets_are_unbiased_offsets() {
        let s = ReplicateSummary {
            locations: vec![vec![0.0], vec![1.0]],
            counts: vec![3, 1],
            means: vec![0.0, 2.0],
            within_ss: vec![2.0 * 0.5, 0.0],
        };
        let (t, tau) = log_variance_targets(&s, &[0.0, 1.0], &[0.0, 0.0], 1e-8);
        // ν = 2: ψ(1) − ln 1 = −γ
        assert!((t[0] - (0.5f64.ln() + 0.577_215_664_901_532_9)).abs() < 1e-10);
        assert!((tau[0] - PI * PI / 6.0).abs() < 1e-10);
        // E ln χ²₁ = −γ − ln 2
        assert!((t[1] - (0.0 + 0.577_215_664_901_532_9 + 2f64.ln())).abs() < 1e-10);
        assert!((tau[1] - PI * PI / 2.0).abs() < 1e-12);
    }
}
