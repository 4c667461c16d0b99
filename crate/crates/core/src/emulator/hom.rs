use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::config::GpFitConfig;
use super::gp::{GpCore, GpState, LikelihoodCache, ReplicateSummary};
use super::kernel::{CovarianceSpec, MeanSpec};
use super::optim::multi_start;
use crate::data::ReplicatedDataset;
use crate::error::{domain, Result};
use crate::rng::RngStream;

/// Homoscedastic GP: one nugget shared by every run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FittedHomGP {
    #[serde(with = "gp_serde")]
    pub(crate) gp: GpCore,
    /// Maximized log-likelihood (absent for fixed hyperparameters).
    #[serde(default)]
    pub log_likelihood: Option<f64>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

pub(crate) mod gp_serde {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(gp: &GpCore, s: S) -> std::result::Result<S::Ok, S::Error> {
        gp.state().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<GpCore, D::Error> {
        let state = GpState::deserialize(d)?;
        GpCore::new(state).map_err(serde::de::Error::custom)
    }
}

impl FittedHomGP {
    /// Conditions on `data` with fixed hyperparameters. The nugget is raised
    /// to the jitter floor `1e-8·σ_f²` if smaller.
    pub fn new(
        data: &ReplicatedDataset,
        mean: MeanSpec,
        covariance: CovarianceSpec,
        nugget: f64,
    ) -> Result<Self> {
        Self::from_summary(
            ReplicateSummary::from_dataset(data),
            mean,
            covariance,
            nugget,
        )
    }

    pub fn from_summary(
        data: ReplicateSummary,
        mean: MeanSpec,
        covariance: CovarianceSpec,
        nugget: f64,
    ) -> Result<Self> {
        if !(nugget >= 0.0) || !nugget.is_finite() {
            return domain("nugget must be a nonnegative finite number");
        }
        covariance.validate()?;
        let floor = 1e-8 * covariance.signal_variance;
        let mut warnings = Vec::new();
        if nugget < floor {
            warnings.push(format!("nugget raised to jitter floor {floor:e}"));
        }
        let noise = vec![nugget.max(floor); data.n()];
        let gp = GpCore::new(GpState {
            data,
            noise,
            mean,
            covariance,
        })?;
        Ok(Self {
            gp,
            log_likelihood: None,
            warnings,
        })
    }

    pub fn nugget(&self) -> f64 {
        self.gp.state().noise[0]
    }

    pub fn covariance(&self) -> &CovarianceSpec {
        self.gp.covariance()
    }

    pub fn mean_spec(&self) -> MeanSpec {
        self.gp.mean_spec()
    }

    pub fn summary(&self) -> &ReplicateSummary {
        &self.gp.state().data
    }

    pub fn core(&self) -> &GpCore {
        &self.gp
    }

    /// Factorization-based log-likelihood of the training runs.
    pub fn marginal_log_likelihood(&self) -> Result<f64> {
        self.gp.log_likelihood()
    }
}

/// Output location and scale used to standardize before fitting.
pub(crate) fn output_scale(data: &ReplicatedDataset) -> (f64, f64) {
    let all: Vec<f64> = data.replicates.iter().flatten().copied().collect();
    let n = all.len() as f64;
    let mu = all.iter().sum::<f64>() / n;
    let var = if all.len() > 1 {
        all.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mu, var.sqrt())
}

pub(crate) fn check_training(x: &DMatrix<f64>, y: &[f64]) -> Result<()> {
    if x.nrows() != y.len() {
        return domain(format!("{} input rows but {} outputs", x.nrows(), y.len()));
    }
    if y.len() < 2 {
        return domain("at least two training runs are needed");
    }
    if x.ncols() == 0 {
        return domain("training inputs have no columns");
    }
    Ok(())
}

/// Maximum-likelihood homoscedastic GP over lengthscales, signal variance and
/// nugget, searched on standardized outputs. The prior mean is the constant
/// sample mean of the outputs.
pub fn fit_homgp(
    x: &DMatrix<f64>,
    y: &[f64],
    config: &GpFitConfig,
    rng: &RngStream,
) -> Result<FittedHomGP> {
    check_training(x, y)?;
    let data = ReplicatedDataset::from_runs(x, y, 0.0)?;
    fit_homgp_data(&data, config, rng)
}

pub fn fit_homgp_data(
    data: &ReplicatedDataset,
    config: &GpFitConfig,
    rng: &RngStream,
) -> Result<FittedHomGP> {
    config.validate()?;
    let (mu, mut sd) = output_scale(data);
    let mut warnings = Vec::new();
    if !(sd > 0.0) {
        warnings.push("outputs are constant; nugget left at the jitter floor".to_string());
        sd = 1.0;
    }
    let summary = ReplicateSummary::from_dataset(data);
    let std = summary.rescaled(mu, sd);
    let theta = search_hom(&std, config, &rng.substream(0))?;
    let d = std.dim();
    let scale2 = sd * sd;
    let ls: Vec<f64> = theta[..d].iter().map(|v| v.exp()).collect();
    let cov = CovarianceSpec::squared_exponential(ls, theta[d].exp() * scale2)?;
    let nugget = theta[d + 1].exp() * scale2;
    let mut model = FittedHomGP::from_summary(summary, MeanSpec::Constant(mu), cov, nugget)?;
    warnings.append(&mut model.warnings);
    model.warnings = warnings;
    model.log_likelihood = Some(model.marginal_log_likelihood()?);
    Ok(model)
}

/// Log-space hyperparameters `[ln ℓ.., ln σ_f², ln g]` on standardized data.
pub(crate) fn search_hom(
    std: &ReplicateSummary,
    config: &GpFitConfig,
    rng: &RngStream,
) -> Result<Vec<f64>> {
    let d = std.dim();
    let n = std.n();
    let cache = LikelihoodCache::new(std);
    let objective = |theta: &[f64]| -> f64 {
        let ls: Vec<f64> = theta[..d].iter().map(|v| v.exp()).collect();
        let sf2 = theta[d].exp();
        let g = theta[d + 1].exp();
        match cache.log_likelihood(&ls, sf2, &vec![g; n], 0.0) {
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
    Ok(best.x)
}
