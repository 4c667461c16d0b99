//! Gaussian-process emulators for stochastic simulators.

mod config;
mod gp;
mod het;
mod hom;
mod kernel;
pub mod optim;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub use config::GpFitConfig;
pub use gp::{GpCore, GpState, ReplicateSummary};
pub use het::{fit_hetgp, fit_hetgp_data, FittedHetGP};
pub use hom::{fit_homgp, fit_homgp_data, FittedHomGP};
pub use kernel::{CovarianceSpec, KernelFamily, MeanSpec};

use crate::data::ReplicatedDataset;
use crate::error::{domain, Error, Result};
use crate::rng::RngStream;

/// Predictive law at one input: latent mean `N(mean, mean_variance)` plus
/// intrinsic run-to-run variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointPrediction {
    pub mean: f64,
    pub mean_variance: f64,
    pub intrinsic_variance: f64,
}

impl PointPrediction {
    /// Variance of a single future run: V + σ².
    pub fn total_variance(&self) -> f64 {
        self.mean_variance + self.intrinsic_variance
    }
}

/// Mean vector and covariance of the latent mean over a set of inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPrediction {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

/// Either emulator kind.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum FittedEmulator {
    Homoscedastic(FittedHomGP),
    Heteroscedastic(FittedHetGP),
}

impl From<FittedHomGP> for FittedEmulator {
    fn from(m: FittedHomGP) -> Self {
        FittedEmulator::Homoscedastic(m)
    }
}

impl From<FittedHetGP> for FittedEmulator {
    fn from(m: FittedHetGP) -> Self {
        FittedEmulator::Heteroscedastic(m)
    }
}

impl FittedEmulator {
    fn mean_core(&self) -> &GpCore {
        match self {
            FittedEmulator::Homoscedastic(m) => m.core(),
            FittedEmulator::Heteroscedastic(m) => m.mean_core(),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean_core().dim()
    }

    pub fn covariance(&self) -> &CovarianceSpec {
        self.mean_core().covariance()
    }

    pub fn mean_spec(&self) -> MeanSpec {
        self.mean_core().mean_spec()
    }

    pub fn warnings(&self) -> &[String] {
        match self {
            FittedEmulator::Homoscedastic(m) => &m.warnings,
            FittedEmulator::Heteroscedastic(m) => &m.warnings,
        }
    }

    pub fn training_data(&self) -> &ReplicateSummary {
        &self.mean_core().state().data
    }

    /// σ²(x) at each row of `xstar`.
    pub fn intrinsic_variance(&self, xstar: &DMatrix<f64>) -> Result<Vec<f64>> {
        match self {
            FittedEmulator::Homoscedastic(m) => {
                if xstar.ncols() != m.core().dim() {
                    return domain(format!(
                        "prediction inputs have {} columns, model expects {}",
                        xstar.ncols(),
                        m.core().dim()
                    ));
                }
                Ok(vec![m.nugget(); xstar.nrows()])
            }
            FittedEmulator::Heteroscedastic(m) => m.intrinsic_variance(xstar),
        }
    }

    pub fn predict(&self, xstar: &DMatrix<f64>) -> Result<Vec<PointPrediction>> {
        let (mean, var) = self.mean_core().predict_latent(xstar)?;
        let sig = self.intrinsic_variance(xstar)?;
        Ok(mean
            .into_iter()
            .zip(var)
            .zip(sig)
            .map(
                |((mean, mean_variance), intrinsic_variance)| PointPrediction {
                    mean,
                    mean_variance,
                    intrinsic_variance,
                },
            )
            .collect())
    }

    /// Joint posterior of the latent mean. The returned covariance carries no
    /// jitter; it is checked to be PSD up to the jitter ladder.
    pub fn joint_predict(&self, xstar: &DMatrix<f64>) -> Result<JointPrediction> {
        let (mean, covariance) = self.mean_core().joint_latent(xstar)?;
        let scale = psd_scale(&covariance, self.covariance().signal_variance);
        gp::cholesky_with_jitter(&covariance, scale)?;
        Ok(JointPrediction { mean, covariance })
    }

    /// `n_draws × rows(xstar)` draws of the latent mean function.
    pub fn sample_mean_function(
        &self,
        xstar: &DMatrix<f64>,
        n_draws: usize,
        rng: &mut RngStream,
    ) -> Result<DMatrix<f64>> {
        let joint = self.joint_predict(xstar)?;
        sample_mvn(&joint.mean, &joint.covariance, n_draws, rng)
    }

    pub fn marginal_log_likelihood(&self) -> Result<f64> {
        match self {
            FittedEmulator::Homoscedastic(m) => m.marginal_log_likelihood(),
            FittedEmulator::Heteroscedastic(m) => m.marginal_log_likelihood(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelFile {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            model: self.clone(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format != MODEL_FORMAT {
            return Err(Error::Model(format!(
                "unknown model format {:?}",
                file.format
            )));
        }
        if file.version != MODEL_VERSION {
            return Err(Error::Model(format!(
                "model file version {} is not supported (expected {MODEL_VERSION})",
                file.version
            )));
        }
        Ok(file.model)
    }
}

pub const MODEL_FORMAT: &str = "stochdiag-gp";
pub const MODEL_VERSION: u32 = 1;

/// On-disk model: hyperparameters and training summaries, no factorization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub model: FittedEmulator,
}

fn psd_scale(cov: &DMatrix<f64>, fallback: f64) -> f64 {
    let m = cov.diagonal().iter().copied().fold(0.0, f64::max);
    if m > 0.0 {
        m
    } else {
        fallback
    }
}

/// Draws from `N(mean, cov)` through a symmetric eigendecomposition, with
/// negative eigenvalues clamped to zero. Rows are draws.
pub fn sample_mvn(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    n_draws: usize,
    rng: &mut RngStream,
) -> Result<DMatrix<f64>> {
    let n = mean.len();
    if cov.nrows() != n || cov.ncols() != n {
        return domain("covariance shape does not match the mean");
    }
    let eig = SymmetricEigen::new(cov.clone());
    let mut root = eig.eigenvectors.clone();
    for (j, &lam) in eig.eigenvalues.iter().enumerate() {
        let s = lam.max(0.0).sqrt();
        root.column_mut(j).scale_mut(s);
    }
    let mut out = DMatrix::zeros(n_draws, n);
    let mut z = DVector::zeros(n);
    for d in 0..n_draws {
        for v in z.iter_mut() {
            *v = StandardNormal.sample(rng);
        }
        let draw = mean + &root * &z;
        out.row_mut(d).copy_from(&draw.transpose());
    }
    Ok(out)
}

/// Exact log-likelihood of the runs in `data` under a homoscedastic GP with
/// the given hyperparameters.
pub fn marginal_log_likelihood(
    data: &ReplicatedDataset,
    mean: MeanSpec,
    covariance: &CovarianceSpec,
    nugget: f64,
) -> Result<f64> {
    if !(nugget > 0.0) {
        return domain("nugget must be positive");
    }
    let summary = ReplicateSummary::from_dataset(data);
    let gp = GpCore::new(GpState {
        noise: vec![nugget; summary.n()],
        data: summary,
        mean,
        covariance: covariance.clone(),
    })?;
    gp.log_likelihood()
}

pub fn predict(model: &FittedEmulator, xstar: &DMatrix<f64>) -> Result<Vec<PointPrediction>> {
    model.predict(xstar)
}

pub fn joint_predict(model: &FittedEmulator, xstar: &DMatrix<f64>) -> Result<JointPrediction> {
    model.joint_predict(xstar)
}

pub fn sample_mean_function(
    model: &FittedEmulator,
    xstar: &DMatrix<f64>,
    n_draws: usize,
    rng: &mut RngStream,
) -> Result<DMatrix<f64>> {
    model.sample_mean_function(xstar, n_draws, rng)
}
