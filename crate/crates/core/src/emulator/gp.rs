//! Conditioning a GP on replicated runs.
//!
//! With `r_i` runs at location `x_i`, per-run noise variance `λ_i`, location
//! mean `ȳ_i` and within-location sum of squares `W_i`, the posterior of the
//! latent mean only depends on `ȳ` through `C = K + diag(λ_i / r_i)`, and the
//! full-run log-likelihood splits into
//! `log N(ȳ; m, C) + Σ_i [−(r_i−1)/2 ln(2πλ_i) − ½ ln r_i − W_i / (2λ_i)]`.

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use super::kernel::{CovarianceSpec, DistanceCache, MeanSpec};
use crate::data::ReplicatedDataset;
use crate::error::{domain, Error, Result};

/// Diagonal jitter ladder, as multiples of the signal variance.
pub(crate) const JITTER_LADDER: [f64; 6] = [0.0, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4];

/// Sufficient statistics of replicated runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateSummary {
    /// One row per unique location.
    pub locations: Vec<Vec<f64>>,
    pub counts: Vec<usize>,
    pub means: Vec<f64>,
    /// Σ_j (y_ij − ȳ_i)²
    pub within_ss: Vec<f64>,
}

impl ReplicateSummary {
    pub fn from_dataset(data: &ReplicatedDataset) -> Self {
        let locations = (0..data.n_locations()).map(|i| data.location(i)).collect();
        let means = data.means();
        let within_ss = data
            .replicates
            .iter()
            .zip(&means)
            .map(|(r, m)| r.iter().map(|v| (v - m).powi(2)).sum())
            .collect();
        Self {
            locations,
            counts: data.replicate_counts(),
            means,
            within_ss,
        }
    }

    /// Single observations with no replication.
    pub fn unreplicated(locations: Vec<Vec<f64>>, values: Vec<f64>) -> Self {
        let n = values.len();
        Self {
            locations,
            counts: vec![1; n],
            means: values,
            within_ss: vec![0.0; n],
        }
    }

    pub fn n(&self) -> usize {
        self.counts.len()
    }

    pub fn dim(&self) -> usize {
        self.locations.first().map_or(0, Vec::len)
    }

    pub fn location_matrix(&self) -> DMatrix<f64> {
        let flat: Vec<f64> = self.locations.iter().flatten().copied().collect();
        DMatrix::from_row_slice(self.n(), self.dim(), &flat)
    }

    /// Affine change of output units: `y ↦ (y − shift) / scale`.
    pub fn rescaled(&self, shift: f64, scale: f64) -> Self {
        Self {
            locations: self.locations.clone(),
            counts: self.counts.clone(),
            means: self.means.iter().map(|m| (m - shift) / scale).collect(),
            within_ss: self.within_ss.iter().map(|w| w / (scale * scale)).collect(),
        }
    }
}

/// Cholesky of `a + j·scale·I`, walking up the jitter ladder.
pub(crate) fn cholesky_with_jitter(
    a: &DMatrix<f64>,
    scale: f64,
) -> Result<(Cholesky<f64, Dyn>, f64)> {
    for &j in &JITTER_LADDER {
        let mut m = a.clone();
        let add = j * scale;
        if add > 0.0 {
            for i in 0..m.nrows() {
                m[(i, i)] += add;
            }
        }
        if let Some(c) = Cholesky::new(m) {
            if c.l_dirty()
                .diagonal()
                .iter()
                .all(|v| v.is_finite() && *v > 0.0)
            {
                return Ok((c, add));
            }
        }
    }
    Err(Error::Numerical(format!(
        "covariance not positive definite after jitter {:e}",
        JITTER_LADDER[JITTER_LADDER.len() - 1] * scale
    )))
}

fn check_inputs(s: &ReplicateSummary, noise: &[f64], cov: &CovarianceSpec) -> Result<()> {
    if s.n() == 0 {
        return domain("no training locations");
    }
    if s.locations.iter().any(|l| l.len() != cov.dim()) {
        return domain(format!(
            "training inputs must have {} columns to match the lengthscales",
            cov.dim()
        ));
    }
    if noise.len() != s.n() || s.means.len() != s.n() || s.within_ss.len() != s.n() {
        return domain("per-location vectors have inconsistent lengths");
    }
    if s.counts.contains(&0) {
        return domain("replicate counts must be >= 1");
    }
    if noise.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return domain("noise variances must be positive and finite");
    }
    Ok(())
}

/// Exact replicated log-likelihood for a given gram matrix.
pub(crate) fn replicated_log_likelihood(
    s: &ReplicateSummary,
    gram: DMatrix<f64>,
    signal_variance: f64,
    noise: &[f64],
    mean: f64,
) -> Result<f64> {
    let n = s.n();
    let mut c = gram;
    for i in 0..n {
        c[(i, i)] += noise[i] / s.counts[i] as f64;
    }
    let (chol, _) = cholesky_with_jitter(&c, signal_variance)?;
    let resid = DVector::from_iterator(n, s.means.iter().map(|y| y - mean));
    let z = chol
        .l()
        .solve_lower_triangular(&resid)
        .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
    let logdet: f64 = 2.0
        * chol
            .l_dirty()
            .diagonal()
            .iter()
            .map(|v| v.ln())
            .sum::<f64>();
    let mut ll = -0.5 * z.norm_squared() - 0.5 * logdet - 0.5 * n as f64 * (2.0 * PI).ln();
    for ((&c, &lam), &w) in s.counts.iter().zip(noise).zip(&s.within_ss) {
        let r = c as f64;
        ll += -0.5 * (r - 1.0) * (2.0 * PI * lam).ln() - 0.5 * r.ln() - w / (2.0 * lam);
    }
    if ll.is_finite() {
        Ok(ll)
    } else {
        Err(Error::Numerical("non-finite log-likelihood".into()))
    }
}

/// Likelihood evaluator with cached input distances.
pub(crate) struct LikelihoodCache<'a> {
    pub summary: &'a ReplicateSummary,
    dist: DistanceCache,
}

impl<'a> LikelihoodCache<'a> {
    pub fn new(summary: &'a ReplicateSummary) -> Self {
        Self {
            summary,
            dist: DistanceCache::new(&summary.location_matrix()),
        }
    }

    pub fn log_likelihood(
        &self,
        lengthscales: &[f64],
        signal_variance: f64,
        noise: &[f64],
        mean: f64,
    ) -> Result<f64> {
        let gram = self.dist.gram(lengthscales, signal_variance);
        replicated_log_likelihood(self.summary, gram, signal_variance, noise, mean)
    }
}

/// Serializable part of a conditioned GP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpState {
    pub data: ReplicateSummary,
    /// Per-run noise variance at each location.
    pub noise: Vec<f64>,
    pub mean: MeanSpec,
    pub covariance: CovarianceSpec,
}

/// A GP conditioned on replicated data, with its factorization.
#[derive(Debug, Clone)]
pub struct GpCore {
    state: GpState,
    x: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    jitter: f64,
}

impl TryFrom<GpState> for GpCore {
    type Error = Error;
    fn try_from(state: GpState) -> Result<Self> {
        GpCore::new(state)
    }
}

impl From<GpCore> for GpState {
    fn from(gp: GpCore) -> Self {
        gp.state
    }
}

impl GpCore {
    pub fn new(state: GpState) -> Result<Self> {
        state.covariance.validate()?;
        check_inputs(&state.data, &state.noise, &state.covariance)?;
        let x = state.data.location_matrix();
        let mut c = state.covariance.gram(&x);
        for i in 0..x.nrows() {
            c[(i, i)] += state.noise[i] / state.data.counts[i] as f64;
        }
        let (chol, jitter) = cholesky_with_jitter(&c, state.covariance.signal_variance)?;
        let m = state.mean.value();
        let resid = DVector::from_iterator(x.nrows(), state.data.means.iter().map(|y| y - m));
        let alpha = chol.solve(&resid);
        Ok(Self {
            state,
            x,
            chol,
            alpha,
            jitter,
        })
    }

    pub fn state(&self) -> &GpState {
        &self.state
    }

    pub fn covariance(&self) -> &CovarianceSpec {
        &self.state.covariance
    }

    pub fn mean_spec(&self) -> MeanSpec {
        self.state.mean
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    /// Rebuilds the full covariance `K + diag(λ/r) + jitter·I` from the factor.
    pub fn reconstructed_covariance(&self) -> DMatrix<f64> {
        let l = self.chol.l();
        &l * l.transpose()
    }

    fn check_dim(&self, xstar: &DMatrix<f64>) -> Result<()> {
        if xstar.ncols() != self.dim() {
            return domain(format!(
                "prediction inputs have {} columns, model expects {}",
                xstar.ncols(),
                self.dim()
            ));
        }
        Ok(())
    }

    /// Posterior mean and variance of the latent mean at each row.
    pub fn predict_latent(&self, xstar: &DMatrix<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_dim(xstar)?;
        let ks = self.state.covariance.cross(&self.x, xstar);
        let m0 = self.state.mean.value();
        let sf2 = self.state.covariance.signal_variance;
        let mean: Vec<f64> = (0..xstar.nrows())
            .map(|j| m0 + ks.column(j).dot(&self.alpha))
            .collect();
        let a = self.solve_lower(&ks)?;
        let var: Vec<f64> = (0..xstar.nrows())
            .map(|j| (sf2 - a.column(j).norm_squared()).max(0.0))
            .collect();
        Ok((mean, var))
    }

    /// Posterior mean vector and full covariance of the latent mean.
    pub fn joint_latent(&self, xstar: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
        self.check_dim(xstar)?;
        let (mean, var) = self.predict_latent(xstar)?;
        let ks = self.state.covariance.cross(&self.x, xstar);
        let a = self.solve_lower(&ks)?;
        let mut cov = self.state.covariance.gram(xstar) - a.transpose() * &a;
        let n = xstar.nrows();
        for i in 0..n {
            for j in 0..i {
                let v = 0.5 * (cov[(i, j)] + cov[(j, i)]);
                cov[(i, j)] = v;
                cov[(j, i)] = v;
            }
            cov[(i, i)] = var[i];
        }
        Ok((DVector::from_vec(mean), cov))
    }

    fn solve_lower(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.chol
            .l()
            .solve_lower_triangular(b)
            .ok_or_else(|| Error::Numerical("triangular solve failed".into()))
    }

    /// Exact log-likelihood of all runs under the current state.
    pub fn log_likelihood(&self) -> Result<f64> {
        let s = &self.state;
        replicated_log_likelihood(
            &s.data,
            s.covariance.gram(&self.x),
            s.covariance.signal_variance,
            &s.noise,
            s.mean.value(),
        )
    }
}
