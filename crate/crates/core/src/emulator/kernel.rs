use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    #[default]
    SquaredExponential,
}

/// k(x, x') = σ² exp(−½ Σ_k ((x_k − x'_k) / ℓ_k)²)
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceSpec {
    #[serde(default)]
    pub family: KernelFamily,
    pub lengthscales: Vec<f64>,
    pub signal_variance: f64,
}

impl CovarianceSpec {
    pub fn squared_exponential(lengthscales: Vec<f64>, signal_variance: f64) -> Result<Self> {
        let spec = Self {
            family: KernelFamily::SquaredExponential,
            lengthscales,
            signal_variance,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lengthscales.is_empty() {
            return domain("covariance needs at least one lengthscale");
        }
        if self
            .lengthscales
            .iter()
            .any(|&l| !(l > 0.0) || !l.is_finite())
        {
            return domain("lengthscales must be positive and finite");
        }
        if !(self.signal_variance > 0.0) || !self.signal_variance.is_finite() {
            return domain("signal variance must be positive and finite");
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        let s: f64 = a
            .iter()
            .zip(b)
            .zip(&self.lengthscales)
            .map(|((x, y), l)| ((x - y) / l).powi(2))
            .sum();
        self.signal_variance * (-0.5 * s).exp()
    }

    /// Cross-covariance between rows of `a` and rows of `b`.
    pub fn cross(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
        let ra: Vec<Vec<f64>> = rows(a);
        let rb: Vec<Vec<f64>> = rows(b);
        DMatrix::from_fn(a.nrows(), b.nrows(), |i, j| self.eval(&ra[i], &rb[j]))
    }

    pub fn gram(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        let ra = rows(a);
        let n = a.nrows();
        let mut k = DMatrix::zeros(n, n);
        for i in 0..n {
            k[(i, i)] = self.signal_variance;
            for j in 0..i {
                let v = self.eval(&ra[i], &ra[j]);
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        k
    }
}

pub(crate) fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

/// Prior mean m(x).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", content = "value", rename_all = "snake_case")]
pub enum MeanSpec {
    Zero,
    Constant(f64),
}

impl MeanSpec {
    pub fn value(&self) -> f64 {
        match self {
            MeanSpec::Zero => 0.0,
            MeanSpec::Constant(v) => *v,
        }
    }
}

/// Per-dimension squared distances between unique locations, cached for
/// repeated likelihood evaluations.
#[derive(Debug, Clone)]
pub(crate) struct DistanceCache {
    pub n: usize,
    /// `sq[k][i * n + j]` = (x_ik − x_jk)²
    pub sq: Vec<Vec<f64>>,
}

impl DistanceCache {
    pub fn new(x: &DMatrix<f64>) -> Self {
        let n = x.nrows();
        let sq = (0..x.ncols())
            .map(|k| {
                let mut v = vec![0.0; n * n];
                for i in 0..n {
                    for j in 0..n {
                        v[i * n + j] = (x[(i, k)] - x[(j, k)]).powi(2);
                    }
                }
                v
            })
            .collect();
        Self { n, sq }
    }

    pub fn gram(&self, lengthscales: &[f64], signal_variance: f64) -> DMatrix<f64> {
        let n = self.n;
        let inv: Vec<f64> = lengthscales.iter().map(|l| 0.5 / (l * l)).collect();
        let mut k = DMatrix::zeros(n, n);
        for i in 0..n {
            k[(i, i)] = signal_variance;
            for j in 0..i {
                let s: f64 = self
                    .sq
                    .iter()
                    .zip(&inv)
                    .map(|(d, w)| d[i * n + j] * w)
                    .sum();
                let v = signal_variance * (-s).exp();
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        k
    }
}
