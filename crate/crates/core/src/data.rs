//! Simulator runs grouped by unique input location.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::distributions::{sample_moments_with, SampleMoments, SdConvention};
use crate::error::{domain, Error, Result};

/// Runs pooled by input location, in first-appearance order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicatedDataset {
    /// One row per unique location.
    pub locations: DMatrix<f64>,
    /// Outputs observed at each location, in input order.
    pub replicates: Vec<Vec<f64>>,
}

fn rows_match(x: &DMatrix<f64>, i: usize, loc: &[f64], tol: f64) -> bool {
    loc.iter().enumerate().all(|(k, &v)| {
        let a = x[(i, k)];
        if tol == 0.0 {
            a.to_bits() == v.to_bits() || a == v
        } else {
            (a - v).abs() <= tol
        }
    })
}

impl ReplicatedDataset {
    /// Groups rows of `inputs` whose coordinates agree within `tolerance`
    /// (0 means exact equality).
    pub fn from_runs(inputs: &DMatrix<f64>, outputs: &[f64], tolerance: f64) -> Result<Self> {
        if inputs.nrows() != outputs.len() {
            return domain(format!(
                "{} input rows but {} outputs",
                inputs.nrows(),
                outputs.len()
            ));
        }
        if !(tolerance >= 0.0) {
            return domain("grouping tolerance must be >= 0");
        }
        let d = inputs.ncols();
        let mut locs: Vec<Vec<f64>> = Vec::new();
        let mut reps: Vec<Vec<f64>> = Vec::new();
        for (i, &y) in outputs.iter().enumerate() {
            if !y.is_finite() || inputs.row(i).iter().any(|v| !v.is_finite()) {
                return Err(Error::Ingestion {
                    row: i,
                    message: "non-finite value".into(),
                });
            }
            match locs
                .iter()
                .position(|loc| rows_match(inputs, i, loc, tolerance))
            {
                Some(j) => reps[j].push(y),
                None => {
                    locs.push(inputs.row(i).iter().copied().collect());
                    reps.push(vec![y]);
                }
            }
        }
        let flat: Vec<f64> = locs.iter().flatten().copied().collect();
        Ok(Self {
            locations: DMatrix::from_row_slice(locs.len(), d, &flat),
            replicates: reps,
        })
    }

    pub fn n_locations(&self) -> usize {
        self.replicates.len()
    }

    pub fn dim(&self) -> usize {
        self.locations.ncols()
    }

    pub fn replicate_counts(&self) -> Vec<usize> {
        self.replicates.iter().map(Vec::len).collect()
    }

    pub fn total_runs(&self) -> usize {
        self.replicates.iter().map(Vec::len).sum()
    }

    pub fn location(&self, i: usize) -> Vec<f64> {
        self.locations.row(i).iter().copied().collect()
    }

    pub fn means(&self) -> Vec<f64> {
        self.replicates
            .iter()
            .map(|r| r.iter().sum::<f64>() / r.len() as f64)
            .collect()
    }

    /// Per-location moments; `None` where only one run exists.
    pub fn moments(&self, convention: SdConvention) -> Vec<Option<SampleMoments>> {
        self.replicates
            .iter()
            .map(|r| sample_moments_with(r, convention).ok())
            .collect()
    }

    /// Flattens back to one row per run.
    pub fn to_runs(&self) -> (DMatrix<f64>, Vec<f64>) {
        let d = self.dim();
        let total = self.total_runs();
        let mut x = DMatrix::zeros(total, d);
        let mut y = Vec::with_capacity(total);
        let mut row = 0;
        for (i, reps) in self.replicates.iter().enumerate() {
            for &v in reps {
                for k in 0..d {
                    x[(row, k)] = self.locations[(i, k)];
                }
                y.push(v);
                row += 1;
            }
        }
        (x, y)
    }
}
