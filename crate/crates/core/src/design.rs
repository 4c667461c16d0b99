//! Replicated space-filling designs on the unit hypercube.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::rng::RngStream;

/// Unique design points (rows, in `[0,1]^d`) with a replicate count per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Design {
    pub points: DMatrix<f64>,
    pub replicates: Vec<usize>,
}

impl Design {
    pub fn new(points: DMatrix<f64>, replicates: Vec<usize>) -> Result<Self> {
        if replicates.len() != points.nrows() {
            return domain(format!(
                "design has {} points but {} replicate counts",
                points.nrows(),
                replicates.len()
            ));
        }
        if replicates.contains(&0) {
            return domain("replicate counts must be >= 1");
        }
        Ok(Self { points, replicates })
    }

    /// Same replicate count at every point.
    pub fn with_uniform_replicates(mut self, r: usize) -> Result<Self> {
        if r == 0 {
            return domain("replicate counts must be >= 1");
        }
        self.replicates = vec![r; self.points.nrows()];
        Ok(self)
    }

    pub fn n_points(&self) -> usize {
        self.points.nrows()
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn total_runs(&self) -> usize {
        self.replicates.iter().sum()
    }
}

/// Smallest pairwise Euclidean distance between rows (∞ for fewer than 2 rows).
pub fn min_pairwise_distance(points: &DMatrix<f64>) -> f64 {
    let n = points.nrows();
    let mut best = f64::INFINITY;
    for i in 0..n {
        for j in (i + 1)..n {
            let d2: f64 = (0..points.ncols())
                .map(|k| (points[(i, k)] - points[(j, k)]).powi(2))
                .sum();
            best = best.min(d2);
        }
    }
    best.sqrt()
}

/// One random Latin hypercube: per column, a random permutation of strata
/// with uniform jitter inside each stratum.
pub fn random_lhs(n: usize, d: usize, rng: &mut RngStream) -> DMatrix<f64> {
    let mut points = DMatrix::zeros(n, d);
    let mut strata: Vec<usize> = (0..n).collect();
    for col in 0..d {
        strata.shuffle(rng);
        for (row, &s) in strata.iter().enumerate() {
            let u: f64 = rng.random();
            points[(row, col)] = (s as f64 + u) / n as f64;
        }
    }
    points
}

/// Best-of-`n_restarts` maximin Latin hypercube, one replicate per point.
///
/// Candidate `k` is drawn from `rng.substream(k)`, so a larger restart count
/// only adds candidates. Ties go to the lowest candidate index.
pub fn maximin_lhs(n: usize, d: usize, rng: &RngStream, n_restarts: usize) -> Result<Design> {
    if n == 0 || d == 0 || n_restarts == 0 {
        return domain("maximin_lhs needs n, d and n_restarts >= 1");
    }
    let (_, _, best) = (0..n_restarts)
        .into_par_iter()
        .map(|k| {
            let pts = random_lhs(n, d, &mut rng.substream(k as u64));
            (k, min_pairwise_distance(&pts), pts)
        })
        .reduce_with(|a, b| {
            if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) {
                b
            } else {
                a
            }
        })
        .expect("n_restarts >= 1");
    Design::new(best, vec![1; n])
}

/// Repeats row `i` of the design `r_i` times, contiguously and in order.
pub fn expand_replicates(design: &Design) -> DMatrix<f64> {
    let d = design.dim();
    let total = design.total_runs();
    let mut out = DMatrix::zeros(total, d);
    let mut row = 0;
    for (i, &r) in design.replicates.iter().enumerate() {
        for _ in 0..r {
            for k in 0..d {
                out[(row, k)] = design.points[(i, k)];
            }
            row += 1;
        }
    }
    out
}

fn check_bounds(d: usize, lower: &[f64], upper: &[f64]) -> Result<()> {
    if lower.len() != d || upper.len() != d {
        return domain(format!(
            "bounds have lengths {}/{} but the design has {d} columns",
            lower.len(),
            upper.len()
        ));
    }
    for (k, (lo, hi)) in lower.iter().zip(upper).enumerate() {
        if !(lo < hi) {
            return domain(format!("bound {k}: lower {lo} must be below upper {hi}"));
        }
    }
    Ok(())
}

/// Affine map of unit-cube rows onto `[lower, upper]` per column.
pub fn scale_to_bounds(
    points: &DMatrix<f64>,
    lower: &[f64],
    upper: &[f64],
) -> Result<DMatrix<f64>> {
    check_bounds(points.ncols(), lower, upper)?;
    let mut out = points.clone();
    for k in 0..points.ncols() {
        let w = upper[k] - lower[k];
        out.column_mut(k)
            .iter_mut()
            .for_each(|v| *v = lower[k] + w * *v);
    }
    Ok(out)
}

/// Inverse of [`scale_to_bounds`].
pub fn unscale_from_bounds(
    points: &DMatrix<f64>,
    lower: &[f64],
    upper: &[f64],
) -> Result<DMatrix<f64>> {
    check_bounds(points.ncols(), lower, upper)?;
    let mut out = points.clone();
    for k in 0..points.ncols() {
        let w = upper[k] - lower[k];
        out.column_mut(k)
            .iter_mut()
            .for_each(|v| *v = (*v - lower[k]) / w);
    }
    Ok(out)
}
