//! Box-constrained Nelder–Mead with random multi-start.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NelderMeadSettings {
    pub max_evals: usize,
    pub f_tol: f64,
    pub x_tol: f64,
    pub initial_step: f64,
}

impl Default for NelderMeadSettings {
    fn default() -> Self {
        Self {
            max_evals: 1500,
            f_tol: 1e-9,
            x_tol: 1e-6,
            initial_step: 0.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub converged: bool,
    pub evals: usize,
}

fn project(x: &[f64], lower: &[f64], upper: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(lower.iter().zip(upper))
        .map(|(&v, (&lo, &hi))| v.clamp(lo, hi))
        .collect()
}

/// Minimises `f` over the box `[lower, upper]` starting from `start`.
///
/// Points outside the box are evaluated at their projection plus a quadratic
/// penalty on the excursion. Non-finite objective values count as +∞.
pub fn nelder_mead<F>(
    f: &F,
    start: &[f64],
    lower: &[f64],
    upper: &[f64],
    settings: &NelderMeadSettings,
) -> Minimum
where
    F: Fn(&[f64]) -> f64,
{
    let n = start.len();
    let evals = std::cell::Cell::new(0usize);
    let eval = |x: &[f64]| {
        evals.set(evals.get() + 1);
        let p = project(x, lower, upper);
        let excess: f64 = x.iter().zip(&p).map(|(a, b)| (a - b).powi(2)).sum();
        let v = f(&p);
        if v.is_finite() {
            v + 1e3 * excess
        } else {
            f64::INFINITY
        }
    };

    let x0 = project(start, lower, upper);
    let mut simplex: Vec<Vec<f64>> = vec![x0.clone()];
    for i in 0..n {
        let mut v = x0.clone();
        let width = upper[i] - lower[i];
        let step = settings.initial_step.min(0.25 * width);
        // step inward when the start sits on the upper face
        v[i] = if v[i] + step <= upper[i] {
            v[i] + step
        } else {
            v[i] - step
        };
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|x| eval(x)).collect();
    let mut converged = false;

    while evals.get() < settings.max_evals {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let f_spread = values[n] - values[0];
        let x_spread = simplex[1..]
            .iter()
            .flat_map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0f64, f64::max);
        if values[0].is_finite()
            && f_spread.abs() <= settings.f_tol * (1.0 + values[0].abs())
            && x_spread <= settings.x_tol
        {
            converged = true;
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|k| simplex[..n].iter().map(|v| v[k]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n])
                .map(|(c, w)| c + t * (w - c))
                .collect()
        };

        let reflected = along(-1.0);
        let fr = eval(&reflected);
        if fr < values[0] {
            let expanded = along(-2.0);
            let fe = eval(&expanded);
            if fe < fr {
                simplex[n] = expanded;
                values[n] = fe;
            } else {
                simplex[n] = reflected;
                values[n] = fr;
            }
        } else if fr < values[n - 1] {
            simplex[n] = reflected;
            values[n] = fr;
        } else {
            let (contracted, fc) = if fr < values[n] {
                let c = along(-0.5);
                let fc = eval(&c);
                (c, fc)
            } else {
                let c = along(0.5);
                let fc = eval(&c);
                (c, fc)
            };
            if fc < values[n].min(fr) {
                simplex[n] = contracted;
                values[n] = fc;
            } else {
                let best = simplex[0].clone();
                for i in 1..=n {
                    simplex[i] = best
                        .iter()
                        .zip(&simplex[i])
                        .map(|(b, v)| b + 0.5 * (v - b))
                        .collect();
                    values[i] = eval(&simplex[i]);
                }
            }
        }
    }

    let best = (0..=n)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .unwrap_or(0);
    let x = project(&simplex[best], lower, upper);
    let value = f(&x);
    Minimum {
        x,
        value,
        converged,
        evals: evals.get(),
    }
}

/// Runs Nelder–Mead from `fixed_starts` followed by random starts drawn
/// uniformly from `[start_lower, start_upper]` until `n_starts` runs are
/// done. Returns the best run; ties keep the earliest.
///
/// Fails only when no run produced a finite objective, or none converged.
#[allow(clippy::too_many_arguments)]
pub fn multi_start<F>(
    f: &F,
    fixed_starts: &[Vec<f64>],
    n_starts: usize,
    start_lower: &[f64],
    start_upper: &[f64],
    lower: &[f64],
    upper: &[f64],
    settings: &NelderMeadSettings,
    rng: &mut RngStream,
) -> Result<Minimum>
where
    F: Fn(&[f64]) -> f64,
{
    let n_starts = n_starts.max(1);
    let mut starts: Vec<Vec<f64>> = fixed_starts.iter().take(n_starts).cloned().collect();
    while starts.len() < n_starts {
        starts.push(
            start_lower
                .iter()
                .zip(start_upper)
                .map(|(&lo, &hi)| lo + (hi - lo) * rng.random::<f64>())
                .collect(),
        );
    }
    let mut best: Option<Minimum> = None;
    let mut any_converged = false;
    for s in &starts {
        let m = nelder_mead(f, s, lower, upper, settings);
        any_converged |= m.converged && m.value.is_finite();
        let better = match &best {
            None => true,
            Some(b) => m.value < b.value || (!b.value.is_finite() && m.value.is_finite()),
        };
        if better {
            best = Some(m);
        }
    }
    let best = best.expect("at least one start");
    if !best.value.is_finite() {
        return Err(Error::Fit {
            message: "objective was non-finite at every start".into(),
            best: best.x,
        });
    }
    if !any_converged {
        return Err(Error::Fit {
            message: "no optimizer start converged".into(),
            best: best.x,
        });
    }
    Ok(best)
}
