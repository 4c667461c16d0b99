//! Toy stochastic simulators with known moments, and adapters for external
//! simulators (precomputed run tables or a subprocess exchanging CSV).

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::Command;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::rng::RngStream;

/// Mean trend shared by both toy simulators: sin(16x) + cos(24x) + 8x.
pub fn toy_trend(x: f64) -> f64 {
    (16.0 * x).sin() + (24.0 * x).cos() + 8.0 * x
}

/// Noise sd of the heteroscedastic normal toy: 0.1 + 0.9x.
pub fn toy_noise_sd(x: f64) -> f64 {
    0.1 + 0.9 * x
}

fn check_unit(x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return domain(format!("toy simulator input must lie in [0,1], got {x}"));
    }
    Ok(())
}

pub fn toy_normal_run(x: f64, rng: &mut RngStream) -> Result<f64> {
    check_unit(x)?;
    let z: f64 = rng.sample(StandardNormal);
    Ok(toy_trend(x) + toy_noise_sd(x) * z)
}

/// Gamma noise parameterisation. Shape 1 / rate 1 by default; the noise is
/// added without centring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaNoise {
    pub shape: f64,
    pub rate: f64,
}

impl Default for GammaNoise {
    fn default() -> Self {
        Self {
            shape: 1.0,
            rate: 1.0,
        }
    }
}

impl GammaNoise {
    pub fn mean(&self) -> f64 {
        self.shape / self.rate
    }

    pub fn variance(&self) -> f64 {
        self.shape / (self.rate * self.rate)
    }

    pub fn skewness(&self) -> f64 {
        2.0 / self.shape.sqrt()
    }

    pub fn excess_kurtosis(&self) -> f64 {
        6.0 / self.shape
    }
}

pub fn toy_gamma_run(x: f64, rng: &mut RngStream) -> Result<f64> {
    toy_gamma_run_with(x, GammaNoise::default(), rng)
}

pub fn toy_gamma_run_with(x: f64, noise: GammaNoise, rng: &mut RngStream) -> Result<f64> {
    check_unit(x)?;
    let g = Gamma::new(noise.shape, 1.0 / noise.rate)
        .map_err(|e| Error::Domain(format!("gamma noise: {e}")))?;
    Ok(toy_trend(x) + g.sample(rng))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub simulator: String,
    pub seed: u64,
}

/// Runs aligned row-for-row: `outputs[i]` came from `inputs.row(i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationBatch {
    pub inputs: DMatrix<f64>,
    pub outputs: Vec<f64>,
    pub provenance: Provenance,
}

pub trait Simulator {
    fn id(&self) -> String;

    /// Evaluates every row of `inputs`. Implementations must be deterministic
    /// given `rng` and the row order.
    fn simulate(&mut self, inputs: &DMatrix<f64>, rng: &RngStream) -> Result<SimulationBatch>;
}

/// The analytic one-dimensional toy simulators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ToySimulator {
    /// Trend plus N(0, (0.1 + 0.9x)²) noise.
    Normal,
    /// Trend plus gamma noise.
    Gamma(GammaNoise),
}

impl ToySimulator {
    pub fn gamma() -> Self {
        ToySimulator::Gamma(GammaNoise::default())
    }

    pub fn run(&self, x: f64, rng: &mut RngStream) -> Result<f64> {
        match self {
            ToySimulator::Normal => toy_normal_run(x, rng),
            ToySimulator::Gamma(noise) => toy_gamma_run_with(x, *noise, rng),
        }
    }

    pub fn true_mean(&self, x: f64) -> f64 {
        match self {
            ToySimulator::Normal => toy_trend(x),
            ToySimulator::Gamma(noise) => toy_trend(x) + noise.mean(),
        }
    }

    pub fn true_sd(&self, x: f64) -> f64 {
        match self {
            ToySimulator::Normal => toy_noise_sd(x),
            ToySimulator::Gamma(noise) => noise.variance().sqrt(),
        }
    }
}

impl Simulator for ToySimulator {
    fn id(&self) -> String {
        match self {
            ToySimulator::Normal => "toy-normal".into(),
            ToySimulator::Gamma(_) => "toy-gamma".into(),
        }
    }

    /// Row `i` draws from `rng.substream(i)`, so results do not depend on
    /// the thread count.
    fn simulate(&mut self, inputs: &DMatrix<f64>, rng: &RngStream) -> Result<SimulationBatch> {
        if inputs.ncols() != 1 {
            return domain(format!(
                "toy simulators take one input column, got {}",
                inputs.ncols()
            ));
        }
        let sim = *self;
        let outputs = (0..inputs.nrows())
            .into_par_iter()
            .map(|i| sim.run(inputs[(i, 0)], &mut rng.substream(i as u64)))
            .collect::<Result<Vec<f64>>>()?;
        Ok(SimulationBatch {
            inputs: inputs.clone(),
            outputs,
            provenance: Provenance {
                simulator: self.id(),
                seed: rng.seed(),
            },
        })
    }
}

fn row_key(row: impl Iterator<Item = f64>) -> Vec<u64> {
    // -0.0 and 0.0 compare equal
    row.map(|v| if v == 0.0 { 0 } else { v.to_bits() })
        .collect()
}

/// Serves outputs from a precomputed run table keyed by exact input row.
/// Repeated requests for the same input consume the stored replicates in
/// table order.
#[derive(Debug, Clone)]
pub struct TableSimulator {
    name: String,
    table: HashMap<Vec<u64>, Vec<f64>>,
    cursor: HashMap<Vec<u64>, usize>,
}

impl TableSimulator {
    pub fn new(name: impl Into<String>, inputs: &DMatrix<f64>, outputs: &[f64]) -> Result<Self> {
        if inputs.nrows() != outputs.len() {
            return domain("run table inputs and outputs differ in length");
        }
        let mut table: HashMap<Vec<u64>, Vec<f64>> = HashMap::new();
        for (i, &y) in outputs.iter().enumerate() {
            table
                .entry(row_key(inputs.row(i).iter().copied()))
                .or_default()
                .push(y);
        }
        Ok(Self {
            name: name.into(),
            table,
            cursor: HashMap::new(),
        })
    }
}

impl Simulator for TableSimulator {
    fn id(&self) -> String {
        format!("table:{}", self.name)
    }

    fn simulate(&mut self, inputs: &DMatrix<f64>, rng: &RngStream) -> Result<SimulationBatch> {
        let mut outputs = Vec::with_capacity(inputs.nrows());
        for i in 0..inputs.nrows() {
            let key = row_key(inputs.row(i).iter().copied());
            let stored = self.table.get(&key).ok_or_else(|| Error::Ingestion {
                row: i,
                message: "input row not present in the run table".into(),
            })?;
            let pos = self.cursor.entry(key).or_insert(0);
            let y = *stored.get(*pos).ok_or_else(|| Error::Ingestion {
                row: i,
                message: format!("run table holds only {} runs for this input", stored.len()),
            })?;
            *pos += 1;
            outputs.push(y);
        }
        Ok(SimulationBatch {
            inputs: inputs.clone(),
            outputs,
            provenance: Provenance {
                simulator: self.id(),
                seed: rng.seed(),
            },
        })
    }
}

/// Runs an external command once per batch.
///
/// Protocol: `inputs.csv` (header `x1,...,xd`) is written into `work_dir`,
/// the command runs through `sh -c` with `work_dir` as its working directory
/// and `STOCHDIAG_SEED` set, and must leave `outputs.csv` there: a `y`
/// header followed by one value per input row.
#[derive(Debug, Clone)]
pub struct ExecSimulator {
    pub command: String,
    pub work_dir: PathBuf,
}

impl ExecSimulator {
    pub fn new(command: impl Into<String>, work_dir: impl AsRef<Path>) -> Self {
        Self {
            command: command.into(),
            work_dir: work_dir.as_ref().to_path_buf(),
        }
    }
}

pub fn write_inputs_csv(inputs: &DMatrix<f64>) -> String {
    let header: Vec<String> = (1..=inputs.ncols()).map(|k| format!("x{k}")).collect();
    let mut s = header.join(",");
    s.push('\n');
    for i in 0..inputs.nrows() {
        let row: Vec<String> = inputs.row(i).iter().map(|v| format!("{v}")).collect();
        let _ = writeln!(s, "{}", row.join(","));
    }
    s
}

pub fn parse_outputs_csv(text: &str, expected: usize) -> Result<Vec<f64>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    match lines.next().map(str::trim) {
        Some("y") => {}
        other => {
            return Err(Error::Ingestion {
                row: 0,
                message: format!("expected header `y`, found {other:?}"),
            })
        }
    }
    let mut out = Vec::with_capacity(expected);
    for (i, line) in lines.enumerate() {
        let v: f64 = line.trim().parse().map_err(|_| Error::Ingestion {
            row: i,
            message: format!("cannot parse output {:?}", line.trim()),
        })?;
        if !v.is_finite() {
            return Err(Error::Ingestion {
                row: i,
                message: "non-finite output".into(),
            });
        }
        out.push(v);
    }
    if out.len() != expected {
        return Err(Error::Ingestion {
            row: out.len().min(expected),
            message: format!("expected {expected} outputs, got {}", out.len()),
        });
    }
    Ok(out)
}

impl Simulator for ExecSimulator {
    fn id(&self) -> String {
        format!("exec:{}", self.command)
    }

    fn simulate(&mut self, inputs: &DMatrix<f64>, rng: &RngStream) -> Result<SimulationBatch> {
        std::fs::create_dir_all(&self.work_dir)?;
        let out_path = self.work_dir.join("outputs.csv");
        if out_path.exists() {
            std::fs::remove_file(&out_path)?;
        }
        std::fs::write(self.work_dir.join("inputs.csv"), write_inputs_csv(inputs))?;
        let status = Command::new("sh")
            .arg("-c")
            .arg(&self.command)
            .current_dir(&self.work_dir)
            .env("STOCHDIAG_SEED", rng.seed().to_string())
            .status()?;
        if !status.success() {
            return Err(Error::Ingestion {
                row: 0,
                message: format!("simulator command exited with {status}"),
            });
        }
        let text = std::fs::read_to_string(&out_path).map_err(|e| Error::Ingestion {
            row: 0,
            message: format!("cannot read outputs.csv: {e}"),
        })?;
        let outputs = parse_outputs_csv(&text, inputs.nrows())?;
        Ok(SimulationBatch {
            inputs: inputs.clone(),
            outputs,
            provenance: Provenance {
                simulator: self.id(),
                seed: rng.seed(),
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::sample_moments;

    #[test]
    fn trend_values() {
        assert!((toy_trend(0.0) - 1.0).abs() < 1e-15);
        assert!((toy_noise_sd(0.0) - 0.1).abs() < 1e-15);
        assert!((toy_trend(0.5) - 5.83321).abs() < 5e-6);
        assert!((toy_noise_sd(0.5) - 0.55).abs() < 1e-15);
        assert!((toy_trend(1.0) - 8.13628).abs() < 5e-6);
    }

    #[test]
    fn rejects_out_of_range() {
        let mut rng = RngStream::new(0, 0);
        assert!(toy_normal_run(1.5, &mut rng).is_err());
        assert!(toy_gamma_run(-0.1, &mut rng).is_err());
    }

    #[test]
    fn normal_toy_moments_at_one() {
        let mut rng = RngStream::new(21, 0);
        let ys: Vec<f64> = (0..100_000)
            .map(|_| toy_normal_run(1.0, &mut rng).unwrap())
            .collect();
        let m = sample_moments(&ys).unwrap();
        assert!((m.mean - 8.13628).abs() < 0.01);
        assert!((m.sd - 1.0).abs() < 0.01);
    }

    #[test]
    fn gamma_toy_moments() {
        let mut rng = RngStream::new(22, 0);
        let ys: Vec<f64> = (0..200_000)
            .map(|_| toy_gamma_run(0.0, &mut rng).unwrap())
            .collect();
        let m = sample_moments(&ys).unwrap();
        assert!((m.mean - 2.0).abs() < 0.01);
        assert!((m.variance - 1.0).abs() < 0.03);
        assert!((m.skewness.unwrap() - 2.0).abs() < 0.1);
        assert!((m.excess_kurtosis.unwrap() - 6.0).abs() < 1.0);
    }

    #[test]
    fn batch_is_deterministic() {
        let x = DMatrix::from_fn(30, 1, |i, _| i as f64 / 29.0);
        let a = ToySimulator::Normal
            .simulate(&x, &RngStream::new(3, 0))
            .unwrap();
        let b = ToySimulator::Normal
            .simulate(&x, &RngStream::new(3, 0))
            .unwrap();
        assert_eq!(a, b);
        assert_eq!(a.outputs.len(), 30);
    }

    #[test]
    fn table_lookup_and_missing_row() {
        let x = DMatrix::from_row_slice(3, 1, &[0.1, 0.2, 0.1]);
        let mut sim = TableSimulator::new("t", &x, &[1.0, 2.0, 3.0]).unwrap();
        let req = DMatrix::from_row_slice(3, 1, &[0.1, 0.1, 0.2]);
        let b = sim.simulate(&req, &RngStream::new(0, 0)).unwrap();
        assert_eq!(b.outputs, vec![1.0, 3.0, 2.0]);

        let mut sim = TableSimulator::new("t", &x, &[1.0, 2.0, 3.0]).unwrap();
        let req = DMatrix::from_row_slice(2, 1, &[0.2, 0.9]);
        match sim.simulate(&req, &RngStream::new(0, 0)) {
            Err(Error::Ingestion { row, .. }) => assert_eq!(row, 1),
            other => panic!("expected ingestion error, got {other:?}"),
        }
    }

    #[test]
    fn outputs_parser_errors_name_row() {
        assert_eq!(parse_outputs_csv("y\n1\n2.5\n", 2).unwrap(), vec![1.0, 2.5]);
        match parse_outputs_csv("y\n1\nabc\n", 2) {
            Err(Error::Ingestion { row, .. }) => assert_eq!(row, 1),
            other => panic!("{other:?}"),
        }
        assert!(parse_outputs_csv("z\n1\n", 1).is_err());
        assert!(parse_outputs_csv("y\n1\n", 2).is_err());
    }
}
