//! design → simulate → fit → validate, with fixed stream assignments so
//! every stage is reproducible from `(config, seed)` alone.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::DMatrix;
use stochdiag_core::data::ReplicatedDataset;
use stochdiag_core::design::{expand_replicates, maximin_lhs, scale_to_bounds, Design};
use stochdiag_core::diagnostics::{run_all, DiagnosticReport, ReplicatedValidationSet};
use stochdiag_core::emulator::{fit_hetgp_data, fit_homgp_data, FittedEmulator};
use stochdiag_core::simulators::{
    ExecSimulator, SimulationBatch, Simulator, TableSimulator, ToySimulator,
};
use stochdiag_core::RngStream;

use crate::config::{EmulatorKind, RunConfig};
use crate::error::{CliError, CliResult};
use crate::io::read_run_table;

/// Substream keys under `RngStream::new(seed, 0)`.
pub mod streams {
    pub const TRAIN_DESIGN: u64 = 1;
    pub const VALIDATION_DESIGN: u64 = 2;
    pub const TRAIN_RUNS: u64 = 3;
    pub const VALIDATION_RUNS: u64 = 4;
    pub const FIT: u64 = 5;
    pub const DIAGNOSTICS: u64 = 6;
}

pub fn root_stream(seed: u64) -> RngStream {
    RngStream::new(seed, 0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Train,
    Validation,
}

impl Role {
    fn design_stream(self) -> u64 {
        match self {
            Role::Train => streams::TRAIN_DESIGN,
            Role::Validation => streams::VALIDATION_DESIGN,
        }
    }

    fn runs_stream(self) -> u64 {
        match self {
            Role::Train => streams::TRAIN_RUNS,
            Role::Validation => streams::VALIDATION_RUNS,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Role::Train => "train",
            Role::Validation => "validation",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SimulatorSpec {
    ToyNormal,
    ToyGamma,
    Table(PathBuf),
    Exec(String),
}

impl FromStr for SimulatorSpec {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "toy-normal" => Ok(SimulatorSpec::ToyNormal),
            "toy-gamma" => Ok(SimulatorSpec::ToyGamma),
            _ => {
                if let Some(p) = s.strip_prefix("table:").filter(|p| !p.is_empty()) {
                    Ok(SimulatorSpec::Table(PathBuf::from(p)))
                } else if let Some(c) = s.strip_prefix("exec:").filter(|c| !c.is_empty()) {
                    Ok(SimulatorSpec::Exec(c.to_string()))
                } else {
                    Err(CliError::Usage(format!(
                        "unknown simulator {s:?}; expected toy-normal, toy-gamma, table:<path> or exec:<command>"
                    )))
                }
            }
        }
    }
}

impl SimulatorSpec {
    /// `work_dir` is where an external command exchanges its CSV files.
    pub fn build(&self, work_dir: &Path) -> CliResult<Box<dyn Simulator>> {
        Ok(match self {
            SimulatorSpec::ToyNormal => Box::new(ToySimulator::Normal),
            SimulatorSpec::ToyGamma => Box::new(ToySimulator::gamma()),
            SimulatorSpec::Table(path) => {
                let table = read_run_table(path)?;
                let y = table.outputs.ok_or_else(|| {
                    CliError::Data(format!("{}: run table has no `y` column", path.display()))
                })?;
                Box::new(TableSimulator::new(
                    path.display().to_string(),
                    &table.inputs,
                    &y,
                )?)
            }
            SimulatorSpec::Exec(cmd) => Box::new(ExecSimulator::new(cmd.clone(), work_dir)),
        })
    }
}

/// Unique design points on the configured domain with their replicate counts.
pub fn make_design(cfg: &RunConfig, seed: u64, role: Role) -> CliResult<Design> {
    let (n, r) = match role {
        Role::Train => (cfg.design.train_locations, cfg.design.train_replicates),
        Role::Validation => (cfg.validation_locations(), cfg.design.validation_replicates),
    };
    let unit = maximin_lhs(
        n,
        cfg.dim(),
        &root_stream(seed).substream(role.design_stream()),
        cfg.design.lhs_restarts,
    )?;
    let points = scale_to_bounds(&unit.points, &cfg.domain.lower, &cfg.domain.upper)?;
    Ok(Design::new(points, vec![r; n])?)
}

/// Runs one row per replicate; replicate rows are contiguous.
pub fn simulate_inputs(
    sim: &mut dyn Simulator,
    inputs: &DMatrix<f64>,
    seed: u64,
    role: Role,
) -> CliResult<SimulationBatch> {
    Ok(sim.simulate(inputs, &root_stream(seed).substream(role.runs_stream()))?)
}

pub fn simulate_design(
    sim: &mut dyn Simulator,
    design: &Design,
    seed: u64,
    role: Role,
) -> CliResult<SimulationBatch> {
    simulate_inputs(sim, &expand_replicates(design), seed, role)
}

pub fn fit_emulator(
    cfg: &RunConfig,
    data: &ReplicatedDataset,
    seed: u64,
) -> CliResult<FittedEmulator> {
    let rng = root_stream(seed).substream(streams::FIT);
    Ok(match cfg.emulator.kind {
        EmulatorKind::Homoscedastic => fit_homgp_data(data, &cfg.emulator.fit, &rng)?.into(),
        EmulatorKind::Heteroscedastic => fit_hetgp_data(data, &cfg.emulator.fit, &rng)?.into(),
    })
}

pub fn validate_emulator(
    cfg: &RunConfig,
    model: &FittedEmulator,
    data: &ReplicatedDataset,
    seed: u64,
) -> CliResult<DiagnosticReport> {
    if data.dim() != model.dim() {
        return Err(CliError::Data(format!(
            "validation runs have {} inputs but the model has {}",
            data.dim(),
            model.dim()
        )));
    }
    let set = ReplicatedValidationSet::from_dataset(data, cfg.diagnostics.reference.sd_convention)?;
    Ok(run_all(
        model,
        &set,
        &cfg.tolerance,
        &cfg.diagnostics,
        &root_stream(seed).substream(streams::DIAGNOSTICS),
    )?)
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub train_design: Design,
    pub validation_design: Design,
    pub train_runs: SimulationBatch,
    pub validation_runs: SimulationBatch,
    pub model: FittedEmulator,
    pub report: DiagnosticReport,
}

/// Whole pipeline in memory.
pub fn run_pipeline(
    cfg: &RunConfig,
    sim: &mut dyn Simulator,
    seed: u64,
) -> CliResult<PipelineOutcome> {
    cfg.validate()?;
    let train_design = make_design(cfg, seed, Role::Train)?;
    let validation_design = make_design(cfg, seed, Role::Validation)?;
    let train_runs = simulate_design(sim, &train_design, seed, Role::Train)?;
    let validation_runs = simulate_design(sim, &validation_design, seed, Role::Validation)?;
    let tol = cfg.grouping_tolerance;
    let train = ReplicatedDataset::from_runs(&train_runs.inputs, &train_runs.outputs, tol)?;
    let val = ReplicatedDataset::from_runs(&validation_runs.inputs, &validation_runs.outputs, tol)?;
    let model = fit_emulator(cfg, &train, seed)?;
    let report = validate_emulator(cfg, &model, &val, seed)?;
    Ok(PipelineOutcome {
        train_design,
        validation_design,
        train_runs,
        validation_runs,
        model,
        report,
    })
}
