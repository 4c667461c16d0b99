//! The three toy experiments: a well-trained heteroscedastic emulator, a
//! small-data homoscedastic emulator, and a heteroscedastic emulator of the
//! gamma-noise simulator.

use std::fmt::Write as _;
use std::path::Path;

use stochdiag_core::simulators::{Simulator, ToySimulator};

use crate::config::{EmulatorKind, RunConfig};
use crate::error::CliResult;
use crate::io::{format_runs_csv, write_file};
use crate::pipeline::{run_pipeline, PipelineOutcome};
use crate::render::{summary, write_figures};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Experiment {
    pub name: &'static str,
    pub simulator: ToySimulator,
    pub emulator: EmulatorKind,
    pub train_locations: usize,
    pub train_replicates: usize,
    pub validation_locations: usize,
    pub validation_replicates: usize,
}

pub const VALIDATION_LOCATIONS: usize = 10;
pub const VALIDATION_REPLICATES: usize = 5;

pub fn good() -> Experiment {
    Experiment {
        name: "good",
        simulator: ToySimulator::Normal,
        emulator: EmulatorKind::Heteroscedastic,
        train_locations: 20,
        train_replicates: 20,
        validation_locations: VALIDATION_LOCATIONS,
        validation_replicates: VALIDATION_REPLICATES,
    }
}

pub fn small_data() -> Experiment {
    Experiment {
        name: "small_data",
        simulator: ToySimulator::Normal,
        emulator: EmulatorKind::Homoscedastic,
        train_locations: 6,
        train_replicates: 3,
        validation_locations: VALIDATION_LOCATIONS,
        validation_replicates: VALIDATION_REPLICATES,
    }
}

pub fn gamma() -> Experiment {
    Experiment {
        simulator: ToySimulator::gamma(),
        name: "gamma",
        ..good()
    }
}

pub fn toy_experiments() -> [Experiment; 3] {
    [good(), small_data(), gamma()]
}

impl Experiment {
    /// `base` with this experiment's sizes, emulator and simulator.
    pub fn config(&self, base: &RunConfig) -> RunConfig {
        let mut cfg = base.clone();
        cfg.simulator = match self.simulator {
            ToySimulator::Normal => "toy-normal".into(),
            ToySimulator::Gamma(_) => "toy-gamma".into(),
        };
        cfg.domain.lower = vec![0.0];
        cfg.domain.upper = vec![1.0];
        cfg.design.train_locations = self.train_locations;
        cfg.design.train_replicates = self.train_replicates;
        cfg.design.validation_locations = Some(self.validation_locations);
        cfg.design.validation_replicates = self.validation_replicates;
        cfg.emulator.kind = self.emulator;
        cfg
    }

    pub fn run(&self, base: &RunConfig, seed: u64) -> CliResult<PipelineOutcome> {
        let cfg = self.config(base);
        let mut sim = self.simulator;
        run_pipeline(&cfg, &mut sim as &mut dyn Simulator, seed)
    }
}

/// Runs every experiment and writes one directory per experiment under
/// `out_dir`. Returns the top-level summary text.
pub fn run_toy_experiments(base: &RunConfig, seed: u64, out_dir: &Path) -> CliResult<String> {
    let mut top = String::new();
    let _ = writeln!(top, "toy experiments, seed {seed}");
    for exp in toy_experiments() {
        let cfg = exp.config(base);
        let out = exp.run(base, seed)?;
        let dir = out_dir.join(exp.name);
        let mut cfg_echo = cfg.clone();
        cfg_echo.seed = seed;
        write_file(&dir.join("config.toml"), &cfg_echo.to_toml()?)?;
        write_file(
            &dir.join("train_runs.csv"),
            &format_runs_csv(&out.train_runs.inputs, Some(&out.train_runs.outputs)),
        )?;
        write_file(
            &dir.join("validation_runs.csv"),
            &format_runs_csv(
                &out.validation_runs.inputs,
                Some(&out.validation_runs.outputs),
            ),
        )?;
        write_file(&dir.join("model.json"), &out.model.to_json()?)?;
        write_file(&dir.join("report.json"), &out.report.to_json()?)?;
        let text = summary(&out.report);
        write_file(&dir.join("summary.txt"), &text)?;
        write_figures(&out.report, &dir.join("plots"))?;
        let _ = writeln!(top);
        let _ = writeln!(
            top,
            "[{}] {} simulator, {} emulator, training {}x{}, validation {}x{}",
            exp.name,
            cfg.simulator,
            match exp.emulator {
                EmulatorKind::Homoscedastic => "homoscedastic",
                EmulatorKind::Heteroscedastic => "heteroscedastic",
            },
            exp.train_locations,
            exp.train_replicates,
            exp.validation_locations,
            exp.validation_replicates
        );
        for c in &out.report.counts {
            let _ = writeln!(
                top,
                "  {:<9} tolerance={:<3} |U|>0.95: {:>2}/{:<2} |U|>0.995: {:>2}  U<0: {:>2}",
                c.kind.name(),
                if c.tolerance_applied { "yes" } else { "no" },
                c.flagged_095,
                c.n,
                c.flagged_0995,
                c.negative
            );
        }
    }
    write_file(&out_dir.join("summary.txt"), &top)?;
    Ok(top)
}
