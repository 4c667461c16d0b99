use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use stochdiag_core::design::expand_replicates;
use stochdiag_core::diagnostics::DiagnosticReport;
use stochdiag_core::emulator::FittedEmulator;

use crate::config::RunConfig;
use crate::error::{io_err, CliError, CliResult, EXIT_OK, EXIT_USAGE};
use crate::experiments::run_toy_experiments;
use crate::io::{format_runs_csv, ingest_runs, read_run_table, write_file};
use crate::pipeline::{
    fit_emulator, make_design, simulate_design, simulate_inputs, validate_emulator, Role,
    SimulatorSpec,
};
use crate::render::{summary, write_figures};

#[derive(Debug, Parser)]
#[command(
    name = "stochdiag",
    version,
    about = "Emulate stochastic simulators and validate the emulator with replicated runs"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML run configuration; every key is optional.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// toy-normal, toy-gamma, table:<path> or exec:<command>.
    #[arg(long, global = true)]
    pub simulator: Option<String>,
    /// Also write SVG plots (validate).
    #[arg(long, global = true)]
    pub plots: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RoleArg {
    Train,
    Validation,
}

impl From<RoleArg> for Role {
    fn from(r: RoleArg) -> Self {
        match r {
            RoleArg::Train => Role::Train,
            RoleArg::Validation => Role::Validation,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Maximin Latin hypercube designs for training and validation.
    Design,
    /// Run the simulator on a design.
    Simulate {
        /// Design CSV (header x1..xd, one row per run). Without it both
        /// configured designs are generated and run.
        #[arg(long)]
        design: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "train")]
        role: RoleArg,
        /// Working directory for exec: simulators.
        #[arg(long)]
        work_dir: Option<PathBuf>,
    },
    /// Fit the configured emulator to a run table.
    Fit {
        #[arg(long)]
        runs: Option<PathBuf>,
    },
    /// Diagnostics of a fitted model against replicated validation runs.
    Validate {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        runs: Option<PathBuf>,
    },
    /// Text summary and SVG plots from a report file.
    Report {
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run the toy experiments end to end.
    ReproducePaper,
}

fn load_config(common: &Common) -> CliResult<(RunConfig, u64)> {
    let cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let seed = common.seed.unwrap_or(cfg.seed);
    Ok((cfg, seed))
}

fn simulator_spec(common: &Common, cfg: &RunConfig) -> CliResult<SimulatorSpec> {
    common
        .simulator
        .as_deref()
        .unwrap_or(&cfg.simulator)
        .parse()
}

fn or_default(p: &Option<PathBuf>, out_dir: &Path, name: &str) -> PathBuf {
    p.clone().unwrap_or_else(|| out_dir.join(name))
}

fn announce(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

/// Executes a parsed command line.
pub fn execute(cli: &Cli) -> CliResult<()> {
    let common = &cli.common;
    let (cfg, seed) = load_config(common)?;
    let out = &common.out_dir;
    match &cli.command {
        Command::Design => {
            let mut written = Vec::new();
            for role in [Role::Train, Role::Validation] {
                let d = make_design(&cfg, seed, role)?;
                let p = out.join(format!("design_{}.csv", role.name()));
                write_file(&p, &format_runs_csv(&expand_replicates(&d), None))?;
                written.push(p);
            }
            announce(&written);
        }
        Command::Simulate {
            design,
            role,
            work_dir,
        } => {
            let spec = simulator_spec(common, &cfg)?;
            let wd = work_dir.clone().unwrap_or_else(|| out.join("exec"));
            let mut sim = spec.build(&wd)?;
            let mut written = Vec::new();
            match design {
                Some(path) => {
                    let table = read_run_table(path)?;
                    if table.dim() != cfg.dim() {
                        return Err(CliError::Data(format!(
                            "{}: design has {} inputs but the configuration has {}",
                            path.display(),
                            table.dim(),
                            cfg.dim()
                        )));
                    }
                    let role = Role::from(*role);
                    let batch = simulate_inputs(sim.as_mut(), &table.inputs, seed, role)?;
                    let p = out.join(format!("{}_runs.csv", role.name()));
                    write_file(&p, &format_runs_csv(&batch.inputs, Some(&batch.outputs)))?;
                    written.push(p);
                }
                None => {
                    for role in [Role::Train, Role::Validation] {
                        let d = make_design(&cfg, seed, role)?;
                        let batch = simulate_design(sim.as_mut(), &d, seed, role)?;
                        let p = out.join(format!("{}_runs.csv", role.name()));
                        write_file(&p, &format_runs_csv(&batch.inputs, Some(&batch.outputs)))?;
                        written.push(p);
                    }
                }
            }
            announce(&written);
        }
        Command::Fit { runs } => {
            let path = or_default(runs, out, "train_runs.csv");
            let data = ingest_runs(&path, cfg.grouping_tolerance)?;
            let model = fit_emulator(&cfg, &data, seed)?;
            let p = out.join("model.json");
            write_file(&p, &model.to_json()?)?;
            let cov = model.covariance();
            println!(
                "fitted {} emulator on {} locations ({} runs): lengthscales {:?}, signal variance {}",
                match model {
                    FittedEmulator::Homoscedastic(_) => "homoscedastic",
                    FittedEmulator::Heteroscedastic(_) => "heteroscedastic",
                },
                data.n_locations(),
                data.total_runs(),
                cov.lengthscales,
                cov.signal_variance
            );
            for w in model.warnings() {
                println!("warning: {w}");
            }
            announce(&[p]);
        }
        Command::Validate { model, runs } => {
            let mpath = or_default(model, out, "model.json");
            let text = std::fs::read_to_string(&mpath).map_err(io_err(&mpath))?;
            let model = FittedEmulator::from_json(&text)?;
            let rpath = or_default(runs, out, "validation_runs.csv");
            let data = ingest_runs(&rpath, cfg.grouping_tolerance)?;
            let report = validate_emulator(&cfg, &model, &data, seed)?;
            let p = out.join("report.json");
            write_file(&p, &report.to_json()?)?;
            print!("{}", summary(&report));
            let mut written = vec![p];
            if common.plots {
                written.extend(write_figures(&report, &out.join("plots"))?);
            }
            announce(&written);
        }
        Command::Report { report } => {
            let path = or_default(report, out, "report.json");
            let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
            let report = DiagnosticReport::from_json(&text)?;
            let s = summary(&report);
            print!("{s}");
            let p = out.join("summary.txt");
            write_file(&p, &s)?;
            let mut written = vec![p];
            written.extend(write_figures(&report, &out.join("plots"))?);
            announce(&written);
        }
        Command::ReproducePaper => {
            let text = run_toy_experiments(&cfg, seed, out)?;
            print!("{text}");
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

/// Parses `args` (program name first) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
