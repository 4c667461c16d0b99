//! Run configuration, read from TOML. Every key is optional.

use std::path::Path;

use serde::{Deserialize, Serialize};
use stochdiag_core::diagnostics::{DiagnosticConfig, ToleranceSpec};
use stochdiag_core::emulator::GpFitConfig;

use crate::error::{io_err, CliError, CliResult};

pub const DEFAULT_SEED: u64 = 20240601;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmulatorKind {
    #[serde(alias = "hom")]
    Homoscedastic,
    #[default]
    #[serde(alias = "het")]
    Heteroscedastic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Default for DomainConfig {
    fn default() -> Self {
        Self {
            lower: vec![0.0],
            upper: vec![1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignConfig {
    pub train_locations: usize,
    pub train_replicates: usize,
    /// Defaults to 10 per input dimension.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validation_locations: Option<usize>,
    pub validation_replicates: usize,
    /// Candidate Latin hypercubes scored for the maximin criterion.
    pub lhs_restarts: usize,
}

impl Default for DesignConfig {
    fn default() -> Self {
        Self {
            train_locations: 20,
            train_replicates: 20,
            validation_locations: None,
            validation_replicates: 4,
            lhs_restarts: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmulatorConfig {
    pub kind: EmulatorKind,
    pub fit: GpFitConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// `toy-normal`, `toy-gamma`, `table:<path>` or `exec:<command>`.
    pub simulator: String,
    /// Inputs closer than this in every coordinate pool as replicates.
    pub grouping_tolerance: f64,
    pub domain: DomainConfig,
    pub design: DesignConfig,
    pub emulator: EmulatorConfig,
    pub tolerance: ToleranceSpec,
    pub diagnostics: DiagnosticConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            simulator: "toy-normal".into(),
            grouping_tolerance: 0.0,
            domain: DomainConfig::default(),
            design: DesignConfig::default(),
            emulator: EmulatorConfig::default(),
            tolerance: ToleranceSpec::default(),
            diagnostics: DiagnosticConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn dim(&self) -> usize {
        self.domain.lower.len()
    }

    pub fn validation_locations(&self) -> usize {
        self.design.validation_locations.unwrap_or(10 * self.dim())
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        let d = self.dim();
        if d == 0 || self.domain.upper.len() != d {
            return bad(format!(
                "domain bounds must be non-empty and equal length, got {} lower and {} upper",
                d,
                self.domain.upper.len()
            ));
        }
        for (k, (lo, hi)) in self.domain.lower.iter().zip(&self.domain.upper).enumerate() {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return bad(format!("domain bound {}: need finite lower < upper", k + 1));
            }
        }
        let dz = &self.design;
        if dz.train_locations == 0
            || dz.train_replicates == 0
            || self.validation_locations() == 0
            || dz.lhs_restarts == 0
        {
            return bad("design counts must be positive".into());
        }
        if dz.validation_replicates < 2 {
            return bad("validation_replicates must be at least 2".into());
        }
        if !(self.grouping_tolerance >= 0.0) {
            return bad("grouping_tolerance must be >= 0".into());
        }
        let dg = &self.diagnostics;
        if dg.n_mc_mean == 0 || dg.n_mc_variance == 0 || dg.n_reference == 0 {
            return bad("Monte Carlo sizes must be positive".into());
        }
        self.emulator
            .fit
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        self.tolerance
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(())
    }
}
