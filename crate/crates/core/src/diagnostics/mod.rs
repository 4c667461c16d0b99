//! Validation diagnostics for stochastic emulators.

mod deterministic;
mod tolerance;
mod unexpectedness;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use deterministic::{
    credible_interval_coverage, pivoted_cholesky_errors, qq_points, standardized_errors,
    CoveragePoint, PivotedErrors,
};
pub use tolerance::{ToleranceShape, ToleranceSpec};
pub use unexpectedness::{
    kurtosis_unexpectedness, kurtosis_unexpectedness_with, mean_unexpectedness,
    normal_unexpectedness, skewness_unexpectedness, skewness_unexpectedness_with, unexpectedness,
    variance_unexpectedness, DiagnosticKind, ReferenceOptions, UnexpectednessResult, FLAG_LEVEL,
    STRONG_FLAG_LEVEL,
};

use crate::data::ReplicatedDataset;
use crate::distributions::{sample_moments_with, SampleMoments, SdConvention};
use crate::emulator::{FittedEmulator, PointPrediction};
use crate::error::{domain, Error, Result};
use crate::rng::RngStream;

/// Out-of-sample runs grouped by distinct location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicatedValidationSet {
    pub locations: DMatrix<f64>,
    pub replicates: Vec<Vec<f64>>,
    pub moments: Vec<SampleMoments>,
}

impl ReplicatedValidationSet {
    pub fn new(
        locations: DMatrix<f64>,
        replicates: Vec<Vec<f64>>,
        convention: SdConvention,
    ) -> Result<Self> {
        if locations.nrows() != replicates.len() {
            return domain(format!(
                "{} locations but {} replicate sets",
                locations.nrows(),
                replicates.len()
            ));
        }
        if replicates.is_empty() {
            return domain("validation set is empty");
        }
        for i in 0..locations.nrows() {
            for j in 0..i {
                if locations.row(i) == locations.row(j) {
                    return domain(format!("validation locations {j} and {i} coincide"));
                }
            }
        }
        let moments = replicates
            .iter()
            .map(|r| sample_moments_with(r, convention))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            locations,
            replicates,
            moments,
        })
    }

    pub fn from_dataset(data: &ReplicatedDataset, convention: SdConvention) -> Result<Self> {
        Self::new(data.locations.clone(), data.replicates.clone(), convention)
    }

    pub fn n_locations(&self) -> usize {
        self.replicates.len()
    }

    pub fn replicate_counts(&self) -> Vec<usize> {
        self.replicates.iter().map(Vec::len).collect()
    }
}

/// Monte Carlo sizes and switches for [`run_all`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiagnosticConfig {
    pub n_mc_mean: usize,
    pub n_mc_variance: usize,
    pub n_reference: usize,
    pub reference: ReferenceOptions,
    pub coverage_levels: Vec<f64>,
    /// Above this many runs the pivoted Cholesky errors use only the first
    /// replicate at each location.
    pub max_pivoted_runs: usize,
}

impl Default for DiagnosticConfig {
    fn default() -> Self {
        Self {
            n_mc_mean: 10_000,
            n_mc_variance: 10_000,
            n_reference: 10_000,
            reference: ReferenceOptions::default(),
            coverage_levels: (1..20).map(|i| i as f64 / 20.0).collect(),
            max_pivoted_runs: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlagCounts {
    pub kind: DiagnosticKind,
    pub tolerance_applied: bool,
    pub n: usize,
    pub flagged_095: usize,
    pub flagged_0995: usize,
    pub negative: usize,
}

impl FlagCounts {
    pub fn tally(
        kind: DiagnosticKind,
        tolerance_applied: bool,
        results: &[UnexpectednessResult],
    ) -> Self {
        Self {
            kind,
            tolerance_applied,
            n: results.len(),
            flagged_095: results.iter().filter(|r| r.flag095).count(),
            flagged_0995: results.iter().filter(|r| r.flag0995).count(),
            negative: results.iter().filter(|r| r.u < 0.0).count(),
        }
    }
}

/// A diagnostic that could not be computed at one location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Issue {
    pub location: usize,
    pub kind: DiagnosticKind,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingsEcho {
    pub seed: u64,
    pub stream: u64,
    pub tolerance: ToleranceSpec,
    pub config: DiagnosticConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticReport {
    pub format: String,
    pub version: u32,
    pub locations: Vec<Vec<f64>>,
    pub replicate_counts: Vec<usize>,
    pub predictions: Vec<PointPrediction>,
    pub mean: Vec<UnexpectednessResult>,
    /// With the sd tolerance (identical to `variance_uncorrected` when none is set).
    pub variance: Vec<UnexpectednessResult>,
    pub variance_uncorrected: Vec<UnexpectednessResult>,
    pub skewness: Vec<UnexpectednessResult>,
    pub kurtosis: Vec<UnexpectednessResult>,
    /// Over every validation run, location by location.
    pub standardized_errors: Vec<f64>,
    pub pivoted: PivotedErrors,
    /// Whether the pivoted errors use every run or only first replicates.
    pub pivoted_all_runs: bool,
    pub qq: Vec<(f64, f64)>,
    pub coverage: Vec<CoveragePoint>,
    pub counts: Vec<FlagCounts>,
    pub issues: Vec<Issue>,
    pub settings: SettingsEcho,
}

pub const REPORT_FORMAT: &str = "stochdiag-report";
pub const REPORT_VERSION: u32 = 1;

impl DiagnosticReport {
    /// Flag counts recomputed from the per-location lists.
    pub fn recount(&self) -> Vec<FlagCounts> {
        let tol_sd = self.settings.tolerance.sd.is_some();
        let mut out = vec![
            FlagCounts::tally(DiagnosticKind::Mean, false, &self.mean),
            FlagCounts::tally(DiagnosticKind::Variance, tol_sd, &self.variance),
        ];
        if tol_sd {
            out.push(FlagCounts::tally(
                DiagnosticKind::Variance,
                false,
                &self.variance_uncorrected,
            ));
        }
        out.push(FlagCounts::tally(
            DiagnosticKind::Skewness,
            self.settings.tolerance.skewness.is_some_and(|w| w > 0.0),
            &self.skewness,
        ));
        out.push(FlagCounts::tally(
            DiagnosticKind::Kurtosis,
            self.settings.tolerance.kurtosis.is_some_and(|w| w > 0.0),
            &self.kurtosis,
        ));
        out
    }

    pub fn results(&self, kind: DiagnosticKind) -> &[UnexpectednessResult] {
        match kind {
            DiagnosticKind::Mean => &self.mean,
            DiagnosticKind::Variance => &self.variance,
            DiagnosticKind::Skewness => &self.skewness,
            DiagnosticKind::Kurtosis => &self.kurtosis,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(text)?;
        if r.format != REPORT_FORMAT {
            return Err(Error::Model(format!(
                "unknown report format {:?}",
                r.format
            )));
        }
        if r.version != REPORT_VERSION {
            return Err(Error::Model(format!(
                "report version {} is not supported (expected {REPORT_VERSION})",
                r.version
            )));
        }
        Ok(r)
    }
}

struct LocationOutcome {
    mean: Option<UnexpectednessResult>,
    variance: Option<UnexpectednessResult>,
    variance_uncorrected: Option<UnexpectednessResult>,
    skewness: Option<UnexpectednessResult>,
    kurtosis: Option<UnexpectednessResult>,
    issues: Vec<Issue>,
}

fn per_location(
    i: usize,
    pred: &PointPrediction,
    stats: &SampleMoments,
    reps: &[f64],
    tol: &ToleranceSpec,
    config: &DiagnosticConfig,
    rng: &RngStream,
) -> LocationOutcome {
    let mut issues = Vec::new();
    let stream =
        |kind: DiagnosticKind, extra: u64| rng.substream_keyed(&[i as u64, kind.code(), extra]);
    let mut keep = |kind: DiagnosticKind, r: Result<UnexpectednessResult>| match r {
        Ok(v) => Some(v.at(i)),
        Err(e) => {
            issues.push(Issue {
                location: i,
                kind,
                message: e.to_string(),
            });
            None
        }
    };
    let mean = keep(
        DiagnosticKind::Mean,
        mean_unexpectedness(
            pred,
            stats,
            config.n_mc_mean,
            &mut stream(DiagnosticKind::Mean, 0),
        ),
    );
    let variance = keep(
        DiagnosticKind::Variance,
        variance_unexpectedness(
            pred,
            stats,
            tol,
            config.n_mc_variance,
            &mut stream(DiagnosticKind::Variance, 0),
        ),
    );
    let variance_uncorrected = if tol.sd.is_some() {
        variance_unexpectedness(
            pred,
            stats,
            &ToleranceSpec::none(),
            0,
            &mut stream(DiagnosticKind::Variance, 1),
        )
        .ok()
        .map(|v| v.at(i))
    } else {
        variance
    };
    let skewness = if reps.len() >= 3 {
        keep(
            DiagnosticKind::Skewness,
            skewness_unexpectedness_with(
                pred,
                reps,
                tol,
                config.n_reference,
                &config.reference,
                &mut stream(DiagnosticKind::Skewness, 0),
            ),
        )
    } else {
        None
    };
    let kurtosis = if reps.len() >= 4 {
        keep(
            DiagnosticKind::Kurtosis,
            kurtosis_unexpectedness_with(
                pred,
                reps,
                tol,
                config.n_reference,
                &config.reference,
                &mut stream(DiagnosticKind::Kurtosis, 0),
            ),
        )
    } else {
        None
    };
    LocationOutcome {
        mean,
        variance,
        variance_uncorrected,
        skewness,
        kurtosis,
        issues,
    }
}

/// Every applicable diagnostic for `model` on `validation`.
///
/// Location `i` draws from the substream keyed by `(i, diagnostic)`, so the
/// report does not depend on the thread count. Per-location failures are
/// recorded as issues; the call fails only if no location yields anything.
pub fn run_all(
    model: &FittedEmulator,
    validation: &ReplicatedValidationSet,
    tol: &ToleranceSpec,
    config: &DiagnosticConfig,
    rng: &RngStream,
) -> Result<DiagnosticReport> {
    tol.validate()?;
    let preds = model.predict(&validation.locations)?;
    let n = validation.n_locations();

    let outcomes: Vec<LocationOutcome> = (0..n)
        .into_par_iter()
        .map(|i| {
            per_location(
                i,
                &preds[i],
                &validation.moments[i],
                &validation.replicates[i],
                tol,
                config,
                rng,
            )
        })
        .collect();

    let mut report_issues = Vec::new();
    let (mut mean, mut variance, mut variance_uncorrected, mut skewness, mut kurtosis) =
        (vec![], vec![], vec![], vec![], vec![]);
    for o in outcomes {
        mean.extend(o.mean);
        variance.extend(o.variance);
        variance_uncorrected.extend(o.variance_uncorrected);
        skewness.extend(o.skewness);
        kurtosis.extend(o.kurtosis);
        report_issues.extend(o.issues);
    }
    if mean.is_empty() && variance.is_empty() {
        let first = report_issues
            .first()
            .map(|i| i.message.clone())
            .unwrap_or_default();
        return domain(format!("no validation location could be assessed: {first}"));
    }

    // single-run diagnostics over every run
    let mut run_preds = Vec::new();
    let mut run_y = Vec::new();
    let mut run_rows = Vec::new();
    let mut first_rows = Vec::new();
    for (i, reps) in validation.replicates.iter().enumerate() {
        first_rows.push(run_y.len());
        for &v in reps {
            run_preds.push(preds[i]);
            run_y.push(v);
            run_rows.push(i);
        }
    }
    let std_errors = standardized_errors(&run_preds, &run_y)?;
    let qq = qq_points(&std_errors)?;
    let coverage = credible_interval_coverage(&run_preds, &run_y, &config.coverage_levels)?;

    let all_runs = run_y.len() <= config.max_pivoted_runs;
    let used: Vec<usize> = if all_runs {
        (0..run_y.len()).collect()
    } else {
        first_rows
    };
    let d = validation.locations.ncols();
    let x_used = DMatrix::from_fn(used.len(), d, |a, k| {
        validation.locations[(run_rows[used[a]], k)]
    });
    let joint = model.joint_predict(&x_used)?;
    let sig = model.intrinsic_variance(&x_used)?;
    let mut cov = joint.covariance;
    for (a, s) in sig.iter().enumerate() {
        cov[(a, a)] += s;
    }
    let y_used: Vec<f64> = used.iter().map(|&a| run_y[a]).collect();
    let pivoted = pivoted_cholesky_errors(&joint.mean, &cov, &y_used)?;

    let mut report = DiagnosticReport {
        format: REPORT_FORMAT.to_string(),
        version: REPORT_VERSION,
        locations: (0..n)
            .map(|i| validation.locations.row(i).iter().copied().collect())
            .collect(),
        replicate_counts: validation.replicate_counts(),
        predictions: preds,
        mean,
        variance,
        variance_uncorrected,
        skewness,
        kurtosis,
        standardized_errors: std_errors,
        pivoted,
        pivoted_all_runs: all_runs,
        qq,
        coverage,
        counts: Vec::new(),
        issues: report_issues,
        settings: SettingsEcho {
            seed: rng.seed(),
            stream: rng.stream_id(),
            tolerance: *tol,
            config: config.clone(),
        },
    };
    report.counts = report.recount();
    Ok(report)
}
