//! Text summary and SVG figures for a diagnostic report.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use stochdiag_core::diagnostics::{DiagnosticKind, DiagnosticReport, UnexpectednessResult};

use crate::error::CliResult;
use crate::io::write_file;
use crate::svg::{
    coverage_figure, errors_figure, format_value, qq_figure, unexpectedness_figure, Figure,
};

fn kind_title(kind: DiagnosticKind) -> &'static str {
    match kind {
        DiagnosticKind::Mean => "Sample mean",
        DiagnosticKind::Variance => "Sample variance",
        DiagnosticKind::Skewness => "Sample skewness",
        DiagnosticKind::Kurtosis => "Sample excess kurtosis",
    }
}

fn u_points(
    report: &DiagnosticReport,
    results: &[UnexpectednessResult],
    k: usize,
) -> Vec<(f64, f64)> {
    results
        .iter()
        .map(|r| (report.locations[r.location][k], r.u))
        .collect()
}

fn dim(report: &DiagnosticReport) -> usize {
    report.locations.first().map_or(1, Vec::len)
}

/// Figures keyed by file name, in a fixed order.
pub fn figures(report: &DiagnosticReport) -> Vec<(String, Figure)> {
    let d = dim(report);
    let mut out = Vec::new();
    for k in 0..d {
        let xl = format!("x{}", k + 1);
        for kind in DiagnosticKind::ALL {
            let title = format!("{} unexpectedness against {xl}", kind_title(kind));
            out.push((
                format!("u_{}_{xl}.svg", kind.name()),
                unexpectedness_figure(&title, &xl, &u_points(report, report.results(kind), k)),
            ));
        }
        if !report.variance_uncorrected.is_empty() {
            let title = format!("Sample variance unexpectedness against {xl}, no tolerance");
            out.push((
                format!("u_variance_uncorrected_{xl}.svg"),
                unexpectedness_figure(
                    &title,
                    &xl,
                    &u_points(report, &report.variance_uncorrected, k),
                ),
            ));
        }
        let mut pts = Vec::with_capacity(report.standardized_errors.len());
        let mut e = report.standardized_errors.iter();
        for (i, &r) in report.replicate_counts.iter().enumerate() {
            for v in e.by_ref().take(r) {
                pts.push((report.locations[i][k], *v));
            }
        }
        out.push((
            format!("standardized_errors_{xl}.svg"),
            errors_figure(
                &format!("Individual standardized errors against {xl}"),
                &xl,
                &pts,
            ),
        ));
    }
    let piv: Vec<(f64, f64)> = report
        .pivoted
        .errors
        .iter()
        .enumerate()
        .map(|(i, &e)| ((i + 1) as f64, e))
        .collect();
    let mut f = errors_figure(
        "Pivoted Cholesky errors against pivoting order",
        "pivot index",
        &piv,
    );
    f.y_label = "pivoted error".into();
    out.push(("pivoted_errors.svg".into(), f));
    out.push((
        "qq_standardized_errors.svg".into(),
        qq_figure("QQ plot of standardized errors", &report.qq),
    ));
    let cov: Vec<(f64, f64)> = report
        .coverage
        .iter()
        .map(|c| (c.level, c.coverage))
        .collect();
    out.push((
        "credible_interval_coverage.svg".into(),
        coverage_figure("Credible interval diagnostic", &cov),
    ));
    out
}

pub fn write_figures(report: &DiagnosticReport, dir: &Path) -> CliResult<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for (name, fig) in figures(report) {
        let p = dir.join(name);
        write_file(&p, &fig.render())?;
        paths.push(p);
    }
    Ok(paths)
}

fn fmt_loc(loc: &[f64]) -> String {
    let parts: Vec<String> = loc.iter().map(|v| format!("{v:.4}")).collect();
    format!("({})", parts.join(", "))
}

/// Plain-text summary: counts per diagnostic, then every flagged value.
pub fn summary(report: &DiagnosticReport) -> String {
    let mut s = String::new();
    let runs: usize = report.replicate_counts.iter().sum();
    let _ = writeln!(
        s,
        "{} report v{}: {} validation locations, {} runs",
        report.format,
        report.version,
        report.locations.len(),
        runs
    );
    let _ = writeln!(
        s,
        "seed {}, stream {}",
        report.settings.seed, report.settings.stream
    );
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "{:<10} {:<10} {:>4} {:>9} {:>10} {:>9}",
        "diagnostic", "tolerance", "n", "|U|>0.95", "|U|>0.995", "U<0"
    );
    for c in &report.counts {
        let _ = writeln!(
            s,
            "{:<10} {:<10} {:>4} {:>9} {:>10} {:>9}",
            c.kind.name(),
            if c.tolerance_applied { "yes" } else { "no" },
            c.n,
            c.flagged_095,
            c.flagged_0995,
            c.negative
        );
    }
    let flagged: Vec<(&str, &UnexpectednessResult)> = DiagnosticKind::ALL
        .iter()
        .flat_map(|&k| report.results(k).iter().map(move |r| (k.name(), r)))
        .chain(
            report
                .variance_uncorrected
                .iter()
                .map(|r| ("variance (no tolerance)", r)),
        )
        .filter(|(_, r)| r.flag095)
        .collect();
    let _ = writeln!(s);
    if flagged.is_empty() {
        let _ = writeln!(s, "no unexpectedness value exceeds 0.95 in absolute value");
    } else {
        let _ = writeln!(s, "flagged values:");
        for (name, r) in flagged {
            let _ = writeln!(
                s,
                "  {name} at location {} {}: U = {}, observed {:.6}{}",
                r.location,
                fmt_loc(&report.locations[r.location]),
                format_value(r.u),
                r.observed,
                if r.flag0995 { " (beyond 0.995)" } else { "" }
            );
        }
    }
    let e = &report.standardized_errors;
    let big = e.iter().filter(|v| v.abs() > 2.0).count();
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "standardized errors: {} of {} exceed 2 in absolute value",
        big,
        e.len()
    );
    let pbig = report
        .pivoted
        .errors
        .iter()
        .filter(|v| v.abs() > 2.0)
        .count();
    let _ = writeln!(
        s,
        "pivoted Cholesky errors ({}): {} of {} exceed 2 in absolute value",
        if report.pivoted_all_runs {
            "all runs"
        } else {
            "first replicate per location"
        },
        pbig,
        report.pivoted.errors.len()
    );
    for c in &report.coverage {
        if (c.level - 0.5).abs() < 1e-9 || (c.level - 0.95).abs() < 1e-9 {
            let _ = writeln!(s, "coverage at level {:.2}: {:.3}", c.level, c.coverage);
        }
    }
    if !report.issues.is_empty() {
        let _ = writeln!(s);
        let _ = writeln!(s, "issues:");
        for i in &report.issues {
            let _ = writeln!(
                s,
                "  {} at location {}: {}",
                i.kind.name(),
                i.location,
                i.message
            );
        }
    }
    s
}
