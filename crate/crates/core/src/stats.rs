//! Straight-line least-squares fits over benchmark columns and plot-data
//! emission.

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::bench::BenchSample;
use crate::cipher::MAX_PADDING;
use crate::keystore::ENVELOPE_LEN;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),
    #[error("storage full: {0}")]
    StorageFull(io::Error),
    #[error(transparent)]
    Io(io::Error),
}

impl From<io::Error> for StatsError {
    fn from(e: io::Error) -> Self {
        match e.kind() {
            io::ErrorKind::StorageFull => StatsError::StorageFull(e),
            _ => StatsError::Io(e),
        }
    }
}

/// `y = a·x + b` fitted by ordinary least squares.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegressionFit {
    pub a: f64,
    pub b: f64,
    /// Pearson correlation. Zero when `y` is constant.
    pub r: f64,
    pub r_squared: f64,
    pub n: usize,
}

impl RegressionFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.a * x + self.b
    }
}

/// Two-pass, mean-centred OLS. A constant `y` series yields `a = 0`,
/// `b = y`, `r = r² = 0`.
pub fn linear_fit(points: &[(f64, f64)]) -> Result<RegressionFit, StatsError> {
    let n = points.len();
    if n < 2 {
        return Err(StatsError::DegenerateInput("need at least two points"));
    }
    if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(StatsError::DegenerateInput("non-finite coordinate"));
    }
    let nf = n as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / nf;

    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in points {
        let dx = x - mean_x;
        let dy = y - mean_y;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(StatsError::DegenerateInput("all x values are equal"));
    }

    let a = sxy / sxx;
    let b = mean_y - a * mean_x;
    let (r, r_squared) = if syy == 0.0 {
        (0.0, 0.0)
    } else {
        let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
        (r, r * r)
    };
    Ok(RegressionFit {
        a,
        b,
        r,
        r_squared,
        n,
    })
}

/// A fitted series, or a note that `y` never varies and so has no relation
/// to `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SeriesFit {
    Linear(RegressionFit),
    Constant { value: f64, n: usize },
}

impl SeriesFit {
    pub fn from_points(points: &[(f64, f64)]) -> Result<Self, StatsError> {
        let fit = linear_fit(points)?;
        let first = points[0].1;
        if points.iter().all(|p| p.1 == first) {
            Ok(SeriesFit::Constant {
                value: first,
                n: fit.n,
            })
        } else {
            Ok(SeriesFit::Linear(fit))
        }
    }

    pub fn as_linear(&self) -> Option<&RegressionFit> {
        match self {
            SeriesFit::Linear(f) => Some(f),
            SeriesFit::Constant { .. } => None,
        }
    }

    pub fn predict(&self, x: f64) -> f64 {
        match self {
            SeriesFit::Linear(f) => f.predict(x),
            SeriesFit::Constant { value, .. } => *value,
        }
    }
}

/// Largest possible per-file space cost: a full padding block plus one key
/// envelope.
pub const WORST_CASE_OVERHEAD: u64 = (MAX_PADDING + ENVELOPE_LEN) as u64;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    /// Overhead bytes against 1-based row index.
    pub fit_overhead_vs_index: SeriesFit,
    /// Execution seconds against 1-based row index.
    pub fit_time_vs_index: SeriesFit,
    /// Key file bytes against 1-based row index.
    pub fit_keysize_vs_index: SeriesFit,
    /// Execution seconds against original size in bytes.
    pub fit_time_vs_size: SeriesFit,
    pub total_worst_overhead: u64,
    /// Largest overhead plus largest key size actually observed.
    pub observed_worst_overhead: u64,
}

fn series(samples: &[BenchSample], y: impl Fn(&BenchSample) -> f64) -> Vec<(f64, f64)> {
    samples
        .iter()
        .enumerate()
        .map(|(i, s)| ((i + 1) as f64, y(s)))
        .collect()
}

pub fn analyze(samples: &[BenchSample]) -> Result<AnalysisReport, StatsError> {
    if samples.len() < 2 {
        return Err(StatsError::DegenerateInput("need at least two samples"));
    }
    let by_size: Vec<(f64, f64)> = samples
        .iter()
        .map(|s| (s.original_size as f64, s.exec_time))
        .collect();
    let fit_time_vs_size = match SeriesFit::from_points(&by_size) {
        Ok(f) => f,
        // Repeated sizes are legal input; the raw-size fit is secondary.
        Err(StatsError::DegenerateInput(_)) => SeriesFit::Constant {
            value: f64::NAN,
            n: samples.len(),
        },
        Err(e) => return Err(e),
    };
    let max_overhead = samples.iter().map(|s| s.overhead).max().unwrap_or(0);
    let max_key = samples.iter().map(|s| s.key_size).max().unwrap_or(0);
    Ok(AnalysisReport {
        fit_overhead_vs_index: SeriesFit::from_points(&series(samples, |s| s.overhead as f64))?,
        fit_time_vs_index: SeriesFit::from_points(&series(samples, |s| s.exec_time))?,
        fit_keysize_vs_index: SeriesFit::from_points(&series(samples, |s| s.key_size as f64))?,
        fit_time_vs_size,
        total_worst_overhead: WORST_CASE_OVERHEAD,
        observed_worst_overhead: max_overhead + max_key,
    })
}

fn describe(fit: &SeriesFit) -> String {
    match fit {
        SeriesFit::Linear(f) => format!(
            "y = {:.6}x + {:.6}, r = {:.4}, r^2 = {:.4}, n = {}",
            f.a, f.b, f.r, f.r_squared, f.n
        ),
        SeriesFit::Constant { value, n } => format!("constant y = {value}, n = {n}"),
    }
}

/// Human-readable summary of a report.
pub fn render_report(report: &AnalysisReport) -> String {
    let mut out = String::new();
    let rows = [
        ("overhead_vs_index", &report.fit_overhead_vs_index),
        ("time_vs_index", &report.fit_time_vs_index),
        ("keysize_vs_index", &report.fit_keysize_vs_index),
        ("time_vs_size", &report.fit_time_vs_size),
    ];
    for (name, fit) in rows {
        let _ = writeln!(out, "{name:<18} {}", describe(fit));
    }
    let _ = writeln!(
        out,
        "total_worst_overhead {} bytes ({} padding + {} key)",
        report.total_worst_overhead, MAX_PADDING, ENVELOPE_LEN
    );
    let _ = writeln!(
        out,
        "observed_worst_overhead {} bytes",
        report.observed_worst_overhead
    );
    out
}

fn push_points(out: &mut String, points: &[(f64, f64)]) {
    for (x, y) in points {
        let _ = writeln!(out, "{x} {y}");
    }
}

fn fitted(points: &[(f64, f64)], fit: &SeriesFit) -> Vec<(f64, f64)> {
    points.iter().map(|&(x, _)| (x, fit.predict(x))).collect()
}

pub const PLOT_FILES: [&str; 4] = ["fig4_1.dat", "fig4_2.dat", "fig4_3.dat", "fig4_4.dat"];

/// Renders the four plot-data files in memory, in [`PLOT_FILES`] order.
pub fn render_plot_data(report: &AnalysisReport, samples: &[BenchSample]) -> [String; 4] {
    let overhead = series(samples, |s| s.overhead as f64);
    let time_idx = series(samples, |s| s.exec_time);
    let keysize = series(samples, |s| s.key_size as f64);
    let time_size: Vec<(f64, f64)> = samples
        .iter()
        .map(|s| (s.original_size as f64, s.exec_time))
        .collect();

    let mut f1 = String::from("# encryption overhead vs row index\n# x=row_index y=overhead_bytes\n");
    push_points(&mut f1, &overhead);

    let mut f2 = String::from(
        "# execution time vs original size\n# x=original_size_bytes y=exec_time_seconds\n",
    );
    let _ = writeln!(f2, "# fit {}", describe(&report.fit_time_vs_size));
    push_points(&mut f2, &time_size);

    let mut f3 = String::from("# key size vs row index\n# x=row_index y=key_size_bytes\n");
    push_points(&mut f3, &keysize);

    let mut f4 = String::from("# fitted relations, one block per series\n");
    let blocks = [
        ("overhead_bytes", &overhead, &report.fit_overhead_vs_index),
        ("exec_time_seconds", &time_idx, &report.fit_time_vs_index),
        ("key_size_bytes", &keysize, &report.fit_keysize_vs_index),
    ];
    for (name, points, fit) in blocks {
        let _ = writeln!(f4, "\n# series {name} x=row_index");
        push_points(&mut f4, points);
        let _ = writeln!(f4, "\n# fitted {name} {}", describe(fit));
        push_points(&mut f4, &fitted(points, fit));
    }
    [f1, f2, f3, f4]
}

/// Writes the four plot-data files into `outdir`. On failure no plot files
/// are left behind.
pub fn emit_plot_data(
    report: &AnalysisReport,
    samples: &[BenchSample],
    outdir: &Path,
) -> Result<Vec<PathBuf>, StatsError> {
    let contents = render_plot_data(report, samples);
    let mut written = Vec::with_capacity(PLOT_FILES.len());
    for (name, body) in PLOT_FILES.iter().zip(contents.iter()) {
        let path = outdir.join(name);
        if let Err(e) = std::fs::write(&path, body) {
            for p in &written {
                let _ = std::fs::remove_file(p);
            }
            return Err(e.into());
        }
        written.push(path);
    }
    Ok(written)
}
