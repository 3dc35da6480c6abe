//! Basis-size sweeps: one training run, nested bases truncated per size,
//! one candidate run per size, CSV emission, and the log-log convergence
//! slope over a size window.

use anyhow::{bail, Result};

use crate::context::{
    compute_bases_with, run_candidate, train, ErrorReport, Prepared, SideBases, TrainingRun,
};
use crate::metrics::{compute_errors, least_squares_slope};
use ivr_core::rom::TruncationPolicy;

/// One sweep point.
#[derive(Clone, Debug)]
pub struct SweepRow {
    pub report: ErrorReport,
    /// Mean mode count over the reduced sides (0 for full-order rows).
    pub avg_n_r: f64,
}

pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Least-squares slope of log eps vs log avg_N_R over the window,
    /// when at least two points fall inside it.
    pub slope: Option<f64>,
    pub window: (f64, f64),
}

fn avg_n_r(report: &ErrorReport) -> f64 {
    let sides: Vec<f64> = [report.n_r_left, report.n_r_right]
        .iter()
        .flatten()
        .map(|&n| n as f64)
        .collect();
    if sides.is_empty() {
        0.0
    } else {
        sides.iter().sum::<f64>() / sides.len() as f64
    }
}

/// Run the configured coupling once per basis size. Training and the master
/// SVD happen once; each size reuses the leading modes (POD bases nest).
/// Full-order couplings have no basis axis and produce a single row.
pub fn sweep_basis(prep: &Prepared, sizes: &[usize], window: (f64, f64)) -> Result<SweepResult> {
    if sizes.is_empty() {
        bail!("sweep needs at least one basis size");
    }
    if !(window.0 > 0.0 && window.1 >= window.0) {
        bail!("slope window must satisfy 0 < lo <= hi, got {window:?}");
    }
    let training = train(prep)?;
    let rows = if prep.config.coupling.needs_bases() {
        let max = *sizes.iter().max().unwrap();
        let master = master_bases(prep, &training, max)?;
        let mut rows = Vec::with_capacity(sizes.len());
        for &n in sizes {
            let bases = SideBases {
                left: master.left.as_ref().map(|b| b.truncated(n)),
                right: master.right.as_ref().map(|b| b.truncated(n)),
                global: master.global.as_ref().map(|b| b.truncated(n)),
                svd_seconds: master.svd_seconds,
            };
            rows.push(make_row(prep, &training, &bases)?);
        }
        rows
    } else {
        vec![make_row(prep, &training, &SideBases::none())?]
    };
    let points: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| {
            r.avg_n_r >= window.0
                && r.avg_n_r <= window.1
                && r.report.eps.is_finite()
                && r.report.eps > 0.0
        })
        .map(|r| (r.avg_n_r.ln(), r.report.eps.ln()))
        .collect();
    Ok(SweepResult {
        rows,
        slope: least_squares_slope(&points),
        window,
    })
}

/// Bases at the largest requested size, computed once.
fn master_bases(prep: &Prepared, training: &TrainingRun, max: usize) -> Result<SideBases> {
    compute_bases_with(
        prep,
        training,
        TruncationPolicy::FixedSize(max),
        TruncationPolicy::FixedSize(max),
    )
}

fn make_row(prep: &Prepared, training: &TrainingRun, bases: &SideBases) -> Result<SweepRow> {
    let solution = run_candidate(prep, bases)?;
    let (eps, eps0) = compute_errors(
        &solution.final_global,
        &training.final_global,
        &training.initial_global,
    );
    let report = ErrorReport {
        variant: prep.config.variant,
        coupling: prep.config.coupling,
        nx: prep.config.nx,
        ny: prep.config.ny,
        eps,
        eps0: match prep.config.variant {
            crate::config::Variant::PureAdvection => Some(eps0),
            crate::config::Variant::HighPeclet => None,
        },
        n_r_left: solution.n_r_left,
        n_r_right: solution.n_r_right,
        online_cpu_seconds: solution.online_seconds,
        offline_cpu_seconds: solution.offline_seconds,
    };
    let avg = avg_n_r(&report);
    Ok(SweepRow {
        report,
        avg_n_r: avg,
    })
}

pub const CSV_HEADER: &str =
    "coupling,n_r_left,n_r_right,avg_n_r,eps,eps0,online_cpu_seconds,offline_cpu_seconds";

/// Render one row with full round-trip float precision (17 significant
/// digits). The eps0 cell is empty when the regime defines no return error.
pub fn csv_row(row: &SweepRow) -> String {
    let r = &row.report;
    format!(
        "{},{},{},{:.16e},{:.16e},{},{:.16e},{:.16e}",
        r.coupling,
        r.n_r_left.unwrap_or(0),
        r.n_r_right.unwrap_or(0),
        row.avg_n_r,
        r.eps,
        r.eps0.map_or(String::new(), |e| format!("{e:.16e}")),
        r.online_cpu_seconds,
        r.offline_cpu_seconds,
    )
}

pub fn to_csv(result: &SweepResult) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in &result.rows {
        out.push_str(&csv_row(row));
        out.push('\n');
    }
    out
}
