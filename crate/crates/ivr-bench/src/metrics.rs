//! Error metrics on the global grid, plus the log-log regression used by
//! convergence sweeps.

use anyhow::{bail, Result};
use ivr_core::mesh::{restriction_map, SubdomainMesh};
use nalgebra::DVector;

/// Merge a coupled pair of full nodal vectors onto the global grid. The
/// interface column is duplicated between the sides; the merged vector takes
/// it from the left subdomain (the two traces agree to solver tolerance).
pub fn globalize(
    global: &SubdomainMesh,
    left: &SubdomainMesh,
    right: &SubdomainMesh,
    left_values: &DVector<f64>,
    right_values: &DVector<f64>,
) -> Result<DVector<f64>> {
    if left_values.len() != left.coords.len() || right_values.len() != right.coords.len() {
        bail!(
            "nodal vector lengths ({}, {}) do not match the meshes ({}, {})",
            left_values.len(),
            right_values.len(),
            left.coords.len(),
            right.coords.len()
        );
    }
    let map_l = restriction_map(global, left)?;
    let map_r = restriction_map(global, right)?;
    let mut out = DVector::from_element(global.coords.len(), f64::NAN);
    for (i, &g) in map_r.iter().enumerate() {
        out[g] = right_values[i];
    }
    for (i, &g) in map_l.iter().enumerate() {
        out[g] = left_values[i];
    }
    if out.iter().any(|v| v.is_nan()) {
        bail!("subdomains do not cover the global grid");
    }
    Ok(out)
}

/// Relative final-state errors:
/// eps  = |candidate - reference| / |reference|   (against the full-order
///        global solution),
/// eps0 = |initial - candidate| / |candidate|     (how far the final state
///        drifted from the initial condition; meaningful when the exact
///        solution returns to it).
pub fn compute_errors(
    candidate: &DVector<f64>,
    reference: &DVector<f64>,
    initial: &DVector<f64>,
) -> (f64, f64) {
    let eps = (candidate - reference).norm() / reference.norm();
    let eps0 = (initial - candidate).norm() / candidate.norm();
    (eps, eps0)
}

/// Least-squares slope of y against x. Returns `None` for fewer than two
/// distinct abscissae.
pub fn least_squares_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let xbar = points.iter().map(|p| p.0).sum::<f64>() / n;
    let ybar = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - xbar).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - xbar) * (p.1 - ybar)).sum();
    Some(sxy / sxx)
}
