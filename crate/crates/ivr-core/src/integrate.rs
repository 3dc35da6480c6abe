//! Explicit time integrators and step scheduling.
//!
//! The coupled schemes advance two state vectors whose derivatives come from
//! one shared flux-recovery evaluation; [`step_pair`] is the single stepping
//! kernel used by every solver path (full/full, full/reduced,
//! reduced/reduced, and single-domain via an empty partner), so trajectories
//! that share a right-hand side are reproduced operation for operation.

use nalgebra::DVector;

use crate::error::{IvrError, Result};

/// Explicit one-step methods. Each stage re-solves the interface flux, so
/// the constraint on the derivatives holds at every stage.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IntegratorKind {
    ForwardEuler,
    Rk4,
}

#[derive(Clone, Copy, Debug)]
pub struct TimeIntegrator {
    pub kind: IntegratorKind,
    pub dt: f64,
}

impl TimeIntegrator {
    pub fn new(kind: IntegratorKind, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(IvrError::InvalidArgument(format!(
                "time step must be finite and positive, got {dt}"
            )));
        }
        Ok(Self { kind, dt })
    }

    /// Same method with a different step size (used for remainder steps).
    pub fn with_dt(&self, dt: f64) -> Result<Self> {
        Self::new(self.kind, dt)
    }
}

/// Split a horizon into `n` full steps of size `dt` plus an optional final
/// remainder step, so integration lands on `t_final` exactly. A ratio within
/// 1e-9 (relative) of an integer is treated as exact; otherwise the short
/// final step is returned separately.
pub fn step_schedule(t_final: f64, dt: f64) -> Result<(usize, Option<f64>)> {
    if !(t_final > 0.0) || !t_final.is_finite() {
        return Err(IvrError::InvalidArgument(format!(
            "horizon must be finite and positive, got {t_final}"
        )));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(IvrError::InvalidArgument(format!(
            "time step must be finite and positive, got {dt}"
        )));
    }
    let ratio = t_final / dt;
    let nearest = ratio.round();
    if nearest >= 1.0 && (ratio - nearest).abs() <= 1e-9 * ratio.max(1.0) {
        return Ok((nearest as usize, None));
    }
    let n = ratio.floor() as usize;
    Ok((n, Some(t_final - n as f64 * dt)))
}

/// Advance a pair of state vectors by one explicit step. `rhs(t, a, b)`
/// returns the derivative pair; for Runge-Kutta it is re-evaluated per
/// stage.
pub(crate) fn step_pair<F>(
    kind: IntegratorKind,
    dt: f64,
    t: f64,
    phi1: &DVector<f64>,
    phi2: &DVector<f64>,
    rhs: &mut F,
) -> Result<(DVector<f64>, DVector<f64>)>
where
    F: FnMut(f64, &DVector<f64>, &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)>,
{
    match kind {
        IntegratorKind::ForwardEuler => {
            let (k1, l1) = rhs(t, phi1, phi2)?;
            Ok((phi1 + dt * k1, phi2 + dt * l1))
        }
        IntegratorKind::Rk4 => {
            let half = 0.5 * dt;
            let (k1, l1) = rhs(t, phi1, phi2)?;
            let (k2, l2) = rhs(t + half, &(phi1 + half * &k1), &(phi2 + half * &l1))?;
            let (k3, l3) = rhs(t + half, &(phi1 + half * &k2), &(phi2 + half * &l2))?;
            let (k4, l4) = rhs(t + dt, &(phi1 + dt * &k3), &(phi2 + dt * &l3))?;
            let w = dt / 6.0;
            Ok((
                phi1 + w * (k1 + 2.0 * k2 + 2.0 * k3 + k4),
                phi2 + w * (l1 + 2.0 * l2 + 2.0 * l3 + l4),
            ))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    #[test]
    fn rejects_nonpositive_or_nonfinite_steps() {
        assert!(TimeIntegrator::new(IntegratorKind::Rk4, 0.0).is_err());
        assert!(TimeIntegrator::new(IntegratorKind::Rk4, -1e-3).is_err());
        assert!(TimeIntegrator::new(IntegratorKind::Rk4, f64::NAN).is_err());
        assert!(step_schedule(1.0, 0.0).is_err());
        assert!(step_schedule(-1.0, 0.1).is_err());
    }

    #[test]
    fn schedule_clips_short_final_step() {
        // One full rotation at dt = 3.37e-3 does not divide evenly: 1864
        // full steps plus one clipped step to land on the horizon.
        let (n, rem) = step_schedule(TAU, 3.37e-3).unwrap();
        assert_eq!(n, 1864);
        let rem = rem.unwrap();
        assert!(rem > 0.0 && rem < 3.37e-3);
        assert!((n as f64 * 3.37e-3 + rem - TAU).abs() < 1e-12);
    }

    #[test]
    fn schedule_detects_exact_divisions() {
        assert_eq!(step_schedule(1.0, 0.25).unwrap(), (4, None));
        // Near-exact ratios (accumulated rounding) count as exact.
        let dt = 0.00337;
        let t = 300.0 * dt;
        assert_eq!(step_schedule(t, dt).unwrap(), (300, None));
        assert_eq!(step_schedule(1.0, 1.0 / 3.0).unwrap(), (3, None));
    }

    #[test]
    fn schedule_handles_horizon_shorter_than_step() {
        let (n, rem) = step_schedule(0.1, 0.25).unwrap();
        assert_eq!(n, 0);
        assert!((rem.unwrap() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn forward_euler_is_exact_for_constant_derivatives() {
        let p = DVector::from_element(2, 1.0);
        let q = DVector::from_element(2, -1.0);
        let mut rhs = |_t: f64, _a: &DVector<f64>, _b: &DVector<f64>| {
            Ok((
                DVector::from_element(2, 3.0),
                DVector::from_element(2, -2.0),
            ))
        };
        let (a, b) = step_pair(IntegratorKind::ForwardEuler, 0.5, 0.0, &p, &q, &mut rhs).unwrap();
        assert_eq!(a, DVector::from_element(2, 2.5));
        assert_eq!(b, DVector::from_element(2, -2.0));
    }

    fn decay_error(kind: IntegratorKind, dt: f64) -> f64 {
        // y' = -y on both components, exact solution e^{-t}.
        let mut a = DVector::from_element(1, 1.0);
        let mut b = DVector::from_element(1, 1.0);
        let n = (1.0 / dt).round() as usize;
        let mut rhs =
            |_t: f64, x: &DVector<f64>, y: &DVector<f64>| Ok((-x.clone(), -y.clone()));
        for k in 0..n {
            let (na, nb) = step_pair(kind, dt, k as f64 * dt, &a, &b, &mut rhs).unwrap();
            a = na;
            b = nb;
        }
        (a[0] - (-1.0f64).exp()).abs()
    }

    #[test]
    fn rk4_converges_at_fourth_order() {
        let e1 = decay_error(IntegratorKind::Rk4, 0.1);
        let e2 = decay_error(IntegratorKind::Rk4, 0.05);
        let rate = e1 / e2;
        assert!((12.0..24.0).contains(&rate), "rate {rate}");
    }

    #[test]
    fn forward_euler_converges_at_first_order() {
        let e1 = decay_error(IntegratorKind::ForwardEuler, 0.01);
        let e2 = decay_error(IntegratorKind::ForwardEuler, 0.005);
        let rate = e1 / e2;
        assert!((1.8..2.2).contains(&rate), "rate {rate}");
    }

    #[test]
    fn rk4_integrates_cubic_time_dependence_exactly() {
        // y' = t^3 is integrated without truncation error by the classical
        // four-stage scheme; only rounding remains.
        let mut y = DVector::zeros(1);
        let dt = 0.125;
        let mut rhs = |t: f64, _a: &DVector<f64>, _b: &DVector<f64>| {
            Ok((DVector::from_element(1, t * t * t), DVector::zeros(1)))
        };
        let mut z = DVector::zeros(1);
        for k in 0..8 {
            let (ny, nz) = step_pair(IntegratorKind::Rk4, dt, k as f64 * dt, &y, &z, &mut rhs)
                .unwrap();
            y = ny;
            z = nz;
        }
        assert!((y[0] - 0.25).abs() < 1e-14);
    }
}
