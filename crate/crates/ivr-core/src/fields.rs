//! Coefficient fields: velocity, sources, and boundary data.
//!
//! Fields are immutable closures over space only. Boundary data carries no
//! time argument by design: the lifting used by the reduction pipeline
//! assumes stationary Dirichlet data, so time-dependent boundary values are
//! unrepresentable rather than silently mishandled.

use std::fmt;
use std::sync::Arc;

/// Divergence-free advection field u(x, y) -> (ux, uy).
#[derive(Clone)]
pub struct VelocityField(Arc<dyn Fn(f64, f64) -> (f64, f64) + Send + Sync>);

impl VelocityField {
    pub fn new(f: impl Fn(f64, f64) -> (f64, f64) + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }

    /// Rigid rotation about the center of the unit square:
    /// u(x, y) = (0.5 - y, x - 0.5). Divergence-free.
    pub fn rotation() -> Self {
        Self::new(|x, y| (0.5 - y, x - 0.5))
    }

    pub fn constant(ux: f64, uy: f64) -> Self {
        Self::new(move |_, _| (ux, uy))
    }

    pub fn zero() -> Self {
        Self::constant(0.0, 0.0)
    }

    #[inline]
    pub fn eval(&self, x: f64, y: f64) -> (f64, f64) {
        (self.0)(x, y)
    }
}

impl fmt::Debug for VelocityField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("VelocityField(..)")
    }
}

/// Scalar field of space, used for sources, boundary data, and initial states.
#[derive(Clone)]
pub struct ScalarField(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>);

impl ScalarField {
    pub fn new(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }

    pub fn constant(c: f64) -> Self {
        Self::new(move |_, _| c)
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    #[inline]
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        (self.0)(x, y)
    }
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ScalarField(..)")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotation_is_centered_and_divergence_free_analytically() {
        let u = VelocityField::rotation();
        assert_eq!(u.eval(0.5, 0.5), (0.0, 0.0));
        // (ux, uy) = (0.5 - y, x - 0.5): d(ux)/dx + d(uy)/dy = 0 identically.
        let (ux, uy) = u.eval(0.25, 0.75);
        assert_eq!(ux, -0.25);
        assert_eq!(uy, -0.25);
    }
}
