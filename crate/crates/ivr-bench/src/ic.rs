//! Solid-body-rotation initial condition: a smooth cosine hump, a cone, and
//! a slotted cylinder on a zero background, each of radius 0.15.

use ivr_core::fields::ScalarField;

/// Body radius shared by all three shapes.
pub const BODY_RADIUS: f64 = 0.15;

fn dist(x: f64, y: f64, cx: f64, cy: f64) -> f64 {
    ((x - cx).powi(2) + (y - cy).powi(2)).sqrt()
}

/// Pointwise initial value.
///
/// - cosine hump centered at (0.25, 0.5): 0.25 (1 + cos(pi min(d/r, 1))),
///   peak value 0.5;
/// - cone centered at (0.5, 0.25): 1 - d/r, apex value 1;
/// - slotted cylinder centered at (0.5, 0.75): value 1 inside the radius
///   except the slot |x - 0.5| < 0.025, y < 0.85;
/// - zero outside all bodies.
pub fn initial_condition(x: f64, y: f64) -> f64 {
    let d_hump = dist(x, y, 0.25, 0.5);
    if d_hump <= BODY_RADIUS {
        return 0.25 * (1.0 + (std::f64::consts::PI * (d_hump / BODY_RADIUS).min(1.0)).cos());
    }
    let d_cone = dist(x, y, 0.5, 0.25);
    if d_cone <= BODY_RADIUS {
        return 1.0 - d_cone / BODY_RADIUS;
    }
    let d_cyl = dist(x, y, 0.5, 0.75);
    if d_cyl <= BODY_RADIUS && !((x - 0.5).abs() < 0.025 && y < 0.85) {
        return 1.0;
    }
    0.0
}

/// The initial condition as a scalar field.
pub fn initial_field() -> ScalarField {
    ScalarField::new(initial_condition)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn background_is_zero() {
        assert_eq!(initial_condition(0.9, 0.9), 0.0);
        assert_eq!(initial_condition(0.0, 0.0), 0.0);
    }

    #[test]
    fn cone_apex_is_one() {
        assert_eq!(initial_condition(0.5, 0.25), 1.0);
    }

    #[test]
    fn hump_peak_is_half() {
        assert_eq!(initial_condition(0.25, 0.5), 0.5);
    }

    #[test]
    fn cylinder_is_one_outside_the_slot_and_zero_inside_it() {
        assert_eq!(initial_condition(0.55, 0.75), 1.0);
        // Slot region: inside the radius but carved out.
        assert_eq!(initial_condition(0.5, 0.75), 0.0);
        assert_eq!(initial_condition(0.51, 0.7), 0.0);
        // Above y = 0.85 the slot ends even at the center line.
        assert_eq!(initial_condition(0.5, 0.87), 1.0);
    }

    #[test]
    fn bodies_decay_continuously_to_the_background() {
        // Hump and cone vanish at their radius.
        assert!(initial_condition(0.25 + BODY_RADIUS, 0.5).abs() < 1e-12);
        assert!(initial_condition(0.5, 0.25 + BODY_RADIUS).abs() < 1e-12);
    }
}
