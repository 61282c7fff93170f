//! Angle wrapping helpers shared by dynamics, guidance and sensing.

use std::f64::consts::PI;

/// Wraps an angle to `(-pi, pi]`.
#[inline]
pub fn wrap_angle(a: f64) -> f64 {
    PI - (PI - a).rem_euclid(2.0 * PI)
}

/// Wrapped difference `a - b` in `(-pi, pi]`.
#[inline]
pub fn angle_diff(a: f64, b: f64) -> f64 {
    wrap_angle(a - b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_boundaries() {
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert_eq!(wrap_angle(0.0), 0.0);
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(-2.5 * PI) - (-0.5 * PI)).abs() < 1e-12);
    }

    #[test]
    fn wrap_is_idempotent_on_range() {
        for k in -100..=100 {
            let a = k as f64 * 0.031;
            let w = wrap_angle(a);
            assert!(w > -PI && w <= PI, "wrap({a}) = {w}");
            assert!((wrap_angle(w) - w).abs() < 1e-15);
        }
    }

    #[test]
    fn diff_crosses_seam() {
        let d = angle_diff(3.1, -3.1);
        assert!((d - (6.2 - 2.0 * PI)).abs() < 1e-12);
    }
}
