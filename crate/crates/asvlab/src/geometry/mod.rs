//! Waypoint paths and path-relative guidance quantities.
//!
//! A [`Path`] interpolates waypoints with one monotone cubic per coordinate
//! against the cumulative chord parameter, then reparameterizes by arc
//! length through a quadrature table so that the path variable is measured
//! in meters along the curve.

mod pchip;

pub use pchip::Pchip;

use nalgebra::Vector2;
use thiserror::Error;

use crate::angle::wrap_angle;

/// Number of knots in the cumulative arc-length table.
const ARC_TABLE_KNOTS: usize = 1000;

/// 5-point Gauss-Legendre nodes and weights on [-1, 1].
const GAUSS_X: [f64; 5] = [
    0.0,
    -0.538_469_310_105_683_1,
    0.538_469_310_105_683_1,
    -0.906_179_845_938_664,
    0.906_179_845_938_664,
];
const GAUSS_W: [f64; 5] = [
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
    0.236_926_885_056_189_1,
];

#[derive(Debug, Error, PartialEq)]
pub enum PathError {
    #[error("a path needs at least two waypoints, got {0}")]
    TooFewWaypoints(usize),
    #[error("waypoints {0} and {1} coincide")]
    DuplicateWaypoint(usize, usize),
}

/// Smooth arc-length parameterized curve through waypoints.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    waypoints: Vec<Vector2<f64>>,
    x_spline: Pchip,
    y_spline: Pchip,
    /// Maps arc length in [0, length] to the chord parameter.
    arc_to_param: Pchip,
    length: f64,
}

impl Path {
    /// Interpolates the waypoints and builds the arc-length table.
    pub fn new(waypoints: &[[f64; 2]]) -> Result<Self, PathError> {
        if waypoints.len() < 2 {
            return Err(PathError::TooFewWaypoints(waypoints.len()));
        }
        let pts: Vec<Vector2<f64>> = waypoints.iter().map(|w| Vector2::new(w[0], w[1])).collect();
        // Chordal parameterization.
        let mut t = Vec::with_capacity(pts.len());
        t.push(0.0);
        for i in 1..pts.len() {
            let chord = (pts[i] - pts[i - 1]).norm();
            if chord == 0.0 {
                return Err(PathError::DuplicateWaypoint(i - 1, i));
            }
            t.push(t[i - 1] + chord);
        }
        let x_spline = Pchip::new(t.clone(), pts.iter().map(|p| p.x).collect());
        let y_spline = Pchip::new(t.clone(), pts.iter().map(|p| p.y).collect());

        // Cumulative arc length sampled on a refinement of the chord grid,
        // with quadrature applied only inside spline segments (the integrand
        // has derivative kinks at the waypoints).
        let total_chord = *t.last().unwrap();
        let speed = |tau: f64| x_spline.deriv(tau).hypot(y_spline.deriv(tau));
        let mut knots_t = vec![0.0];
        let mut knots_s = vec![0.0];
        let mut acc = 0.0;
        for seg in 0..t.len() - 1 {
            let (a, b) = (t[seg], t[seg + 1]);
            let sub = (((b - a) / total_chord * ARC_TABLE_KNOTS as f64).ceil() as usize).max(1);
            for i in 0..sub {
                let lo = a + (b - a) * i as f64 / sub as f64;
                let hi = a + (b - a) * (i + 1) as f64 / sub as f64;
                let half = 0.5 * (hi - lo);
                let mid = 0.5 * (hi + lo);
                let mut arc = 0.0;
                for (xg, wg) in GAUSS_X.iter().zip(GAUSS_W) {
                    arc += wg * speed(mid + half * xg);
                }
                acc += arc * half;
                knots_t.push(hi);
                knots_s.push(acc);
            }
        }
        debug_assert!(knots_s.windows(2).all(|w| w[1] > w[0]), "arc table must increase");
        let length = acc;
        let arc_to_param = Pchip::new(knots_s, knots_t);
        Ok(Path {
            waypoints: pts,
            x_spline,
            y_spline,
            arc_to_param,
            length,
        })
    }

    /// Total arc length in meters.
    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn waypoints(&self) -> &[Vector2<f64>] {
        &self.waypoints
    }

    pub fn start(&self) -> Vector2<f64> {
        self.waypoints[0]
    }

    pub fn end(&self) -> Vector2<f64> {
        *self.waypoints.last().unwrap()
    }

    fn param_at(&self, omega_bar: f64) -> f64 {
        self.arc_to_param.eval(omega_bar.clamp(0.0, self.length))
    }

    /// Position on the path at arc length `omega_bar` (clamped).
    pub fn point(&self, omega_bar: f64) -> Vector2<f64> {
        let tau = self.param_at(omega_bar);
        Vector2::new(self.x_spline.eval(tau), self.y_spline.eval(tau))
    }

    /// Tangent direction angle at arc length `omega_bar` (clamped).
    pub fn tangent_angle(&self, omega_bar: f64) -> f64 {
        let tau = self.param_at(omega_bar);
        self.y_spline.deriv(tau).atan2(self.x_spline.deriv(tau))
    }
}

/// Arc-length coordinate of the moving path reference point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathVariable {
    omega_bar: f64,
}

impl PathVariable {
    pub fn new() -> Self {
        PathVariable { omega_bar: 0.0 }
    }

    pub fn get(&self) -> f64 {
        self.omega_bar
    }
}

impl Default for PathVariable {
    fn default() -> Self {
        Self::new()
    }
}

/// Path-relative errors of the vessel at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingErrors {
    /// Along-track error [m].
    pub s: f64,
    /// Cross-track error [m].
    pub e: f64,
    /// Course change needed to head at the look-ahead point [rad].
    pub chi_err: f64,
    /// Look-ahead path tangent minus current course [rad].
    pub lookahead_course_err: f64,
}

/// Along/cross-track errors and the two course errors against the look-ahead
/// point at `omega_bar + delta_la`.
pub fn tracking_errors(
    path: &Path,
    omega_bar: f64,
    vessel_pos: Vector2<f64>,
    course: f64,
    delta_la: f64,
) -> TrackingErrors {
    debug_assert!(delta_la > 0.0);
    let reference = path.point(omega_bar);
    let gamma = path.tangent_angle(omega_bar);
    let diff = vessel_pos - reference;
    let (sin_g, cos_g) = gamma.sin_cos();
    let s = cos_g * diff.x + sin_g * diff.y;
    let e = -sin_g * diff.x + cos_g * diff.y;

    let ahead = path.point(omega_bar + delta_la);
    let chi_err = wrap_angle((ahead.y - reference.y).atan2(ahead.x - reference.x) - course);
    let lookahead_course_err = wrap_angle(path.tangent_angle(omega_bar + delta_la) - course);
    TrackingErrors { s, e, chi_err, lookahead_course_err }
}

/// Explicit Euler update of the path variable:
/// `omega_dot = sqrt(u^2 + v^2) cos(chi_err) - gamma_omega * s`.
pub fn advance_path_variable(
    pv: PathVariable,
    path: &Path,
    u: f64,
    v: f64,
    chi_err: f64,
    s: f64,
    h: f64,
    gamma_omega: f64,
) -> PathVariable {
    debug_assert!(gamma_omega > 0.0);
    let rate = u.hypot(v) * chi_err.cos() - gamma_omega * s;
    PathVariable {
        omega_bar: (pv.omega_bar + h * rate).clamp(0.0, path.length()),
    }
}
