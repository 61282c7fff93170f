//! Monotonicity-preserving piecewise cubic Hermite interpolation.
//!
//! Tangents follow the Fritsch-Carlson construction (weighted harmonic mean
//! of adjacent secants, zeroed at local extrema) with one-sided three-point
//! end tangents, so the interpolant never overshoots monotone data.

/// 1-D monotone cubic interpolant over strictly increasing abscissae.
#[derive(Debug, Clone, PartialEq)]
pub struct Pchip {
    t: Vec<f64>,
    y: Vec<f64>,
    /// Knot tangents dy/dt.
    m: Vec<f64>,
}

impl Pchip {
    /// Builds the interpolant. `t` must be strictly increasing and at least
    /// two knots long; panics otherwise (callers validate their inputs).
    pub fn new(t: Vec<f64>, y: Vec<f64>) -> Self {
        assert_eq!(t.len(), y.len());
        assert!(t.len() >= 2, "need at least two knots");
        assert!(
            t.windows(2).all(|w| w[1] > w[0]),
            "knot abscissae must be strictly increasing"
        );
        let n = t.len();
        let h: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();

        let mut m = vec![0.0; n];
        if n == 2 {
            m[0] = delta[0];
            m[1] = delta[0];
        } else {
            for k in 1..n - 1 {
                if delta[k - 1] * delta[k] > 0.0 {
                    let w1 = 2.0 * h[k] + h[k - 1];
                    let w2 = h[k] + 2.0 * h[k - 1];
                    m[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
                }
            }
            m[0] = edge_tangent(h[0], h[1], delta[0], delta[1]);
            m[n - 1] = edge_tangent(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }
        Pchip { t, y, m }
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.t[0], *self.t.last().unwrap())
    }

    fn segment(&self, x: f64) -> usize {
        let n = self.t.len();
        // Index of the segment whose [t_k, t_{k+1}] contains x (clamped).
        let idx = self.t.partition_point(|&tk| tk <= x);
        idx.clamp(1, n - 1) - 1
    }

    /// Value at `x`; the argument is clamped to the knot range.
    pub fn eval(&self, x: f64) -> f64 {
        let (lo, hi) = self.domain();
        let x = x.clamp(lo, hi);
        let k = self.segment(x);
        let h = self.t[k + 1] - self.t[k];
        let s = (x - self.t[k]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.y[k] + h10 * h * self.m[k] + h01 * self.y[k + 1] + h11 * h * self.m[k + 1]
    }

    /// Derivative dy/dx at `x` (clamped to the knot range).
    pub fn deriv(&self, x: f64) -> f64 {
        let (lo, hi) = self.domain();
        let x = x.clamp(lo, hi);
        let k = self.segment(x);
        let h = self.t[k + 1] - self.t[k];
        let s = (x - self.t[k]) / h;
        let s2 = s * s;
        let d00 = (6.0 * s2 - 6.0 * s) / h;
        let d10 = 3.0 * s2 - 4.0 * s + 1.0;
        let d01 = (-6.0 * s2 + 6.0 * s) / h;
        let d11 = 3.0 * s2 - 2.0 * s;
        d00 * self.y[k] + d10 * self.m[k] + d01 * self.y[k + 1] + d11 * self.m[k + 1]
    }
}

/// One-sided three-point end tangent with the usual shape-preserving limits.
fn edge_tangent(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let mut m = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if m * d0 <= 0.0 {
        m = 0.0;
    } else if d0 * d1 < 0.0 && m.abs() > 3.0 * d0.abs() {
        m = 3.0 * d0;
    }
    m
}
