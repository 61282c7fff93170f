//! Counter-based pseudo-random number generation and the samplers used for
//! scenario generation and training.
//!
//! The generator hashes an incrementing counter against a fixed key
//! (SplitMix64 finalizer), so a stream is a pure function of `(key, counter)`
//! and independent streams can be derived for parallel workers without any
//! platform RNG.

use std::f64::consts::PI;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based generator: `output_i = mix(key + i * gamma)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rng {
    key: u64,
    counter: u64,
}

impl Rng {
    pub fn seed_from_u64(seed: u64) -> Self {
        Rng { key: seed, counter: 0 }
    }

    /// Derives an independent stream for worker/purpose `stream_id`.
    ///
    /// Streams with distinct ids never share outputs with the parent or with
    /// each other (the id is folded through the mixer before use).
    pub fn derive_stream(&self, stream_id: u64) -> Self {
        Rng {
            key: mix64(self.key ^ mix64(stream_id.wrapping_add(GOLDEN_GAMMA))),
            counter: 0,
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN_GAMMA)))
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        const DEN: f64 = (1u64 << 53) as f64;
        ((self.next_u64() >> 11) as f64) / DEN
    }

    /// Uniform in `[a, b)`.
    pub fn uniform(&mut self, a: f64, b: f64) -> f64 {
        a + (b - a) * self.next_f64()
    }

    /// Uniform integer in `[lo, hi]` (inclusive).
    pub fn uniform_int(&mut self, lo: i64, hi: i64) -> i64 {
        debug_assert!(lo <= hi);
        let span = (hi - lo + 1) as u64;
        lo + (self.next_u64() % span) as i64
    }

    /// Standard normal via Box-Muller (cosine branch only, stateless).
    pub fn standard_normal(&mut self) -> f64 {
        let u1 = self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * (1.0 - u1).ln()).sqrt() * (2.0 * PI * u2).cos()
    }

    pub fn gaussian(&mut self, mean: f64, std: f64) -> f64 {
        mean + std * self.standard_normal()
    }

    /// Poisson draw via Knuth's product-of-uniforms method.
    ///
    /// Exact for the means used here (mu <= ~600 before e^-mu underflows).
    pub fn poisson(&mut self, mu: f64) -> u64 {
        debug_assert!(mu > 0.0);
        let limit = (-mu).exp();
        let mut k = 0u64;
        let mut p = 1.0;
        loop {
            p *= self.next_f64();
            if p <= limit {
                return k;
            }
            k += 1;
        }
    }

    /// Gamma draw with shape `alpha` and rate `beta` (mean `alpha / beta`).
    ///
    /// Shape 1 is the exponential special case; larger shapes use
    /// Marsaglia-Tsang squeeze rejection, shapes below 1 the boost trick.
    pub fn gamma(&mut self, alpha: f64, beta: f64) -> f64 {
        debug_assert!(alpha > 0.0 && beta > 0.0);
        if alpha == 1.0 {
            return -(1.0 - self.next_f64()).ln() / beta;
        }
        if alpha < 1.0 {
            let boost = self.next_f64().powf(1.0 / alpha);
            return boost * self.gamma(alpha + 1.0, beta);
        }
        let d = alpha - 1.0 / 3.0;
        let c = 1.0 / (9.0 * d).sqrt();
        loop {
            let x = self.standard_normal();
            let v = (1.0 + c * x).powi(3);
            if v <= 0.0 {
                continue;
            }
            let u = self.next_f64();
            if u < 1.0 - 0.0331 * x.powi(4)
                || u.ln() < 0.5 * x * x + d * (1.0 - v + v.ln())
            {
                return d * v / beta;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_sequence() {
        let mut a = Rng::seed_from_u64(7);
        let mut b = Rng::seed_from_u64(7);
        for _ in 0..32 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn derived_streams_are_independent() {
        let root = Rng::seed_from_u64(1);
        let mut s0 = root.derive_stream(0);
        let mut s1 = root.derive_stream(1);
        let first: Vec<u64> = (0..8).map(|_| s0.next_u64()).collect();
        let second: Vec<u64> = (0..8).map(|_| s1.next_u64()).collect();
        assert_ne!(first, second);
    }

    #[test]
    fn uniform_mean() {
        let mut rng = Rng::seed_from_u64(42);
        let n = 1_000_000;
        let mean = (0..n).map(|_| rng.next_f64()).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.002, "mean = {mean}");
    }

    #[test]
    fn gaussian_std() {
        let mut rng = Rng::seed_from_u64(42);
        let n = 1_000_000;
        let draws: Vec<f64> = (0..n).map(|_| rng.gaussian(0.0, 150.0)).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 0.5, "mean = {mean}");
        assert!((var.sqrt() - 150.0).abs() < 1.0, "std = {}", var.sqrt());
    }

    #[test]
    fn poisson_moments() {
        let mut rng = Rng::seed_from_u64(3);
        let n = 1_000_000;
        let draws: Vec<f64> = (0..n).map(|_| rng.poisson(30.0) as f64).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((mean - 30.0).abs() < 1.0, "mean = {mean}");
        assert!((var - 30.0).abs() < 1.0, "var = {var}");
    }

    #[test]
    fn gamma_shape_one_is_exponential() {
        let mut rng = Rng::seed_from_u64(9);
        let n = 1_000_000;
        let mean = (0..n).map(|_| rng.gamma(1.0, 2.0)).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.005, "mean = {mean}");
    }

    #[test]
    fn gamma_general_shape_mean() {
        let mut rng = Rng::seed_from_u64(11);
        let n = 200_000;
        let mean = (0..n).map(|_| rng.gamma(3.5, 0.5)).sum::<f64>() / n as f64;
        assert!((mean - 7.0).abs() < 0.05, "mean = {mean}");
    }

    #[test]
    fn uniform_int_covers_range() {
        let mut rng = Rng::seed_from_u64(5);
        let mut seen = [false; 4];
        for _ in 0..1000 {
            let v = rng.uniform_int(2, 5);
            assert!((2..=5).contains(&v));
            seen[(v - 2) as usize] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }
}
