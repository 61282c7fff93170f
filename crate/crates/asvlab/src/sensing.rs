//! Rangefinder simulation and sector pooling.
//!
//! A sweep casts `N` rays spread uniformly over the sensor span and clips
//! distances to the maximum range. For the observation vector the sweep is
//! reduced to `d` sector scalars by one of three poolings:
//!
//! - min: shortest reading in the sector (conservative),
//! - max: longest reading (optimistic),
//! - feasibility: the largest distance level the vessel can actually advance
//!   to, given its width and the angular openings between blocked rays.
//!
//! Feasibility pooling scans the readings of a sector in ascending order.
//! At the level of reading `x_i` every maximal run of `L` consecutive rays
//! measuring strictly more than `x_i` forms an opening of width
//! `(L + 1) * theta * x_i` (the run's arc plus a half arc toward the
//! bounding rays on each side). The pooled value is the first level whose
//! widest opening is narrower than the vessel; if every level stays passable
//! the maximum range is returned.

use nalgebra::Vector2;
use thiserror::Error;

use crate::dynamics::VesselState;
use crate::scenario::Obstacle;

#[derive(Debug, Error)]
pub enum SensingError {
    #[error("invalid sensor configuration: {0}")]
    InvalidConfig(String),
}

/// Rangefinder suite geometry.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorConfig {
    /// Total number of rays (N).
    pub n_rays: usize,
    /// Total angular span [rad] (S_s).
    pub span: f64,
    /// Maximum measured distance [m] (S_r).
    pub max_range: f64,
    /// Number of pooled sectors (d).
    pub n_sectors: usize,
    /// Vessel width used by feasibility pooling [m] (W).
    pub vessel_width: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        SensorConfig {
            n_rays: 225,
            span: 4.0 * std::f64::consts::PI / 3.0,
            max_range: 150.0,
            n_sectors: 25,
            vessel_width: 4.0,
        }
    }
}

impl SensorConfig {
    pub fn validate(&self) -> Result<(), SensingError> {
        if self.n_rays < 2 {
            return Err(SensingError::InvalidConfig("need at least two rays".into()));
        }
        if self.n_sectors == 0 || self.n_rays % self.n_sectors != 0 {
            return Err(SensingError::InvalidConfig(format!(
                "ray count {} must be a multiple of sector count {}",
                self.n_rays, self.n_sectors
            )));
        }
        if !(0.0..=2.0 * std::f64::consts::PI).contains(&self.span) {
            return Err(SensingError::InvalidConfig("span must lie in [0, 2pi]".into()));
        }
        if self.max_range <= 0.0 || self.vessel_width <= 0.0 {
            return Err(SensingError::InvalidConfig(
                "max_range and vessel_width must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Rays per sector (the sensor density n).
    pub fn rays_per_sector(&self) -> usize {
        self.n_rays / self.n_sectors
    }

    /// Angle between neighboring rays.
    pub fn ray_spacing(&self) -> f64 {
        self.span / (self.n_rays - 1) as f64
    }

    /// Vessel-relative angle of ray `i`; ray 0 sits at one edge of the span
    /// and the middle ray points at the bow.
    pub fn ray_angle(&self, i: usize) -> f64 {
        -0.5 * self.span + i as f64 * self.ray_spacing()
    }
}

/// One full rangefinder sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorSweep {
    /// Measured distances, clipped to `[0, max_range]`.
    pub distances: Vec<f64>,
    /// Vessel-relative ray angles.
    pub angles: Vec<f64>,
    /// Set when the vessel position is inside an obstacle; all distances are
    /// zero in that case.
    pub inside_obstacle: bool,
}

/// Smallest positive ray/circle intersection parameter, if any.
fn ray_circle_distance(origin: Vector2<f64>, dir: Vector2<f64>, obstacle: &Obstacle) -> Option<f64> {
    let to_center = obstacle.center - origin;
    let b = dir.dot(&to_center);
    let disc = b * b - (to_center.norm_squared() - obstacle.radius * obstacle.radius);
    if disc < 0.0 {
        return None;
    }
    let sqrt_disc = disc.sqrt();
    let t_near = b - sqrt_disc;
    if t_near > 0.0 {
        return Some(t_near);
    }
    let t_far = b + sqrt_disc;
    if t_far > 0.0 {
        return Some(t_far);
    }
    None
}

/// Casts the full ray fan from the vessel pose against all obstacles.
pub fn cast_rays(pose: &VesselState, obstacles: &[Obstacle], cfg: &SensorConfig) -> SensorSweep {
    let origin = pose.position();
    let angles: Vec<f64> = (0..cfg.n_rays).map(|i| cfg.ray_angle(i)).collect();
    if obstacles
        .iter()
        .any(|o| (origin - o.center).norm() < o.radius)
    {
        return SensorSweep {
            distances: vec![0.0; cfg.n_rays],
            angles,
            inside_obstacle: true,
        };
    }
    let distances = angles
        .iter()
        .map(|rel| {
            let heading = pose.psi + rel;
            let dir = Vector2::new(heading.cos(), heading.sin());
            obstacles
                .iter()
                .filter_map(|o| ray_circle_distance(origin, dir, o))
                .fold(cfg.max_range, f64::min)
                .clamp(0.0, cfg.max_range)
        })
        .collect();
    SensorSweep {
        distances,
        angles,
        inside_obstacle: false,
    }
}

/// Sector reduction method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolingMethod {
    Min,
    Max,
    Feasibility,
}

impl std::str::FromStr for PoolingMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "min" => Ok(PoolingMethod::Min),
            "max" => Ok(PoolingMethod::Max),
            "feasibility" => Ok(PoolingMethod::Feasibility),
            other => Err(format!("unknown pooling method {other:?}")),
        }
    }
}

impl std::fmt::Display for PoolingMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            PoolingMethod::Min => "min",
            PoolingMethod::Max => "max",
            PoolingMethod::Feasibility => "feasibility",
        };
        f.write_str(name)
    }
}

pub fn min_pool(sector: &[f64]) -> f64 {
    sector.iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn max_pool(sector: &[f64]) -> f64 {
    sector.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Maximum feasible travel distance within one sector.
pub fn feasibility_pool(sector: &[f64], cfg: &SensorConfig) -> f64 {
    let n = sector.len();
    debug_assert!(n > 0);
    let theta = cfg.ray_spacing();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| sector[a].total_cmp(&sector[b]));
    for &i in &order {
        let level = sector[i];
        let arc = theta * level;
        let mut run = 0usize;
        let mut feasible = false;
        for &reading in sector {
            if reading > level {
                run += 1;
                if (run + 1) as f64 * arc > cfg.vessel_width {
                    feasible = true;
                    break;
                }
            } else {
                run = 0;
            }
        }
        if !feasible {
            return level;
        }
    }
    cfg.max_range
}

pub fn pool_sector(sector: &[f64], method: PoolingMethod, cfg: &SensorConfig) -> f64 {
    match method {
        PoolingMethod::Min => min_pool(sector),
        PoolingMethod::Max => max_pool(sector),
        PoolingMethod::Feasibility => feasibility_pool(sector, cfg),
    }
}

/// Reduces the sweep to `d` sector scalars (contiguous ray blocks in index
/// order).
pub fn pool_all(sweep: &SensorSweep, method: PoolingMethod, cfg: &SensorConfig) -> Vec<f64> {
    let n = cfg.rays_per_sector();
    sweep
        .distances
        .chunks(n)
        .map(|sector| pool_sector(sector, method, cfg))
        .collect()
}

/// Root-mean-square deviation of the pooled output under additive Gaussian
/// measurement noise (clipped at zero, then re-clipped to the range).
pub fn robustness_metric(
    pose: &VesselState,
    obstacles: &[Obstacle],
    cfg: &SensorConfig,
    method: PoolingMethod,
    sigma_w: f64,
    trials: usize,
    rng: &mut crate::rng::Rng,
) -> f64 {
    let clean = cast_rays(pose, obstacles, cfg);
    let clean_pooled = pool_all(&clean, method, cfg);
    let mut noisy = clean.clone();
    let mut sum_sq = 0.0;
    for _ in 0..trials {
        for (dst, &src) in noisy.distances.iter_mut().zip(&clean.distances) {
            *dst = (src + rng.gaussian(0.0, sigma_w)).max(0.0).min(cfg.max_range);
        }
        let pooled = pool_all(&noisy, method, cfg);
        sum_sq += pooled
            .iter()
            .zip(&clean_pooled)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
    }
    (sum_sq / (trials * clean_pooled.len()) as f64).sqrt()
}

/// Timing report for one pooling method at one sector density.
#[derive(Debug, Clone, Copy)]
pub struct BenchResult {
    pub method: PoolingMethod,
    pub n: usize,
    pub mean_ns: f64,
    pub std_ns: f64,
}

/// Sectors that drive feasibility pooling through its full level scan: an
/// ascending near half followed by a far half keeps every level passable
/// until the readings run out.
fn bench_sector(n: usize, jitter: f64) -> Vec<f64> {
    let mut sector = Vec::with_capacity(n);
    let near = n / 2;
    for i in 0..near {
        sector.push(50.0 + 40.0 * i as f64 / near.max(1) as f64 + jitter);
    }
    sector.resize(n, 150.0);
    sector
}

/// Measures mean/std per-sector latency of `method` at density `n`.
pub fn pooling_bench(n: usize, method: PoolingMethod, iterations: usize) -> BenchResult {
    // Span/width chosen so the structured sectors stay passable at every
    // level regardless of n (openings scale like n * theta * x = const).
    let cfg = SensorConfig {
        n_rays: n.max(2) * 25,
        n_sectors: 25,
        ..SensorConfig::default()
    };
    let sectors: Vec<Vec<f64>> = (0..16).map(|k| bench_sector(n, k as f64 * 0.01)).collect();
    // Warm up.
    for s in &sectors {
        std::hint::black_box(pool_sector(std::hint::black_box(s), method, &cfg));
    }
    let batches = 24usize;
    let per_batch = (iterations / batches).max(1);
    let mut samples = Vec::with_capacity(batches);
    for _ in 0..batches {
        let start = std::time::Instant::now();
        for rep in 0..per_batch {
            let s = &sectors[rep % sectors.len()];
            std::hint::black_box(pool_sector(std::hint::black_box(s), method, &cfg));
        }
        samples.push(start.elapsed().as_nanos() as f64 / per_batch as f64);
    }
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / samples.len() as f64;
    BenchResult {
        method,
        n,
        mean_ns: mean,
        std_ns: var.sqrt(),
    }
}

/// CSV emission for benchmark results (`method,n,mean_ns,std_ns`).
pub fn bench_csv(results: &[BenchResult]) -> String {
    let mut out = String::from("method,n,mean_ns,std_ns\n");
    for r in results {
        out.push_str(&format!("{},{},{:.1},{:.1}\n", r.method, r.n, r.mean_ns, r.std_ns));
    }
    out
}
