//! Stochastic generation and persistence of training environments.
//!
//! A scenario is a smooth waypoint path between two antipodal endpoints plus
//! a set of circular obstacles scattered around the path. Generation is a
//! pure function of `(GenParams, seed)`: endpoints on a circle of diameter
//! `path_length`, jittered interior waypoints, then obstacles placed at a
//! uniform arc position with a Gaussian lateral offset along the path normal
//! and a Poisson-distributed radius.

use nalgebra::Vector2;
use std::fmt::Write as _;
use std::path::Path as FsPath;
use thiserror::Error;

use crate::geometry::Path;
use crate::rng::Rng;

/// Vessel width used by the placement guards around the endpoints.
const GUARD_VESSEL_WIDTH: f64 = 4.0;

/// Static circular obstacle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obstacle {
    pub center: Vector2<f64>,
    pub radius: f64,
}

impl Obstacle {
    pub fn new(cx: f64, cy: f64, radius: f64) -> Self {
        debug_assert!(radius > 0.0);
        Obstacle { center: Vector2::new(cx, cy), radius }
    }
}

/// Where an obstacle was placed relative to the path (kept for analysis of
/// the generator's statistics).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObstaclePlacement {
    /// Arc position drawn from `U(0.1 L_p, 0.9 L_p)`.
    pub omega_bar: f64,
    /// Signed lateral offset drawn from `N(0, sigma_d^2)`.
    pub lateral_offset: f64,
}

/// Generation parameters; defaults follow the training setup.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenParams {
    /// Number of obstacles.
    pub n_obstacles: usize,
    /// Inclusive range for the number of interior waypoints.
    pub n_waypoints_min: u32,
    pub n_waypoints_max: u32,
    /// Nominal path length [m] (endpoint separation).
    pub path_length: f64,
    /// Mean obstacle radius [m] (Poisson).
    pub mean_radius: f64,
    /// Standard deviation of the lateral obstacle offset [m].
    pub offset_std: f64,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            n_obstacles: 20,
            n_waypoints_min: 2,
            n_waypoints_max: 5,
            path_length: 400.0,
            mean_radius: 30.0,
            offset_std: 150.0,
        }
    }
}

impl GenParams {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.n_waypoints_min > self.n_waypoints_max {
            return Err(ScenarioError::InvalidParams(
                "n_waypoints_min exceeds n_waypoints_max".into(),
            ));
        }
        if self.path_length <= 0.0 || self.mean_radius <= 0.0 || self.offset_std <= 0.0 {
            return Err(ScenarioError::InvalidParams(
                "path_length, mean_radius and offset_std must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid generation parameters: {0}")]
    InvalidParams(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unsupported scenario file version {found:?}, expected {expected:?}")]
    UnsupportedVersion { found: String, expected: String },
}

/// A generated environment: path, obstacles and endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub path: Path,
    pub obstacles: Vec<Obstacle>,
    /// Placement draws parallel to `obstacles` (empty for hand-built scenes).
    pub placements: Vec<ObstaclePlacement>,
    pub p_start: Vector2<f64>,
    pub p_end: Vector2<f64>,
    pub seed: u64,
    pub gen_params: GenParams,
}

/// Generates a scenario. Pure in `(params, seed)`.
pub fn generate(params: &GenParams, seed: u64) -> Result<Scenario, ScenarioError> {
    params.validate()?;
    let mut rng = Rng::seed_from_u64(seed);
    let lp = params.path_length;

    let theta_start = rng.uniform(0.0, 2.0 * std::f64::consts::PI);
    let p_start = 0.5 * lp * Vector2::new(theta_start.cos(), theta_start.sin());
    let p_end = -p_start;

    // Interior waypoints: evenly spaced along the chord, isotropic Gaussian
    // jitter with sigma = path_length / 10.
    let n_w = rng.uniform_int(params.n_waypoints_min as i64, params.n_waypoints_max as i64) as usize;
    let jitter_std = lp / 10.0;
    let mut waypoints = Vec::with_capacity(n_w + 2);
    waypoints.push([p_start.x, p_start.y]);
    for k in 1..=n_w {
        let frac = k as f64 / (n_w + 1) as f64;
        let base = p_start + frac * (p_end - p_start);
        waypoints.push([
            base.x + rng.gaussian(0.0, jitter_std),
            base.y + rng.gaussian(0.0, jitter_std),
        ]);
    }
    waypoints.push([p_end.x, p_end.y]);
    let path = Path::new(&waypoints)
        .map_err(|e| ScenarioError::InvalidParams(format!("degenerate waypoint draw: {e}")))?;

    let mut obstacles = Vec::with_capacity(params.n_obstacles);
    let mut placements = Vec::with_capacity(params.n_obstacles);
    while obstacles.len() < params.n_obstacles {
        let omega = rng.uniform(0.1 * lp, 0.9 * lp);
        let offset = rng.gaussian(0.0, params.offset_std);
        let gamma = path.tangent_angle(omega);
        let normal_angle = gamma - std::f64::consts::FRAC_PI_2;
        let center = path.point(omega) + offset * Vector2::new(normal_angle.cos(), normal_angle.sin());
        // Poisson can draw zero; obstacles must have positive radius.
        let mut radius = rng.poisson(params.mean_radius) as f64;
        while radius == 0.0 {
            radius = rng.poisson(params.mean_radius) as f64;
        }
        // Keep the start and goal reachable.
        let clearance = radius + 2.0 * GUARD_VESSEL_WIDTH;
        if (center - p_start).norm() <= clearance || (center - p_end).norm() <= clearance {
            continue;
        }
        obstacles.push(Obstacle { center, radius });
        placements.push(ObstaclePlacement { omega_bar: omega, lateral_offset: offset });
    }

    Ok(Scenario {
        path,
        obstacles,
        placements,
        p_start,
        p_end,
        seed,
        gen_params: params.clone(),
    })
}

const FILE_VERSION: &str = "asvlab-scenario-v1";

/// Serializes the scenario as a line-oriented UTF-8 document. Floats are
/// written with 17 significant digits so parsing restores them exactly.
pub fn to_string(s: &Scenario) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{FILE_VERSION}");
    let _ = writeln!(out, "seed = {}", s.seed);
    let _ = writeln!(out, "n_obstacles = {}", s.gen_params.n_obstacles);
    let _ = writeln!(out, "n_waypoints_min = {}", s.gen_params.n_waypoints_min);
    let _ = writeln!(out, "n_waypoints_max = {}", s.gen_params.n_waypoints_max);
    let _ = writeln!(out, "path_length_m = {:.16e}", s.gen_params.path_length);
    let _ = writeln!(out, "mean_radius_m = {:.16e}", s.gen_params.mean_radius);
    let _ = writeln!(out, "offset_std_m = {:.16e}", s.gen_params.offset_std);
    let _ = writeln!(out, "[waypoints]");
    for w in s.path.waypoints() {
        let _ = writeln!(out, "{:.16e} {:.16e}", w.x, w.y);
    }
    let _ = writeln!(out, "[obstacles]");
    for (i, o) in s.obstacles.iter().enumerate() {
        if let Some(p) = s.placements.get(i) {
            let _ = writeln!(
                out,
                "{:.16e} {:.16e} {:.16e} {:.16e} {:.16e}",
                o.center.x, o.center.y, o.radius, p.omega_bar, p.lateral_offset
            );
        } else {
            let _ = writeln!(out, "{:.16e} {:.16e} {:.16e}", o.center.x, o.center.y, o.radius);
        }
    }
    out
}

pub fn save(s: &Scenario, path: &FsPath) -> Result<(), ScenarioError> {
    crate::config::write_atomic(path, to_string(s).as_bytes()).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn from_str(text: &str) -> Result<Scenario, ScenarioError> {
    let parse_err = |line: usize, msg: &str| ScenarioError::Parse { line, msg: msg.into() };
    let mut lines = text.lines().enumerate();

    let (_, version) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    if version.trim() != FILE_VERSION {
        return Err(ScenarioError::UnsupportedVersion {
            found: version.trim().to_string(),
            expected: FILE_VERSION.to_string(),
        });
    }

    let mut seed = None;
    let mut gp = GenParams::default();
    let mut waypoints: Vec<[f64; 2]> = Vec::new();
    let mut obstacles = Vec::new();
    let mut placements = Vec::new();
    #[derive(PartialEq)]
    enum Section {
        Header,
        Waypoints,
        Obstacles,
    }
    let mut section = Section::Header;
    let mut saw_obstacle_section = false;

    for (idx, raw) in lines {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        match line {
            "[waypoints]" => {
                section = Section::Waypoints;
                continue;
            }
            "[obstacles]" => {
                section = Section::Obstacles;
                saw_obstacle_section = true;
                continue;
            }
            _ => {}
        }
        match section {
            Section::Header => {
                let (key, value) = line
                    .split_once('=')
                    .ok_or_else(|| parse_err(line_no, "expected `key = value`"))?;
                let key = key.trim();
                let value = value.trim();
                let bad = |what: &str| parse_err(line_no, &format!("invalid {what}: {value:?}"));
                match key {
                    "seed" => seed = Some(value.parse::<u64>().map_err(|_| bad("seed"))?),
                    "n_obstacles" => gp.n_obstacles = value.parse().map_err(|_| bad(key))?,
                    "n_waypoints_min" => gp.n_waypoints_min = value.parse().map_err(|_| bad(key))?,
                    "n_waypoints_max" => gp.n_waypoints_max = value.parse().map_err(|_| bad(key))?,
                    "path_length_m" => gp.path_length = value.parse().map_err(|_| bad(key))?,
                    "mean_radius_m" => gp.mean_radius = value.parse().map_err(|_| bad(key))?,
                    "offset_std_m" => gp.offset_std = value.parse().map_err(|_| bad(key))?,
                    _ => return Err(parse_err(line_no, &format!("unknown header key {key:?}"))),
                }
            }
            Section::Waypoints => {
                let mut it = line.split_whitespace();
                let x: f64 = it
                    .next()
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| parse_err(line_no, "waypoint x"))?;
                let y: f64 = it
                    .next()
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| parse_err(line_no, "waypoint y"))?;
                if it.next().is_some() {
                    return Err(parse_err(line_no, "waypoint line has extra fields"));
                }
                waypoints.push([x, y]);
            }
            Section::Obstacles => {
                let fields: Vec<f64> = line
                    .split_whitespace()
                    .map(|v| v.parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| parse_err(line_no, "obstacle fields must be numbers"))?;
                match fields.len() {
                    3 => obstacles.push(Obstacle::new(fields[0], fields[1], fields[2])),
                    5 => {
                        obstacles.push(Obstacle::new(fields[0], fields[1], fields[2]));
                        placements.push(ObstaclePlacement {
                            omega_bar: fields[3],
                            lateral_offset: fields[4],
                        });
                    }
                    n => {
                        return Err(parse_err(
                            line_no,
                            &format!("obstacle line has {n} fields, expected 3 or 5"),
                        ))
                    }
                }
            }
        }
    }

    let seed = seed.ok_or_else(|| parse_err(0, "missing `seed` in header"))?;
    if !saw_obstacle_section {
        return Err(parse_err(0, "missing [obstacles] section (file truncated?)"));
    }
    if !placements.is_empty() && placements.len() != obstacles.len() {
        return Err(parse_err(0, "mixed obstacle records with and without placement data"));
    }
    let path = Path::new(&waypoints).map_err(|e| parse_err(0, &format!("invalid waypoint set: {e}")))?;
    let p_start = path.start();
    let p_end = path.end();
    Ok(Scenario {
        path,
        obstacles,
        placements,
        p_start,
        p_end,
        seed,
        gen_params: gp,
    })
}

pub fn load(path: &FsPath) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    from_str(&text)
}
