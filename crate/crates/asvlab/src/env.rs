//! The episode protocol: observations, rewards and termination.
//!
//! Each step advances the vessel one integrator step under the commanded
//! thrust and yaw moment, moves the path reference point, casts the
//! rangefinder fan and scores the transition with a reward that trades path
//! adherence against obstacle clearance through the per-episode weight
//! `lambda`. The observation exposes `lambda` to the agent as `log10(lambda)`
//! so a single policy can serve the whole trade-off range.

use nalgebra::Vector2;
use thiserror::Error;

use crate::dynamics::{step_rkf45, ControlInput, IntegrationError, VesselParams, VesselState};
use crate::geometry::{advance_path_variable, tracking_errors, PathVariable, TrackingErrors};
use crate::rng::Rng;
use crate::scenario::{generate, GenParams, Obstacle, Scenario, ScenarioError};
use crate::sensing::{cast_rays, pool_all, PoolingMethod, SensorConfig, SensorSweep};

/// Version tag of the observation layout (scalar block plus one closeness
/// value per sector, in ray order).
pub const OBS_LAYOUT_VERSION: u32 = 1;

/// Number of scalar features ahead of the sector block.
pub const OBS_SCALAR_FEATURES: usize = 7;

/// Reward shaping coefficients. `lambda` is the path-adherence weight of the
/// current episode; the remaining fields are fixed coefficients.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardParams {
    /// Trade-off weight in (0, 1]; sampled or pinned per episode.
    pub lambda: f64,
    /// Cross-track error decay [1/m].
    pub gamma_e: f64,
    /// Angular weight sharpening for obstacle closeness.
    pub gamma_theta: f64,
    /// Distance scaling of the obstacle penalty.
    pub gamma_x: f64,
    /// Distance floor removing the singularity at contact [m].
    pub epsilon_x: f64,
    /// Speed fraction that earns zero reward on an empty path.
    pub alpha_r: f64,
    /// Reward issued once on collision (scaled by `1 - lambda`).
    pub r_collision: f64,
    /// Shape of the trade-off sampling distribution.
    pub alpha_lambda: f64,
    /// Rate of the trade-off sampling distribution.
    pub beta_lambda: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        RewardParams {
            lambda: 1.0,
            gamma_e: 0.05,
            gamma_theta: 4.0,
            gamma_x: 0.005,
            epsilon_x: 1.0,
            alpha_r: 0.1,
            r_collision: -2000.0,
            alpha_lambda: 1.0,
            beta_lambda: 2.0,
        }
    }
}

impl RewardParams {
    pub fn validate(&self) -> Result<(), EnvError> {
        let positive = [
            ("gamma_e", self.gamma_e),
            ("gamma_theta", self.gamma_theta),
            ("gamma_x", self.gamma_x),
            ("epsilon_x", self.epsilon_x),
            ("alpha_r", self.alpha_r),
            ("alpha_lambda", self.alpha_lambda),
            ("beta_lambda", self.beta_lambda),
        ];
        for (name, v) in positive {
            if v <= 0.0 {
                return Err(EnvError::InvalidConfig(format!("{name} must be positive")));
            }
        }
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(EnvError::InvalidConfig("lambda must lie in (0, 1]".into()));
        }
        if self.r_collision >= 0.0 {
            return Err(EnvError::InvalidConfig("r_collision must be negative".into()));
        }
        Ok(())
    }
}

/// Episode mechanics.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    /// Integrator step [s].
    pub timestep: f64,
    /// Look-ahead distance along the path [m].
    pub lookahead: f64,
    /// Along-track pullback gain of the path-variable update [1/s].
    pub gamma_omega: f64,
    /// Goal acceptance radius [m].
    pub goal_radius: f64,
    /// Hard episode cap (safety net, reported separately from the reward
    /// floor).
    pub max_episode_steps: usize,
    /// Episode ends when the cumulative reward falls to this level.
    pub reward_floor: f64,
    /// Below this speed the course equals the heading [m/s].
    pub course_speed_threshold: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            timestep: 0.14,
            lookahead: 100.0,
            gamma_omega: 0.05,
            goal_radius: 5.0,
            max_episode_steps: 10_000,
            reward_floor: -5000.0,
            course_speed_threshold: 0.05,
        }
    }
}

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("invalid environment configuration: {0}")]
    InvalidConfig(String),
    #[error("step called on a finished episode")]
    StepAfterDone,
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Integration(#[from] IntegrationError),
}

/// Why an episode ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminationReason {
    Goal,
    Collision,
    RewardFloor,
    /// Episode cap; kept distinct so evaluation can exclude it.
    StepCap,
}

impl std::fmt::Display for TerminationReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            TerminationReason::Goal => "goal",
            TerminationReason::Collision => "collision",
            TerminationReason::RewardFloor => "reward_floor",
            TerminationReason::StepCap => "step_cap",
        };
        f.write_str(name)
    }
}

/// Agent-facing state.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub surge: f64,
    pub sway: f64,
    pub yaw_rate: f64,
    pub lookahead_course_err: f64,
    pub course_err: f64,
    pub cross_track_err: f64,
    pub log10_lambda: f64,
    /// One `1 - pooled / max_range` closeness per sector.
    pub closeness: Vec<f64>,
}

impl Observation {
    /// Flattens to the fixed layout: the seven scalars, then the sectors.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(OBS_SCALAR_FEATURES + self.closeness.len());
        v.extend_from_slice(&[
            self.surge,
            self.sway,
            self.yaw_rate,
            self.lookahead_course_err,
            self.course_err,
            self.cross_track_err,
            self.log10_lambda,
        ]);
        v.extend_from_slice(&self.closeness);
        v
    }

    pub fn dim(&self) -> usize {
        OBS_SCALAR_FEATURES + self.closeness.len()
    }
}

/// Extra per-step data for analysis and traces.
#[derive(Debug, Clone)]
pub struct StepInfo {
    pub cross_track_err: f64,
    pub along_track_err: f64,
    pub position: Vector2<f64>,
    pub sweep: SensorSweep,
    pub applied_control: ControlInput,
}

/// Outcome of one environment step.
#[derive(Debug, Clone)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub termination_reason: Option<TerminationReason>,
    pub info: StepInfo,
}

/// Draws the trade-off weight: `-log10(lambda) ~ Gamma(alpha, beta)`.
pub fn sample_lambda(rng: &mut Rng, params: &RewardParams) -> f64 {
    let draw = rng.gamma(params.alpha_lambda, params.beta_lambda);
    10f64.powf(-draw)
}

/// Path-following reward.
pub fn reward_pf(u: f64, v: f64, chi_err: f64, e: f64, u_max: f64, params: &RewardParams) -> f64 {
    let speed_along = u.hypot(v) / u_max * chi_err.cos();
    -1.0 + (speed_along + 1.0) * ((-params.gamma_e * e.abs()).exp() + 1.0)
}

/// Obstacle-avoidance reward: angularly weighted average of the inverse
/// square closeness over every raw ray. Always non-positive.
pub fn reward_oa(sweep: &SensorSweep, params: &RewardParams) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (&x, &theta) in sweep.distances.iter().zip(&sweep.angles) {
        let weight = 1.0 / (1.0 + (params.gamma_theta * theta).abs());
        let dist = x.max(params.epsilon_x);
        num += weight / (params.gamma_x * dist * dist);
        den += weight;
    }
    -num / den
}

/// Constant living penalty: zero net reward at speed `alpha_r * u_max` on an
/// empty, perfectly tracked path.
pub fn reward_exists(params: &RewardParams) -> f64 {
    -params.lambda * (2.0 * params.alpha_r + 1.0)
}

/// Total per-step reward including the collision clamp.
pub fn total_reward(
    u: f64,
    v: f64,
    chi_err: f64,
    e: f64,
    sweep: &SensorSweep,
    collided: bool,
    u_max: f64,
    params: &RewardParams,
) -> f64 {
    if collided {
        return (1.0 - params.lambda) * params.r_collision;
    }
    params.lambda * reward_pf(u, v, chi_err, e, u_max, params)
        + (1.0 - params.lambda) * reward_oa(sweep, params)
        + reward_exists(params)
}

/// Hull-disc collision test against every obstacle.
pub fn detect_collision(position: Vector2<f64>, obstacles: &[Obstacle], width: f64) -> bool {
    obstacles
        .iter()
        .any(|o| (position - o.center).norm() <= o.radius + 0.5 * width)
}

/// Scenario supply for resets.
#[derive(Debug, Clone)]
pub enum ScenarioSource {
    /// Every episode replays the same scenario.
    Fixed(Box<Scenario>),
    /// Every reset draws a fresh scenario from the generator.
    Random(GenParams),
}

/// Trade-off weight supply for resets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaMode {
    Sampled,
    Pinned(f64),
}

/// One owned environment instance (single episode at a time).
#[derive(Debug, Clone)]
pub struct Env {
    vessel: VesselParams,
    sensors: SensorConfig,
    rewards: RewardParams,
    cfg: EnvConfig,
    source: ScenarioSource,
    lambda_mode: LambdaMode,
    rng: Rng,
    scenario: Scenario,
    state: VesselState,
    path_var: PathVariable,
    cumulative_reward: f64,
    steps: usize,
    done: bool,
}

impl Env {
    /// Builds the environment and starts its first episode.
    pub fn new(
        vessel: VesselParams,
        sensors: SensorConfig,
        rewards: RewardParams,
        cfg: EnvConfig,
        source: ScenarioSource,
        lambda_mode: LambdaMode,
        seed: u64,
    ) -> Result<Self, EnvError> {
        sensors
            .validate()
            .map_err(|e| EnvError::InvalidConfig(e.to_string()))?;
        rewards.validate()?;
        if cfg.timestep <= 0.0 || cfg.lookahead <= 0.0 || cfg.gamma_omega <= 0.0 {
            return Err(EnvError::InvalidConfig(
                "timestep, lookahead and gamma_omega must be positive".into(),
            ));
        }
        if let LambdaMode::Pinned(l) = lambda_mode {
            if !(l > 0.0 && l <= 1.0) {
                return Err(EnvError::InvalidConfig("pinned lambda must lie in (0, 1]".into()));
            }
        }
        if let ScenarioSource::Random(gp) = &source {
            gp.validate()?;
        }
        let placeholder = match &source {
            ScenarioSource::Fixed(s) => (**s).clone(),
            ScenarioSource::Random(gp) => generate(gp, seed)?,
        };
        let mut env = Env {
            vessel,
            sensors,
            rewards,
            cfg,
            source,
            lambda_mode,
            rng: Rng::seed_from_u64(seed),
            state: VesselState::at_rest(placeholder.p_start.x, placeholder.p_start.y, 0.0),
            scenario: placeholder,
            path_var: PathVariable::new(),
            cumulative_reward: 0.0,
            steps: 0,
            done: false,
        };
        env.reset()?;
        Ok(env)
    }

    /// Starts a new episode and returns its first observation.
    pub fn reset(&mut self) -> Result<Observation, EnvError> {
        self.scenario = match &self.source {
            ScenarioSource::Fixed(s) => (**s).clone(),
            ScenarioSource::Random(gp) => generate(gp, self.rng.next_u64())?,
        };
        self.rewards.lambda = match self.lambda_mode {
            LambdaMode::Sampled => sample_lambda(&mut self.rng, &self.rewards),
            LambdaMode::Pinned(l) => l,
        };
        let start = self.scenario.path.start();
        let heading = self.scenario.path.tangent_angle(0.0);
        self.state = VesselState::at_rest(start.x, start.y, heading);
        self.path_var = PathVariable::new();
        self.cumulative_reward = 0.0;
        self.steps = 0;
        self.done = false;
        Ok(self.observe(&self.track()))
    }

    /// Course over ground; falls back to the heading at negligible speed.
    fn course(&self) -> f64 {
        if self.state.speed() > self.cfg.course_speed_threshold {
            self.state.psi + self.state.v.atan2(self.state.u)
        } else {
            self.state.psi
        }
    }

    fn track(&self) -> TrackingErrors {
        tracking_errors(
            &self.scenario.path,
            self.path_var.get(),
            self.state.position(),
            self.course(),
            self.cfg.lookahead,
        )
    }

    fn observe(&self, te: &TrackingErrors) -> Observation {
        let sweep = cast_rays(&self.state, &self.scenario.obstacles, &self.sensors);
        self.observe_with_sweep(te, &sweep)
    }

    fn observe_with_sweep(&self, te: &TrackingErrors, sweep: &SensorSweep) -> Observation {
        let pooled = pool_all(sweep, PoolingMethod::Feasibility, &self.sensors);
        let closeness = pooled
            .iter()
            .map(|&p| 1.0 - p / self.sensors.max_range)
            .collect();
        Observation {
            surge: self.state.u,
            sway: self.state.v,
            yaw_rate: self.state.r,
            lookahead_course_err: te.lookahead_course_err,
            course_err: te.chi_err,
            cross_track_err: te.e,
            log10_lambda: self.rewards.lambda.log10(),
            closeness,
        }
    }

    /// Advances one control period with the commanded `[thrust, yaw moment]`.
    pub fn step(&mut self, action: [f64; 2]) -> Result<StepResult, EnvError> {
        if self.done {
            return Err(EnvError::StepAfterDone);
        }
        let control = ControlInput::new(action[0], action[1]).clamped(&self.vessel);
        self.state = step_rkf45(&self.state, &control, &self.vessel, self.cfg.timestep)?;

        // Move the path reference: its rate uses the errors at the old
        // reference point, observation and reward use the refreshed ones.
        let course = self.course();
        let pre = tracking_errors(
            &self.scenario.path,
            self.path_var.get(),
            self.state.position(),
            course,
            self.cfg.lookahead,
        );
        self.path_var = advance_path_variable(
            self.path_var,
            &self.scenario.path,
            self.state.u,
            self.state.v,
            pre.chi_err,
            pre.s,
            self.cfg.timestep,
            self.cfg.gamma_omega,
        );
        let te = self.track();

        let sweep = cast_rays(&self.state, &self.scenario.obstacles, &self.sensors);
        let collided = sweep.inside_obstacle
            || detect_collision(self.state.position(), &self.scenario.obstacles, self.vessel.width);

        let reward = total_reward(
            self.state.u,
            self.state.v,
            te.chi_err,
            te.e,
            &sweep,
            collided,
            self.vessel.max_speed,
            &self.rewards,
        );
        self.cumulative_reward += reward;
        self.steps += 1;

        let reason = if collided {
            Some(TerminationReason::Collision)
        } else if (self.state.position() - self.scenario.p_end).norm() <= self.cfg.goal_radius {
            Some(TerminationReason::Goal)
        } else if self.cumulative_reward <= self.cfg.reward_floor {
            Some(TerminationReason::RewardFloor)
        } else if self.steps >= self.cfg.max_episode_steps {
            Some(TerminationReason::StepCap)
        } else {
            None
        };
        self.done = reason.is_some();

        Ok(StepResult {
            observation: self.observe_with_sweep(&te, &sweep),
            reward,
            done: self.done,
            termination_reason: reason,
            info: StepInfo {
                cross_track_err: te.e,
                along_track_err: te.s,
                position: self.state.position(),
                sweep,
                applied_control: control,
            },
        })
    }

    pub fn obs_dim(&self) -> usize {
        OBS_SCALAR_FEATURES + self.sensors.n_sectors
    }

    pub fn lambda(&self) -> f64 {
        self.rewards.lambda
    }

    pub fn state(&self) -> &VesselState {
        &self.state
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn cumulative_reward(&self) -> f64 {
        self.cumulative_reward
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn vessel_params(&self) -> &VesselParams {
        &self.vessel
    }

    pub fn env_config(&self) -> &EnvConfig {
        &self.cfg
    }

    /// Current observation without advancing time.
    pub fn observation(&self) -> Observation {
        self.observe(&self.track())
    }
}

/// Collects per-step rows of an episode for the trace CSV.
#[derive(Debug, Default)]
pub struct TraceRecorder {
    rows: Vec<String>,
}

impl TraceRecorder {
    pub fn new() -> Self {
        TraceRecorder { rows: Vec::new() }
    }

    pub fn record(&mut self, t: f64, state: &VesselState, result: &StepResult) {
        let reason = result
            .termination_reason
            .map(|r| r.to_string())
            .unwrap_or_else(|| "none".into());
        self.rows.push(format!(
            "{t:.3},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.3},{:.3},{:.6},{:.6},{:.6},{reason}",
            state.x,
            state.y,
            state.psi,
            state.u,
            state.v,
            state.r,
            result.info.applied_control.thrust,
            result.info.applied_control.yaw_moment,
            result.reward,
            result.info.cross_track_err,
            result.info.along_track_err,
        ));
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,x,y,psi,u,v,r,thrust,yaw_moment,reward,e,s,done_reason\n");
        for row in &self.rows {
            out.push_str(row);
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensing::cast_rays;

    fn params() -> RewardParams {
        RewardParams::default()
    }

    fn far_sweep() -> SensorSweep {
        let cfg = SensorConfig::default();
        cast_rays(&VesselState::at_rest(0.0, 0.0, 0.0), &[], &cfg)
    }

    #[test]
    fn lambda_sampling_range_and_mean() {
        let p = params();
        let mut rng = Rng::seed_from_u64(99);
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let l = sample_lambda(&mut rng, &p);
            assert!(l > 0.0 && l <= 1.0, "lambda {l} out of range");
            sum += -l.log10();
        }
        let mean = sum / n as f64;
        assert!((mean - 0.5).abs() < 0.01, "mean -log10(lambda) = {mean}");
    }

    #[test]
    fn lambda_of_zero_draw_is_one() {
        assert_eq!(10f64.powf(-0.0), 1.0);
    }

    #[test]
    fn reward_pf_reference_points() {
        let p = params();
        assert_eq!(reward_pf(2.0, 0.0, 0.0, 0.0, 2.0, &p), 3.0);
        assert_eq!(reward_pf(0.0, 0.0, 0.0, 0.0, 2.0, &p), 1.0);
        let backwards = reward_pf(2.0, 0.0, std::f64::consts::PI, 0.0, 2.0, &p);
        assert!((backwards + 1.0).abs() < 1e-12);
    }

    #[test]
    fn reward_pf_decays_with_cross_track() {
        let p = params();
        let near = reward_pf(2.0, 0.0, 0.0, 1.0, 2.0, &p);
        let far = reward_pf(2.0, 0.0, 0.0, 100.0, 2.0, &p);
        assert!(near > far);
        assert!(far > 0.9 && far < 1.1, "saturates towards 1, got {far}");
    }

    #[test]
    fn reward_oa_reference_points() {
        let p = params();
        let sweep = far_sweep();
        let expected = -1.0 / (0.005 * 150.0 * 150.0);
        assert!((reward_oa(&sweep, &p) - expected).abs() < 1e-12);

        let mut touching = sweep.clone();
        for d in touching.distances.iter_mut() {
            *d = 1.0;
        }
        assert!((reward_oa(&touching, &p) + 200.0).abs() < 1e-9);
    }

    #[test]
    fn reward_oa_penalizes_head_on_more() {
        let p = params();
        let base = far_sweep();
        let mut ahead = base.clone();
        ahead.distances[112] = 10.0; // bow ray
        let mut side = base.clone();
        side.distances[0] = 10.0; // widest angle
        assert!(
            reward_oa(&ahead, &p) < reward_oa(&side, &p),
            "head-on obstacle must cost more"
        );
    }

    #[test]
    fn reward_exists_reference_points() {
        let mut p = params();
        p.lambda = 1.0;
        assert!((reward_exists(&p) + 1.2).abs() < 1e-12);
        p.lambda = 1e-9;
        assert!(reward_exists(&p).abs() < 1e-8);
    }

    #[test]
    fn calibration_identity_is_exact() {
        let mut p = params();
        let mut rng = Rng::seed_from_u64(4);
        for _ in 0..100 {
            p.lambda = rng.uniform(1e-6, 1.0);
            let residual =
                p.lambda * reward_pf(p.alpha_r * 2.0, 0.0, 0.0, 0.0, 2.0, &p) + reward_exists(&p);
            assert!(residual.abs() < 1e-12, "residual {residual} at lambda {}", p.lambda);
        }
    }

    #[test]
    fn total_reward_collision_clamp() {
        let mut p = params();
        let sweep = far_sweep();
        p.lambda = 0.5;
        let r = total_reward(0.0, 0.0, 0.0, 0.0, &sweep, true, 2.0, &p);
        assert_eq!(r, -1000.0);
        p.lambda = 1.0;
        assert_eq!(total_reward(0.0, 0.0, 0.0, 0.0, &sweep, true, 2.0, &p), 0.0);
    }

    #[test]
    fn total_reward_open_water_composition() {
        let mut p = params();
        p.lambda = 1.0;
        let sweep = far_sweep();
        let r = total_reward(2.0, 0.0, 0.0, 0.0, &sweep, false, 2.0, &p);
        assert!((r - 1.8).abs() < 1e-12, "r = {r}");
    }

    #[test]
    fn reward_floor_bound_away_from_degenerate_lambda() {
        // The collision clamp is only a true per-step lower bound while
        // 1 - lambda carries enough weight; near lambda = 1 the clamp
        // approaches zero and ordinary steps fall below it.
        let mut p = params();
        let mut rng = Rng::seed_from_u64(12);
        let far = far_sweep();
        let near = {
            let mut s = far.clone();
            for d in s.distances.iter_mut() {
                *d = 1.0;
            }
            s
        };
        for _ in 0..2000 {
            p.lambda = rng.uniform(1e-6, 0.99);
            let u = rng.uniform(-2.5, 2.5);
            let v = rng.uniform(-1.0, 1.0);
            let chi = rng.uniform(-std::f64::consts::PI, std::f64::consts::PI);
            let e = rng.uniform(-300.0, 300.0);
            let sweep = if rng.next_f64() < 0.5 { &near } else { &far };
            let r = total_reward(u, v, chi, e, sweep, false, 2.0, &p);
            let clamp = (1.0 - p.lambda) * p.r_collision;
            assert!(r >= clamp, "non-collision reward {r} below clamp {clamp}");
        }
    }

    #[test]
    fn collision_detection_boundaries() {
        let obstacles = [Obstacle::new(0.0, 0.0, 10.0)];
        assert!(detect_collision(Vector2::new(0.0, 0.0), &obstacles, 4.0));
        assert!(detect_collision(Vector2::new(12.0, 0.0), &obstacles, 4.0));
        assert!(!detect_collision(Vector2::new(12.01, 0.0), &obstacles, 4.0));
    }

    fn straight_scenario(obstacles: Vec<Obstacle>) -> Scenario {
        let path = crate::geometry::Path::new(&[[-150.0, 0.0], [150.0, 0.0]]).unwrap();
        Scenario {
            p_start: path.start(),
            p_end: path.end(),
            path,
            obstacles,
            placements: vec![],
            seed: 0,
            gen_params: GenParams::default(),
        }
    }

    fn make_env(obstacles: Vec<Obstacle>, lambda: LambdaMode, seed: u64) -> Env {
        Env::new(
            VesselParams::shipped_defaults(),
            SensorConfig::default(),
            RewardParams::default(),
            EnvConfig::default(),
            ScenarioSource::Fixed(Box::new(straight_scenario(obstacles))),
            lambda,
            seed,
        )
        .unwrap()
    }

    #[test]
    fn reset_is_deterministic_and_on_path() {
        let mut env = make_env(vec![], LambdaMode::Pinned(0.5), 7);
        let a = env.reset().unwrap();
        let b = env.reset().unwrap();
        assert_eq!(a, b);
        assert_eq!(a.cross_track_err, 0.0);
        assert_eq!(a.surge, 0.0);
        assert!((a.log10_lambda - 0.5f64.log10()).abs() < 1e-15);
        assert!(a.closeness.iter().all(|&c| (0.0..=1.0).contains(&c)));
        assert_eq!(a.dim(), 32);
    }

    #[test]
    fn observation_layout_order() {
        let mut env = make_env(vec![], LambdaMode::Pinned(1.0), 3);
        env.reset().unwrap();
        let r = env.step([440.0, 10.0]).unwrap();
        let v = r.observation.to_vec();
        assert_eq!(v.len(), 32);
        assert_eq!(v[0], r.observation.surge);
        assert_eq!(v[1], r.observation.sway);
        assert_eq!(v[2], r.observation.yaw_rate);
        assert_eq!(v[3], r.observation.lookahead_course_err);
        assert_eq!(v[4], r.observation.course_err);
        assert_eq!(v[5], r.observation.cross_track_err);
        assert_eq!(v[6], r.observation.log10_lambda);
        assert_eq!(&v[7..], &r.observation.closeness[..]);
    }

    #[test]
    fn standing_still_reward_composition() {
        let mut env = make_env(vec![], LambdaMode::Pinned(0.5), 1);
        env.reset().unwrap();
        let r = env.step([0.0, 0.0]).unwrap();
        let expected = 0.5 * 1.0 + 0.5 * (-1.0 / 112.5) + (-0.5 * 1.2);
        assert!(
            (r.reward - expected).abs() < 1e-6,
            "reward {} vs expected {expected}",
            r.reward
        );
    }

    #[test]
    fn scripted_run_into_obstacle_collides() {
        // Obstacle dead on the path, 60 m ahead of the start.
        let obstacle = Obstacle::new(-90.0, 0.0, 8.0);
        let mut env = make_env(vec![obstacle], LambdaMode::Pinned(0.5), 2);
        env.reset().unwrap();
        let mut last = None;
        for _ in 0..3000 {
            let r = env.step([440.0, 0.0]).unwrap();
            let done = r.done;
            last = Some(r);
            if done {
                break;
            }
        }
        let last = last.unwrap();
        assert_eq!(last.termination_reason, Some(TerminationReason::Collision));
        assert_eq!(last.reward, 0.5 * -2000.0);

        // The collision step must agree with the analytic crossing of the
        // collision disc (radius + width/2) along the straight approach:
        // one timestep covers at most max_speed * h = 0.28 m.
        let crossing = (last.info.position - Vector2::new(-90.0, 0.0)).norm();
        assert!(
            crossing <= 8.0 + 2.0 + 0.3,
            "first collision step overshoots the disc: {crossing}"
        );
        assert!(crossing >= 8.0 + 2.0 - 0.3, "collision fired early: {crossing}");
    }

    #[test]
    fn reward_floor_triggers_at_first_crossing() {
        let cfg = EnvConfig {
            reward_floor: -5.0,
            ..EnvConfig::default()
        };
        let mut env = Env::new(
            VesselParams::shipped_defaults(),
            SensorConfig::default(),
            RewardParams::default(),
            cfg,
            ScenarioSource::Fixed(Box::new(straight_scenario(vec![]))),
            LambdaMode::Pinned(1.0),
            5,
        )
        .unwrap();
        env.reset().unwrap();
        let mut cumulative = 0.0;
        for step in 1..1000 {
            let r = env.step([0.0, 0.0]).unwrap();
            cumulative += r.reward;
            if cumulative <= -5.0 {
                assert!(r.done, "floor crossed at step {step} without termination");
                assert_eq!(r.termination_reason, Some(TerminationReason::RewardFloor));
                return;
            }
            assert!(!r.done, "terminated before the floor at step {step}");
        }
        panic!("floor never reached");
    }

    #[test]
    fn goal_reached_on_straight_run() {
        let mut env = make_env(vec![], LambdaMode::Pinned(1.0), 8);
        env.reset().unwrap();
        for _ in 0..20_000 {
            let r = env.step([440.0, 0.0]).unwrap();
            if r.done {
                assert_eq!(r.termination_reason, Some(TerminationReason::Goal));
                return;
            }
        }
        panic!("goal never reached on an empty straight path");
    }

    #[test]
    fn step_after_done_is_protocol_error() {
        let cfg = EnvConfig {
            max_episode_steps: 1,
            ..EnvConfig::default()
        };
        let mut env = Env::new(
            VesselParams::shipped_defaults(),
            SensorConfig::default(),
            RewardParams::default(),
            cfg,
            ScenarioSource::Fixed(Box::new(straight_scenario(vec![]))),
            LambdaMode::Pinned(1.0),
            5,
        )
        .unwrap();
        env.reset().unwrap();
        let r = env.step([0.0, 0.0]).unwrap();
        assert_eq!(r.termination_reason, Some(TerminationReason::StepCap));
        assert!(matches!(env.step([0.0, 0.0]), Err(EnvError::StepAfterDone)));
    }

    #[test]
    fn fixed_seeds_reproduce_episodes_bitwise() {
        let run = |seed: u64| -> Vec<f64> {
            let mut env = Env::new(
                VesselParams::shipped_defaults(),
                SensorConfig::default(),
                RewardParams::default(),
                EnvConfig::default(),
                ScenarioSource::Random(GenParams::default()),
                LambdaMode::Sampled,
                seed,
            )
            .unwrap();
            let mut out = Vec::new();
            env.reset().unwrap();
            for i in 0..200 {
                let action = [(i % 7) as f64 * 60.0, ((i % 5) as f64 - 2.0) * 100.0];
                let r = env.step(action).unwrap();
                out.push(r.reward);
                out.extend(r.observation.to_vec());
                if r.done {
                    env.reset().unwrap();
                }
            }
            out
        };
        assert_eq!(run(42), run(42));
    }

    #[test]
    fn trace_recorder_round_trip() {
        let mut env = make_env(vec![], LambdaMode::Pinned(1.0), 5);
        env.reset().unwrap();
        let mut trace = TraceRecorder::new();
        for i in 0..10 {
            let r = env.step([200.0, 0.0]).unwrap();
            trace.record(i as f64 * 0.14, env.state(), &r);
        }
        let csv = trace.to_csv();
        assert_eq!(csv.lines().count(), 11);
        assert!(csv.starts_with("t,x,y,psi,"));
        assert_eq!(trace.len(), 10);
    }
}
