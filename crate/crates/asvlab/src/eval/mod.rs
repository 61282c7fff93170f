//! Batch evaluation of trained policies and the built-in qualitative test
//! scenes.

mod fit;

pub use fit::{fit_csv, fit_curve_csv, lm_fit, FitError, FitResult, TrendModel};

use crate::dynamics::VesselParams;
use crate::env::{
    Env, EnvConfig, EnvError, LambdaMode, RewardParams, ScenarioSource, TerminationReason,
};
use crate::geometry::Path;
use crate::rl::{normalized_to_control, PolicyValueNet};
use crate::scenario::{GenParams, Obstacle, Scenario};
use crate::sensing::SensorConfig;

/// Everything an evaluation needs besides the policy.
#[derive(Debug, Clone)]
pub struct EvalSetup {
    pub vessel: VesselParams,
    pub sensors: SensorConfig,
    pub rewards: RewardParams,
    pub env_cfg: EnvConfig,
    pub source: ScenarioSource,
}

impl EvalSetup {
    pub fn randomized(gen: GenParams) -> Self {
        EvalSetup {
            vessel: VesselParams::shipped_defaults(),
            sensors: SensorConfig::default(),
            rewards: RewardParams::default(),
            env_cfg: EnvConfig::default(),
            source: ScenarioSource::Random(gen),
        }
    }
}

/// Per-episode evaluation record.
#[derive(Debug, Clone)]
pub struct EpisodeRecord {
    pub index: usize,
    pub steps: usize,
    pub reason: TerminationReason,
    pub cumulative_reward: f64,
    /// Time-mean of |e| within this episode.
    pub mean_abs_cross_track: f64,
}

/// Aggregated metrics for one trade-off value.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub lambda: f64,
    pub episodes: usize,
    /// Goal terminations over all episodes.
    pub success_rate: f64,
    /// 95% Wilson interval for the success rate.
    pub success_ci_95: (f64, f64),
    /// Time-average of |e| over every step of every episode.
    pub avg_cross_track_error: f64,
    /// Same average restricted to successful episodes (NaN when none).
    pub avg_cross_track_error_success: f64,
    /// Mean episode duration in seconds (steps x timestep).
    pub avg_episode_length_s: f64,
    /// Episodes cut by the step cap (excluded from the success numerator by
    /// construction, reported for transparency).
    pub cap_terminations: usize,
    pub records: Vec<EpisodeRecord>,
}

fn wilson_interval(successes: f64, n: f64) -> (f64, f64) {
    if n == 0.0 {
        return (0.0, 1.0);
    }
    let z = 1.959963984540054f64;
    let p = successes / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * ((p * (1.0 - p) + z2 / (4.0 * n)) / n).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Rolls `n_episodes` with the deterministic policy (mean action) at a
/// pinned trade-off and aggregates the quantitative metrics.
pub fn run_eval(
    net: &PolicyValueNet,
    lambda: f64,
    n_episodes: usize,
    seed: u64,
    setup: &EvalSetup,
) -> Result<EvalReport, EnvError> {
    let mut env = Env::new(
        setup.vessel.clone(),
        setup.sensors.clone(),
        setup.rewards.clone(),
        setup.env_cfg.clone(),
        setup.source.clone(),
        LambdaMode::Pinned(lambda),
        seed,
    )?;
    let timestep = setup.env_cfg.timestep;

    let mut records = Vec::with_capacity(n_episodes);
    let mut abs_e_sum = 0.0;
    let mut abs_e_sum_success = 0.0;
    let mut steps_total = 0usize;
    let mut steps_success = 0usize;

    for index in 0..n_episodes {
        let mut obs = env.reset()?;
        let mut ep_abs_e = 0.0;
        let reason = loop {
            let action = net.act_mean(&obs.to_vec());
            let control = normalized_to_control(&action, &setup.vessel);
            let r = env.step(control)?;
            ep_abs_e += r.info.cross_track_err.abs();
            obs = r.observation;
            if let Some(reason) = r.termination_reason {
                break reason;
            }
        };
        let steps = env.steps();
        abs_e_sum += ep_abs_e;
        steps_total += steps;
        if reason == TerminationReason::Goal {
            abs_e_sum_success += ep_abs_e;
            steps_success += steps;
        }
        records.push(EpisodeRecord {
            index,
            steps,
            reason,
            cumulative_reward: env.cumulative_reward(),
            mean_abs_cross_track: ep_abs_e / steps.max(1) as f64,
        });
    }

    let successes = records
        .iter()
        .filter(|r| r.reason == TerminationReason::Goal)
        .count();
    let caps = records
        .iter()
        .filter(|r| r.reason == TerminationReason::StepCap)
        .count();
    Ok(EvalReport {
        lambda,
        episodes: n_episodes,
        success_rate: successes as f64 / n_episodes.max(1) as f64,
        success_ci_95: wilson_interval(successes as f64, n_episodes as f64),
        avg_cross_track_error: abs_e_sum / steps_total.max(1) as f64,
        avg_cross_track_error_success: if steps_success > 0 {
            abs_e_sum_success / steps_success as f64
        } else {
            f64::NAN
        },
        avg_episode_length_s: timestep * steps_total as f64 / n_episodes.max(1) as f64,
        cap_terminations: caps,
        records,
    })
}

/// Sweep report CSV: one row per trade-off value.
pub fn report_csv(reports: &[EvalReport]) -> String {
    let mut out = String::from("lambda,episodes,success_rate,avg_cte_m,avg_len_s,avg_cte_success_m\n");
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.lambda,
            r.episodes,
            r.success_rate,
            r.avg_cross_track_error,
            r.avg_episode_length_s,
            r.avg_cross_track_error_success
        ));
    }
    out
}

/// Parses a sweep report back into (lambda, column) points for curve fits.
pub fn parse_report_column(csv: &str, column: &str) -> Result<Vec<(f64, f64)>, String> {
    let mut lines = csv.lines();
    let header = lines.next().ok_or("empty report")?;
    let cols: Vec<&str> = header.split(',').collect();
    let lambda_idx = cols
        .iter()
        .position(|c| *c == "lambda")
        .ok_or("report has no lambda column")?;
    let y_idx = cols
        .iter()
        .position(|c| *c == column)
        .ok_or_else(|| format!("report has no column {column:?}"))?;
    let mut out = Vec::new();
    for (n, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let get = |i: usize| -> Result<f64, String> {
            fields
                .get(i)
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| format!("bad value in row {}", n + 2))
        };
        out.push((get(lambda_idx)?, get(y_idx)?));
    }
    Ok(out)
}

fn hand_built(
    name_seed: u64,
    waypoints: &[[f64; 2]],
    obstacles: Vec<Obstacle>,
    path_length: f64,
) -> Scenario {
    let path = Path::new(waypoints).expect("built-in scenario waypoints are valid");
    let gen_params = GenParams {
        n_obstacles: obstacles.len(),
        path_length,
        ..GenParams::default()
    };
    Scenario {
        p_start: path.start(),
        p_end: path.end(),
        path,
        obstacles,
        placements: vec![],
        seed: name_seed,
        gen_params,
    }
}

/// Four frozen qualitative scenes on a straight west-to-east path:
///
/// - A: one obstacle sitting on the path;
/// - B: an obstacle cluster beside the path that a pure path-follower
///   clears untouched;
/// - C: a wall across the path with a single off-path gap;
/// - D: a dead-end pocket enclosing the path.
pub fn builtin_scenarios() -> [Scenario; 4] {
    let waypoints = [[-150.0, 0.0], [150.0, 0.0]];
    let a = hand_built(
        1,
        &waypoints,
        vec![Obstacle::new(0.0, 0.5, 12.0)],
        300.0,
    );
    let b = hand_built(
        2,
        &waypoints,
        vec![
            Obstacle::new(-30.0, 70.0, 14.0),
            Obstacle::new(0.0, 55.0, 10.0),
            Obstacle::new(25.0, 80.0, 16.0),
            Obstacle::new(55.0, 60.0, 9.0),
            Obstacle::new(-5.0, 95.0, 12.0),
        ],
        300.0,
    );
    let c = hand_built(
        3,
        &waypoints,
        vec![
            Obstacle::new(0.0, -90.0, 14.0),
            Obstacle::new(0.0, -60.0, 14.0),
            Obstacle::new(0.0, -30.0, 14.0),
            Obstacle::new(0.0, 0.0, 14.0),
            Obstacle::new(0.0, 30.0, 14.0),
            // Gap centered at y = 60.
            Obstacle::new(0.0, 90.0, 14.0),
            Obstacle::new(0.0, 120.0, 14.0),
        ],
        300.0,
    );
    let d = hand_built(
        4,
        &waypoints,
        vec![
            // Back wall of the pocket.
            Obstacle::new(30.0, -30.0, 12.0),
            Obstacle::new(30.0, 0.0, 12.0),
            Obstacle::new(30.0, 30.0, 12.0),
            // Side walls running back towards the vessel.
            Obstacle::new(5.0, -45.0, 12.0),
            Obstacle::new(-20.0, -52.0, 12.0),
            Obstacle::new(5.0, 45.0, 12.0),
            Obstacle::new(-20.0, 52.0, 12.0),
        ],
        300.0,
    );
    [a, b, c, d]
}

/// Proportional look-ahead steering at full throttle; used to sanity-check
/// scenes and as a non-learning baseline.
pub fn scripted_controller(course_err: f64, vessel: &VesselParams) -> [f64; 2] {
    let gain = 2000.0;
    [
        vessel.thrust_max,
        (gain * course_err).clamp(vessel.yaw_moment_min, vessel.yaw_moment_max),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rl::FeatureScaling;
    use crate::rng::Rng;
    use crate::scenario;

    fn untrained_net() -> PolicyValueNet {
        let mut rng = Rng::seed_from_u64(1);
        PolicyValueNet::new(
            32,
            2,
            64,
            FeatureScaling::for_observation(2.0, 150.0, 25),
            &mut rng,
        )
    }

    #[test]
    fn smoke_eval_untrained_policy() {
        let net = untrained_net();
        let mut setup = EvalSetup::randomized(GenParams {
            n_obstacles: 4,
            path_length: 120.0,
            mean_radius: 10.0,
            ..GenParams::default()
        });
        setup.env_cfg.max_episode_steps = 400;
        let report = run_eval(&net, 1.0, 20, 9, &setup).unwrap();
        assert_eq!(report.episodes, 20);
        assert_eq!(report.records.len(), 20);
        assert!((0.0..=1.0).contains(&report.success_rate));
        let (lo, hi) = report.success_ci_95;
        assert!(lo <= report.success_rate && report.success_rate <= hi);
        assert!(report.avg_cross_track_error.is_finite());
        assert!(report.avg_episode_length_s > 0.0);
    }

    #[test]
    fn eval_is_deterministic() {
        let net = untrained_net();
        let mut setup = EvalSetup::randomized(GenParams {
            n_obstacles: 3,
            path_length: 100.0,
            mean_radius: 8.0,
            ..GenParams::default()
        });
        setup.env_cfg.max_episode_steps = 300;
        let a = run_eval(&net, 0.1, 5, 33, &setup).unwrap();
        let b = run_eval(&net, 0.1, 5, 33, &setup).unwrap();
        assert_eq!(a.success_rate, b.success_rate);
        assert_eq!(a.avg_cross_track_error, b.avg_cross_track_error);
        assert_eq!(a.avg_episode_length_s, b.avg_episode_length_s);
        for (ra, rb) in a.records.iter().zip(&b.records) {
            assert_eq!(ra.steps, rb.steps);
            assert_eq!(ra.cumulative_reward, rb.cumulative_reward);
        }
    }

    #[test]
    fn same_seed_draws_same_scenarios_across_lambdas() {
        // The scenario stream must not depend on the pinned lambda, so
        // sweeps compare policies on identical scenes.
        let setup = EvalSetup::randomized(GenParams::default());
        let grab = |lambda: f64| {
            let env = Env::new(
                setup.vessel.clone(),
                setup.sensors.clone(),
                setup.rewards.clone(),
                setup.env_cfg.clone(),
                setup.source.clone(),
                LambdaMode::Pinned(lambda),
                77,
            )
            .unwrap();
            scenario::to_string(env.scenario())
        };
        assert_eq!(grab(1.0), grab(1e-4));
    }

    #[test]
    fn builtin_scenario_a_obstacle_on_path() {
        let [a, _, _, _] = builtin_scenarios();
        let o = &a.obstacles[0];
        let mut best = f64::INFINITY;
        for i in 0..=300 {
            let w = a.path.length() * i as f64 / 300.0;
            best = best.min((a.path.point(w) - o.center).norm());
        }
        assert!(best <= 1.0, "obstacle center {best} m from the path");
    }

    #[test]
    fn builtin_scenario_b_clear_for_path_follower() {
        let [_, b, _, _] = builtin_scenarios();
        let vessel = VesselParams::shipped_defaults();
        let mut env = Env::new(
            vessel.clone(),
            SensorConfig::default(),
            RewardParams::default(),
            EnvConfig::default(),
            ScenarioSource::Fixed(Box::new(b)),
            LambdaMode::Pinned(1.0),
            0,
        )
        .unwrap();
        let mut obs = env.reset().unwrap();
        for _ in 0..20_000 {
            let action = scripted_controller(obs.course_err, &vessel);
            let r = env.step(action).unwrap();
            obs = r.observation;
            if let Some(reason) = r.termination_reason {
                assert_eq!(reason, TerminationReason::Goal, "path follower failed scene B");
                return;
            }
        }
        panic!("scene B rollout never terminated");
    }

    #[test]
    fn builtin_scenario_c_wall_blocks_path() {
        let [_, _, c, _] = builtin_scenarios();
        // The naive path follower must hit the wall.
        let vessel = VesselParams::shipped_defaults();
        let mut env = Env::new(
            vessel.clone(),
            SensorConfig::default(),
            RewardParams::default(),
            EnvConfig::default(),
            ScenarioSource::Fixed(Box::new(c)),
            LambdaMode::Pinned(1.0),
            0,
        )
        .unwrap();
        let mut obs = env.reset().unwrap();
        for _ in 0..20_000 {
            let action = scripted_controller(obs.course_err, &vessel);
            let r = env.step(action).unwrap();
            obs = r.observation;
            if let Some(reason) = r.termination_reason {
                assert_eq!(reason, TerminationReason::Collision);
                return;
            }
        }
        panic!("scene C rollout never terminated");
    }

    #[test]
    fn builtin_scenarios_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        for (i, s) in builtin_scenarios().into_iter().enumerate() {
            let path = dir.path().join(format!("scene_{i}.scn"));
            scenario::save(&s, &path).unwrap();
            let loaded = scenario::load(&path).unwrap();
            assert_eq!(s, loaded);
        }
    }

    #[test]
    fn report_csv_round_trip() {
        let report = EvalReport {
            lambda: 0.5,
            episodes: 10,
            success_rate: 0.8,
            success_ci_95: (0.49, 0.94),
            avg_cross_track_error: 21.5,
            avg_cross_track_error_success: 19.75,
            avg_episode_length_s: 310.0,
            cap_terminations: 0,
            records: vec![],
        };
        let csv = report_csv(std::slice::from_ref(&report));
        assert_eq!(csv.lines().count(), 2);
        let pts = parse_report_column(&csv, "success_rate").unwrap();
        assert_eq!(pts, vec![(0.5, 0.8)]);
        let cte = parse_report_column(&csv, "avg_cte_m").unwrap();
        assert_eq!(cte, vec![(0.5, 21.5)]);
        // Header-only output parses to an empty series.
        let empty = report_csv(&[]);
        assert_eq!(empty.lines().count(), 1);
        assert!(parse_report_column(&empty, "avg_cte_m").unwrap().is_empty());
    }
}
