//! Bridges the vessel environment into the trainer's environment trait.
//!
//! The policy acts in a normalized `[-1, 1]^2` box; the adapter maps that
//! affinely onto the actuator ranges before stepping the simulator, while
//! log probabilities stay defined on the unclipped policy output.

use super::ppo::{TrainEnv, TrainStep};
use crate::dynamics::VesselParams;
use crate::env::{Env, EnvError, TerminationReason};

/// Affine map from a normalized action to `[thrust, yaw_moment]`; the
/// normalized input is clipped to the box first.
pub fn normalized_to_control(action: &[f64], p: &VesselParams) -> [f64; 2] {
    let unit = |a: f64| 0.5 * (a.clamp(-1.0, 1.0) + 1.0);
    [
        p.thrust_min + unit(action[0]) * (p.thrust_max - p.thrust_min),
        p.yaw_moment_min + unit(action[1]) * (p.yaw_moment_max - p.yaw_moment_min),
    ]
}

/// Trainer-facing wrapper around one [`Env`].
#[derive(Debug)]
pub struct VesselTrainEnv {
    env: Env,
}

impl VesselTrainEnv {
    pub fn new(env: Env) -> Self {
        VesselTrainEnv { env }
    }

    pub fn env(&self) -> &Env {
        &self.env
    }

    pub fn env_mut(&mut self) -> &mut Env {
        &mut self.env
    }
}

impl TrainEnv for VesselTrainEnv {
    fn obs_dim(&self) -> usize {
        self.env.obs_dim()
    }

    fn action_dim(&self) -> usize {
        2
    }

    fn reset(&mut self) -> Result<Vec<f64>, String> {
        self.env
            .reset()
            .map(|o| o.to_vec())
            .map_err(|e| e.to_string())
    }

    fn step(&mut self, action: &[f64]) -> Result<TrainStep, String> {
        let control = normalized_to_control(action, self.env.vessel_params());
        match self.env.step(control) {
            Ok(r) => Ok(TrainStep {
                obs: r.observation.to_vec(),
                reward: r.reward,
                done: r.done,
                goal: r.termination_reason == Some(TerminationReason::Goal),
            }),
            Err(EnvError::StepAfterDone) => Err("step after episode end".into()),
            Err(e) => Err(e.to_string()),
        }
    }
}
