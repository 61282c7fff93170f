//! Clipped-surrogate policy optimization: loss, exact gradients, Adam and
//! the rollout/update loop.

use thiserror::Error;

use super::net::{entropy, log_prob, sample_action, PolicyValueNet, LOG_STD_MAX, LOG_STD_MIN};
use super::{compute_gae, PPOConfig};
use crate::rng::Rng;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite loss at iteration {iteration}, epoch {epoch}, minibatch {minibatch}: {detail}")]
    NonFiniteLoss {
        iteration: u64,
        epoch: usize,
        minibatch: usize,
        detail: String,
    },
    #[error("environment failure: {0}")]
    Env(String),
}

/// One environment as seen by the trainer. Implementations own their reset
/// logic; actions arrive in the policy's native (unclipped) space.
pub trait TrainEnv: Send {
    fn obs_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    fn reset(&mut self) -> Result<Vec<f64>, String>;
    fn step(&mut self, action: &[f64]) -> Result<TrainStep, String>;
}

/// Transition returned by a [`TrainEnv`].
#[derive(Debug, Clone)]
pub struct TrainStep {
    pub obs: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    /// Episode ended by reaching its goal (drives the success metric).
    pub goal: bool,
}

/// Update batch. Observations are stored already feature-scaled.
#[derive(Debug, Clone, Default)]
pub struct Minibatch {
    pub obs: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub old_log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl Minibatch {
    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }
}

/// Loss decomposition of one evaluation.
#[derive(Debug, Clone, Copy)]
pub struct LossReport {
    pub total: f64,
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
}

/// The pessimistic per-sample surrogate `min(r A, clip(r) A)`.
pub fn clipped_surrogate_term(ratio: f64, advantage: f64, clip_eps: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps);
    (ratio * advantage).min(clipped * advantage)
}

/// Computes the composite loss
/// `-surrogate + c1 * value_mse - c2 * entropy` over one minibatch and,
/// when `grads` is given, accumulates its exact gradient in the canonical
/// flat layout.
pub fn evaluate_loss(
    net: &PolicyValueNet,
    batch: &Minibatch,
    cfg: &PPOConfig,
    mut grads: Option<&mut [f64]>,
) -> LossReport {
    let b = batch.len();
    assert!(b > 0, "empty minibatch");
    if let Some(g) = grads.as_deref_mut() {
        assert_eq!(g.len(), net.param_count());
        g.fill(0.0);
    }

    // Advantage normalization constants are data, not parameters.
    let advantages: Vec<f64> = if cfg.normalize_advantages {
        let mean = batch.advantages.iter().sum::<f64>() / b as f64;
        let var = batch
            .advantages
            .iter()
            .map(|a| (a - mean) * (a - mean))
            .sum::<f64>()
            / b as f64;
        let std = var.sqrt();
        batch
            .advantages
            .iter()
            .map(|a| (a - mean) / (std + 1e-8))
            .collect()
    } else {
        batch.advantages.clone()
    };

    let inv_b = 1.0 / b as f64;
    let log_std_off = net.log_std_offset();
    let value_off = net.value_offset();
    let policy_count = net.policy.param_count();
    let value_count = net.value.param_count();

    let mut surrogate = 0.0;
    let mut value_mse = 0.0;
    let mut kl_sum = 0.0;
    let mut clipped_count = 0usize;

    for i in 0..b {
        let obs = &batch.obs[i];
        let action = &batch.actions[i];
        let policy_acts = net.policy.forward(obs);
        let means = policy_acts.last().unwrap().clone();
        let logp = log_prob(action, &means, &net.log_std);
        let ratio = (logp - batch.old_log_probs[i]).exp();
        let adv = advantages[i];
        let unclipped = ratio * adv;
        let clipped = ratio.clamp(1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps) * adv;
        surrogate += unclipped.min(clipped);
        if (ratio - 1.0).abs() > cfg.clip_eps {
            clipped_count += 1;
        }
        kl_sum += batch.old_log_probs[i] - logp;

        let value_acts = net.value.forward(obs);
        let v = value_acts.last().unwrap()[0];
        let v_err = v - batch.returns[i];
        value_mse += v_err * v_err;

        if let Some(g) = grads.as_deref_mut() {
            // d(-surrogate)/d(logp): the clipped branch is flat in the
            // parameters whenever it is strictly selected.
            let d_logp = if unclipped <= clipped { -inv_b * unclipped } else { 0.0 };
            if d_logp != 0.0 {
                let mut out_grad = vec![0.0; net.act_dim];
                for j in 0..net.act_dim {
                    let sigma = net.log_std[j].exp();
                    let z = (action[j] - means[j]) / sigma;
                    out_grad[j] = d_logp * (z / sigma);
                    g[log_std_off + j] += d_logp * (z * z - 1.0);
                }
                net.policy.backward(&policy_acts, &out_grad, &mut g[..policy_count]);
            }
            let dv = cfg.c1 * 2.0 * v_err * inv_b;
            net.value
                .backward(&value_acts, &[dv], &mut g[value_off..value_off + value_count]);
        }
    }

    let ent = entropy(&net.log_std);
    if let Some(g) = grads.as_deref_mut() {
        for j in 0..net.act_dim {
            g[log_std_off + j] -= cfg.c2;
        }
    }

    let policy_loss = -surrogate * inv_b;
    let value_loss = value_mse * inv_b;
    LossReport {
        total: policy_loss + cfg.c1 * value_loss - cfg.c2 * ent,
        policy: policy_loss,
        value: value_loss,
        entropy: ent,
        approx_kl: kl_sum * inv_b,
        clip_fraction: clipped_count as f64 * inv_b,
    }
}

/// First/second-moment adaptive optimizer with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Adam {
    pub fn new(n_params: usize) -> Self {
        Adam {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for k in 0..params.len() {
            let g = grads[k];
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g;
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[k] / bc1;
            let v_hat = self.v[k] / bc2;
            params[k] -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Per-iteration training metrics.
#[derive(Debug, Clone, Copy)]
pub struct IterationStats {
    pub iteration: u64,
    pub total_steps: u64,
    pub episodes: usize,
    pub mean_episode_reward: f64,
    pub success_rate: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
}

pub fn metrics_csv_header() -> &'static str {
    "iteration,steps,mean_reward,success_rate,policy_loss,value_loss,entropy,kl_estimate\n"
}

pub fn metrics_csv_row(s: &IterationStats) -> String {
    format!(
        "{},{},{},{},{},{},{},{}\n",
        s.iteration,
        s.total_steps,
        s.mean_episode_reward,
        s.success_rate,
        s.policy_loss,
        s.value_loss,
        s.entropy,
        s.approx_kl
    )
}

struct WorkerRollout {
    scaled_obs: Vec<Vec<f64>>,
    actions: Vec<Vec<f64>>,
    log_probs: Vec<f64>,
    rewards: Vec<f64>,
    dones: Vec<bool>,
    /// T + 1 entries including the bootstrap value.
    values: Vec<f64>,
    episodes: Vec<EpisodeStat>,
}

#[derive(Debug, Clone, Copy)]
struct EpisodeStat {
    ret: f64,
    goal: bool,
}

fn rollout_worker<E: TrainEnv>(
    net: &PolicyValueNet,
    env: &mut E,
    rng: &mut Rng,
    current_obs: &mut Vec<f64>,
    episode_return: &mut f64,
    t_len: usize,
) -> Result<WorkerRollout, String> {
    let mut out = WorkerRollout {
        scaled_obs: Vec::with_capacity(t_len),
        actions: Vec::with_capacity(t_len),
        log_probs: Vec::with_capacity(t_len),
        rewards: Vec::with_capacity(t_len),
        dones: Vec::with_capacity(t_len),
        values: Vec::with_capacity(t_len + 1),
        episodes: Vec::new(),
    };
    for _ in 0..t_len {
        let scaled = net.scale_obs(current_obs);
        let means = net.policy.output(&scaled);
        let (action, logp) = sample_action(&means, &net.log_std, rng);
        let value = net.value.output(&scaled)[0];
        let step = env.step(&action)?;

        out.scaled_obs.push(scaled);
        out.actions.push(action);
        out.log_probs.push(logp);
        out.rewards.push(step.reward);
        out.dones.push(step.done);
        out.values.push(value);
        *episode_return += step.reward;

        if step.done {
            out.episodes.push(EpisodeStat {
                ret: *episode_return,
                goal: step.goal,
            });
            *episode_return = 0.0;
            *current_obs = env.reset()?;
        } else {
            *current_obs = step.obs;
        }
    }
    out.values.push(net.value.output(&net.scale_obs(current_obs))[0]);
    Ok(out)
}

/// Owns the policy, optimizer and worker environments; drives the
/// collect/update cycle.
pub struct Trainer<E: TrainEnv> {
    pub net: PolicyValueNet,
    pub opt: Adam,
    pub cfg: PPOConfig,
    pub steps_done: u64,
    pub iteration: u64,
    envs: Vec<E>,
    worker_rngs: Vec<Rng>,
    update_rng: Rng,
    current_obs: Vec<Vec<f64>>,
    episode_returns: Vec<f64>,
}

impl<E: TrainEnv> Trainer<E> {
    /// Fresh trainer over `cfg.n_workers` environments.
    pub fn new(
        mut envs: Vec<E>,
        cfg: PPOConfig,
        scaling: super::FeatureScaling,
        seed: u64,
    ) -> Result<Self, TrainError> {
        cfg.validate()?;
        if envs.len() != cfg.n_workers {
            return Err(TrainError::InvalidConfig(format!(
                "expected {} environments, got {}",
                cfg.n_workers,
                envs.len()
            )));
        }
        let obs_dim = envs[0].obs_dim();
        let act_dim = envs[0].action_dim();
        let master = Rng::seed_from_u64(seed);
        let net = PolicyValueNet::new(obs_dim, act_dim, 64, scaling, &mut master.derive_stream(0));
        let opt = Adam::new(net.param_count());
        let worker_rngs = (0..envs.len())
            .map(|i| master.derive_stream(100 + i as u64))
            .collect();
        let mut current_obs = Vec::with_capacity(envs.len());
        for env in envs.iter_mut() {
            current_obs.push(env.reset().map_err(TrainError::Env)?);
        }
        let n = envs.len();
        Ok(Trainer {
            net,
            opt,
            cfg,
            steps_done: 0,
            iteration: 0,
            envs,
            worker_rngs,
            update_rng: master.derive_stream(1),
            current_obs,
            episode_returns: vec![0.0; n],
        })
    }

    /// Resumes from checkpointed network/optimizer state.
    pub fn resume(
        mut envs: Vec<E>,
        cfg: PPOConfig,
        net: PolicyValueNet,
        opt: Adam,
        steps_done: u64,
        iteration: u64,
        seed: u64,
    ) -> Result<Self, TrainError> {
        cfg.validate()?;
        if envs.len() != cfg.n_workers {
            return Err(TrainError::InvalidConfig(format!(
                "expected {} environments, got {}",
                cfg.n_workers,
                envs.len()
            )));
        }
        if opt.m.len() != net.param_count() {
            return Err(TrainError::InvalidConfig(
                "optimizer state does not match the network".into(),
            ));
        }
        let master = Rng::seed_from_u64(seed);
        let worker_rngs = (0..envs.len())
            .map(|i| master.derive_stream(100 + i as u64))
            .collect();
        let mut current_obs = Vec::with_capacity(envs.len());
        for env in envs.iter_mut() {
            current_obs.push(env.reset().map_err(TrainError::Env)?);
        }
        let n = envs.len();
        Ok(Trainer {
            net,
            opt,
            cfg,
            steps_done,
            iteration,
            envs,
            worker_rngs,
            update_rng: master.derive_stream(1),
            current_obs,
            episode_returns: vec![0.0; n],
        })
    }

    /// One collect/update cycle over all workers.
    pub fn run_iteration(&mut self) -> Result<IterationStats, TrainError> {
        let t_len = self.cfg.rollout_len;
        let net = &self.net;
        let rollouts: Vec<WorkerRollout> = std::thread::scope(|scope| {
            let handles: Vec<_> = self
                .envs
                .iter_mut()
                .zip(self.worker_rngs.iter_mut())
                .zip(self.current_obs.iter_mut())
                .zip(self.episode_returns.iter_mut())
                .map(|(((env, rng), obs), ep_ret)| {
                    scope.spawn(move || rollout_worker(net, env, rng, obs, ep_ret, t_len))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("rollout worker panicked"))
                .collect::<Result<Vec<_>, String>>()
        })
        .map_err(TrainError::Env)?;

        // Pool advantages worker by worker (order-stable aggregation).
        let mut pool = Minibatch::default();
        let mut episodes = Vec::new();
        for r in rollouts {
            let (adv, ret) = compute_gae(&r.rewards, &r.values, &r.dones, self.cfg.gamma, self.cfg.gae_lambda);
            pool.obs.extend(r.scaled_obs);
            pool.actions.extend(r.actions);
            pool.old_log_probs.extend(r.log_probs);
            pool.advantages.extend(adv);
            pool.returns.extend(ret);
            episodes.extend(r.episodes);
        }
        let b = pool.len();
        self.steps_done += b as u64;
        self.iteration += 1;

        let mut flat = self.net.flatten();
        let mut grads = vec![0.0; flat.len()];
        let mut indices: Vec<usize> = (0..b).collect();
        let mut policy_loss_acc = 0.0;
        let mut value_loss_acc = 0.0;
        let mut entropy_acc = 0.0;
        let mut kl_acc = 0.0;
        let mut updates = 0usize;

        for epoch in 0..self.cfg.n_epochs {
            shuffle(&mut indices, &mut self.update_rng);
            for (mb_idx, chunk) in indices.chunks_exact(self.cfg.minibatch_size).enumerate() {
                let mb = gather(&pool, chunk);
                let report = evaluate_loss(&self.net, &mb, &self.cfg, Some(&mut grads));
                if !report.total.is_finite() {
                    return Err(TrainError::NonFiniteLoss {
                        iteration: self.iteration,
                        epoch,
                        minibatch: mb_idx,
                        detail: describe_minibatch(&mb),
                    });
                }
                self.opt.step(&mut flat, &grads, self.cfg.learning_rate);
                let ls_off = self.net.log_std_offset();
                for k in ls_off..ls_off + self.net.act_dim {
                    flat[k] = flat[k].clamp(LOG_STD_MIN, LOG_STD_MAX);
                }
                self.net.load_flat(&flat);
                policy_loss_acc += report.policy;
                value_loss_acc += report.value;
                entropy_acc += report.entropy;
                kl_acc += report.approx_kl;
                updates += 1;
            }
        }

        let n_updates = updates.max(1) as f64;
        let n_eps = episodes.len();
        let stats = IterationStats {
            iteration: self.iteration,
            total_steps: self.steps_done,
            episodes: n_eps,
            mean_episode_reward: if n_eps > 0 {
                episodes.iter().map(|e| e.ret).sum::<f64>() / n_eps as f64
            } else {
                f64::NAN
            },
            success_rate: if n_eps > 0 {
                episodes.iter().filter(|e| e.goal).count() as f64 / n_eps as f64
            } else {
                f64::NAN
            },
            policy_loss: policy_loss_acc / n_updates,
            value_loss: value_loss_acc / n_updates,
            entropy: entropy_acc / n_updates,
            approx_kl: kl_acc / n_updates,
        };
        Ok(stats)
    }

    /// Runs iterations until `total_steps` have been simulated, invoking
    /// `on_iteration` after each cycle (checkpointing, logging).
    pub fn run_until(
        &mut self,
        total_steps: u64,
        mut on_iteration: impl FnMut(&Self, &IterationStats) -> Result<(), TrainError>,
    ) -> Result<(), TrainError> {
        while self.steps_done < total_steps {
            let stats = self.run_iteration()?;
            on_iteration(self, &stats)?;
        }
        Ok(())
    }
}

fn gather(pool: &Minibatch, indices: &[usize]) -> Minibatch {
    Minibatch {
        obs: indices.iter().map(|&i| pool.obs[i].clone()).collect(),
        actions: indices.iter().map(|&i| pool.actions[i].clone()).collect(),
        old_log_probs: indices.iter().map(|&i| pool.old_log_probs[i]).collect(),
        advantages: indices.iter().map(|&i| pool.advantages[i]).collect(),
        returns: indices.iter().map(|&i| pool.returns[i]).collect(),
    }
}

fn shuffle(indices: &mut [usize], rng: &mut Rng) {
    for i in (1..indices.len()).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        indices.swap(i, j);
    }
}

fn describe_minibatch(mb: &Minibatch) -> String {
    let span = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        format!("[{lo:.3e}, {hi:.3e}]")
    };
    let obs_flat: Vec<f64> = mb.obs.iter().flatten().copied().collect();
    format!(
        "{} samples; obs {}, advantages {}, returns {}, old_log_probs {}",
        mb.len(),
        span(&obs_flat),
        span(&mb.advantages),
        span(&mb.returns),
        span(&mb.old_log_probs)
    )
}
