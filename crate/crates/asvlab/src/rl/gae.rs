//! Generalized advantage estimation over fixed-length rollouts.

/// Computes advantages and value targets from one rollout segment.
///
/// `values` holds `T + 1` entries: the estimate for every visited state plus
/// the bootstrap for the state after the last step. A set `dones[t]` cuts
/// both the TD residual and the accumulation at step `t` (the episode ended
/// there, so nothing after it leaks in and the bootstrap is zero).
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    gamma: f64,
    gae_lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let t_len = rewards.len();
    assert_eq!(values.len(), t_len + 1, "values must include the bootstrap entry");
    assert_eq!(dones.len(), t_len);
    let mut advantages = vec![0.0; t_len];
    let mut carry = 0.0;
    for t in (0..t_len).rev() {
        let mask = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * mask * values[t + 1] - values[t];
        carry = delta + gamma * gae_lambda * mask * carry;
        advantages[t] = carry;
    }
    let returns = advantages
        .iter()
        .zip(values)
        .map(|(a, v)| a + v)
        .collect();
    (advantages, returns)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    /// Direct double-sum reference: advantage at `t` is the discounted sum
    /// of TD residuals up to the end of the episode containing `t`.
    pub fn gae_oracle(
        rewards: &[f64],
        values: &[f64],
        dones: &[bool],
        gamma: f64,
        lam: f64,
    ) -> Vec<f64> {
        let t_len = rewards.len();
        let delta = |t: usize| {
            let next = if dones[t] { 0.0 } else { values[t + 1] };
            rewards[t] + gamma * next - values[t]
        };
        (0..t_len)
            .map(|t| {
                let mut acc = 0.0;
                let mut weight = 1.0;
                for l in t..t_len {
                    acc += weight * delta(l);
                    if dones[l] {
                        break;
                    }
                    weight *= gamma * lam;
                }
                acc
            })
            .collect()
    }

    #[test]
    fn lambda_zero_gives_td_residuals() {
        let rewards = [1.0, -0.5, 2.0];
        let values = [0.3, 0.6, -0.1, 0.9];
        let dones = [false, false, false];
        let (adv, _) = compute_gae(&rewards, &values, &dones, 0.99, 0.0);
        for t in 0..3 {
            let delta = rewards[t] + 0.99 * values[t + 1] - values[t];
            assert!((adv[t] - delta).abs() < 1e-15, "t={t}");
        }
    }

    #[test]
    fn lambda_one_zero_values_gives_reward_to_go() {
        let rewards = [1.0, 2.0, 3.0, 4.0];
        let values = [0.0; 5];
        let dones = [false; 4];
        let gamma = 0.9;
        let (adv, returns) = compute_gae(&rewards, &values, &dones, gamma, 1.0);
        let mut expected = vec![0.0; 4];
        for t in (0..4).rev() {
            expected[t] = rewards[t] + if t + 1 < 4 { gamma * expected[t + 1] } else { 0.0 };
        }
        for t in 0..4 {
            assert!((adv[t] - expected[t]).abs() < 1e-12);
            assert!((returns[t] - expected[t]).abs() < 1e-12);
        }
    }

    #[test]
    fn dones_cut_the_accumulation() {
        let rewards = [1.0, 1.0, 1.0, 1.0];
        let values = [0.5, 0.5, 0.5, 0.5, 0.5];
        let dones = [false, true, false, false];
        let (adv, _) = compute_gae(&rewards, &values, &dones, 0.99, 0.95);
        // Step 1 ends an episode: its advantage sees no bootstrap and step 0
        // must not see past step 1.
        let d1 = 1.0 - 0.5;
        let d0 = 1.0 + 0.99 * 0.5 - 0.5;
        assert!((adv[1] - d1).abs() < 1e-15);
        assert!((adv[0] - (d0 + 0.99 * 0.95 * d1)).abs() < 1e-15);
    }

    #[test]
    fn matches_double_sum_oracle_on_random_trajectories() {
        let mut rng = Rng::seed_from_u64(404);
        for _ in 0..300 {
            let t_len = 1 + (rng.next_u64() % 100) as usize;
            let rewards: Vec<f64> = (0..t_len).map(|_| rng.uniform(-5.0, 5.0)).collect();
            let values: Vec<f64> = (0..=t_len).map(|_| rng.uniform(-5.0, 5.0)).collect();
            let dones: Vec<bool> = (0..t_len).map(|_| rng.next_f64() < 0.1).collect();
            let gamma = rng.uniform(0.9, 1.0);
            let lam = rng.uniform(0.0, 1.0);
            let (adv, returns) = compute_gae(&rewards, &values, &dones, gamma, lam);
            let oracle = gae_oracle(&rewards, &values, &dones, gamma, lam);
            for t in 0..t_len {
                assert!(
                    (adv[t] - oracle[t]).abs() < 1e-10,
                    "t={t}: {} vs {}",
                    adv[t],
                    oracle[t]
                );
                assert!((returns[t] - (oracle[t] + values[t])).abs() < 1e-10);
            }
        }
    }
}
