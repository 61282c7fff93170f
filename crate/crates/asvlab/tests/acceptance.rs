//! Acceptance suite: one test per release criterion, each printing a
//! PASS line with the measured quantities (run with `--nocapture` to see
//! them).

use std::time::Instant;

use asvlab::dynamics::{rkf45_step, step_rkf45, ControlInput, VesselParams, VesselState};
use asvlab::env::{reward_exists, reward_pf, sample_lambda, RewardParams};
use asvlab::eval::{lm_fit, TrendModel};
use asvlab::rl::{
    compute_gae, evaluate_loss, sample_action, FeatureScaling, Minibatch, PPOConfig,
    PolicyValueNet,
};
use asvlab::rng::Rng;
use asvlab::scenario::{generate, GenParams};
use asvlab::sensing::{feasibility_pool, max_pool, min_pool, SensorConfig};

/// Independent feasibility reference: enumerate every level without early
/// exit, collect maximal runs of readings above the level explicitly, and
/// measure each opening as `(run_length + 1) * ray_spacing * level`.
fn feasibility_reference(sector: &[f64], cfg: &SensorConfig) -> f64 {
    let theta = cfg.ray_spacing();
    let mut levels: Vec<f64> = sector.to_vec();
    levels.sort_by(f64::total_cmp);
    for &level in &levels {
        let arc = theta * level;
        let mut runs: Vec<usize> = Vec::new();
        let mut current = 0usize;
        for &x in sector {
            if x > level {
                current += 1;
            } else if current > 0 {
                runs.push(current);
                current = 0;
            }
        }
        if current > 0 {
            runs.push(current);
        }
        if !runs.iter().any(|&len| (len + 1) as f64 * arc > cfg.vessel_width) {
            return level;
        }
    }
    cfg.max_range
}

#[test]
fn acceptance_01_feasibility_pooling_oracle_equivalence() {
    let cfg = SensorConfig::default();
    assert_eq!(cfg.rays_per_sector(), 9);
    let mut rng = Rng::seed_from_u64(101);
    let start = Instant::now();
    for i in 0..100_000 {
        let sector: Vec<f64> = (0..9).map(|_| rng.uniform(0.0, 150.0)).collect();
        let fast = feasibility_pool(&sector, &cfg);
        let reference = feasibility_reference(&sector, &cfg);
        assert!(
            fast == reference,
            "sector {i} disagrees: {fast} vs {reference} on {sector:?}"
        );
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}, budget 30 s");
    println!(
        "ACCEPTANCE 01 (feasibility oracle equivalence): PASS — 100000 sectors bitwise equal in {elapsed:?}"
    );
}

#[test]
fn acceptance_02_pooling_ordering() {
    let cfg = SensorConfig::default();
    let mut rng = Rng::seed_from_u64(202);
    let mut violations = 0usize;
    for _ in 0..100_000 {
        let sector: Vec<f64> = (0..9).map(|_| rng.uniform(0.0, 150.0)).collect();
        let lo = min_pool(&sector);
        let mid = feasibility_pool(&sector, &cfg);
        let hi = max_pool(&sector);
        if !(lo <= mid && mid <= hi) {
            violations += 1;
        }
    }
    assert_eq!(violations, 0);
    println!("ACCEPTANCE 02 (pooling ordering): PASS — 100000 sectors, 0 violations");
}

#[test]
fn acceptance_03_gradient_check() {
    let start = Instant::now();
    let mut rng = Rng::seed_from_u64(303);
    let scaling = FeatureScaling::for_observation(2.0, 150.0, 25);
    let net = PolicyValueNet::new(32, 2, 64, scaling, &mut rng);
    let cfg = PPOConfig::default();
    let n_params = net.param_count();
    let mut worst = 0.0f64;

    for mb_index in 0..10 {
        // Random minibatch: ratios spread around one like an early epoch.
        let mut mb = Minibatch::default();
        for _ in 0..16 {
            let raw: Vec<f64> = (0..32).map(|_| rng.uniform(-2.0, 2.0)).collect();
            let obs = net.scale_obs(&raw);
            let means = net.policy.output(&obs);
            let (action, logp) = sample_action(&means, &net.log_std, &mut rng);
            mb.obs.push(obs);
            mb.actions.push(action);
            mb.old_log_probs.push(logp + rng.gaussian(0.0, 0.1));
            mb.advantages.push(rng.gaussian(0.0, 1.0));
            mb.returns.push(rng.gaussian(0.0, 2.0));
        }
        let mut grads = vec![0.0; n_params];
        evaluate_loss(&net, &mb, &cfg, Some(&mut grads));

        let flat = net.flatten();
        let h = 1e-5;
        let mut probe = net.clone();
        let mut fp = flat.clone();
        for k in 0..n_params {
            fp[k] = flat[k] + h;
            probe.load_flat(&fp);
            let lp = evaluate_loss(&probe, &mb, &cfg, None).total;
            fp[k] = flat[k] - h;
            probe.load_flat(&fp);
            let lm = evaluate_loss(&probe, &mb, &cfg, None).total;
            fp[k] = flat[k];
            let fd = (lp - lm) / (2.0 * h);
            let rel = (grads[k] - fd).abs() / grads[k].abs().max(fd.abs()).max(1e-6);
            assert!(
                rel < 1e-4,
                "minibatch {mb_index}, parameter {k}: analytic {} vs fd {fd} (rel {rel})",
                grads[k]
            );
            worst = worst.max(rel);
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 120.0, "took {elapsed:?}, budget 2 min");
    println!(
        "ACCEPTANCE 03 (gradient check): PASS — {n_params} parameters x 10 minibatches, worst rel err {worst:.2e}, {elapsed:?}"
    );
}

/// Direct double-sum GAE reference.
fn gae_reference(rewards: &[f64], values: &[f64], dones: &[bool], gamma: f64, lam: f64) -> Vec<f64> {
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
fn acceptance_04_gae_oracle() {
    let mut rng = Rng::seed_from_u64(404);
    let mut max_err = 0.0f64;
    for _ in 0..1000 {
        let t_len = 1 + (rng.next_u64() % 100) as usize;
        let rewards: Vec<f64> = (0..t_len).map(|_| rng.uniform(-5.0, 5.0)).collect();
        let values: Vec<f64> = (0..=t_len).map(|_| rng.uniform(-5.0, 5.0)).collect();
        let dones: Vec<bool> = (0..t_len).map(|_| rng.next_f64() < 0.15).collect();
        let gamma = rng.uniform(0.9, 1.0);
        let lam = rng.uniform(0.0, 1.0);
        let (adv, _) = compute_gae(&rewards, &values, &dones, gamma, lam);
        let reference = gae_reference(&rewards, &values, &dones, gamma, lam);
        for t in 0..t_len {
            max_err = max_err.max((adv[t] - reference[t]).abs());
        }
    }
    assert!(max_err < 1e-10, "max abs error {max_err}");
    println!("ACCEPTANCE 04 (GAE oracle): PASS — 1000 trajectories, max abs err {max_err:.2e}");
}

#[test]
fn acceptance_05_dynamics_order_and_energy() {
    // Convergence order on an analytic linear system: y' = -y, y(0) = 1.
    let rhs = |y: &nalgebra::Vector6<f64>| -y;
    let exact = (-1.0f64).exp();
    let mut errors = Vec::new();
    for h in [0.2f64, 0.1, 0.05] {
        let steps = (1.0 / h).round() as usize;
        let mut y = nalgebra::Vector6::repeat(1.0);
        for _ in 0..steps {
            y = rkf45_step(rhs, &y, h).unwrap();
        }
        errors.push((y[0] - exact).abs());
    }
    let order_a = (errors[0] / errors[1]).log2();
    let order_b = (errors[1] / errors[2]).log2();
    assert!(order_a >= 4.5, "observed order {order_a}");
    assert!(order_b >= 4.5, "observed order {order_b}");

    // Energy conservation: shipped inertia, damping zeroed, zero input.
    let mut p = VesselParams::shipped_defaults();
    p.damping_linear = nalgebra::Matrix3::zeros();
    p.damping_quadratic = nalgebra::Vector3::zeros();
    let mut s = VesselState::new(0.0, 0.0, 0.0, 1.2, 0.5, 0.25);
    let e0 = p.kinetic_energy(&s.nu());
    for _ in 0..100 {
        s = step_rkf45(&s, &ControlInput::zero(), &p, 0.14).unwrap();
    }
    let drift = (p.kinetic_energy(&s.nu()) - e0).abs() / e0;
    assert!(drift < 1e-8, "relative energy drift {drift}");
    println!(
        "ACCEPTANCE 05 (integrator): PASS — convergence orders {order_a:.2}/{order_b:.2}, energy drift {drift:.2e}"
    );
}

#[test]
fn acceptance_06_reward_calibration_identity() {
    let mut params = RewardParams::default();
    let u_max = 2.0;
    assert_eq!(reward_pf(u_max, 0.0, 0.0, 0.0, u_max, &params), 3.0);
    assert_eq!(reward_pf(0.0, 0.0, 0.0, 0.0, u_max, &params), 1.0);
    let mut rng = Rng::seed_from_u64(606);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        params.lambda = rng.uniform(1e-9, 1.0);
        let residual = params.lambda
            * reward_pf(params.alpha_r * u_max, 0.0, 0.0, 0.0, u_max, &params)
            + reward_exists(&params);
        worst = worst.max(residual.abs());
    }
    assert!(worst < 1e-12, "worst residual {worst}");
    println!("ACCEPTANCE 06 (reward calibration): PASS — r_pf anchors exact, worst identity residual {worst:.2e}");
}

#[test]
fn acceptance_07_scenario_statistics() {
    let params = GenParams::default();
    let mut radius_sum = 0.0;
    let mut radius_count = 0usize;
    let mut offsets: Vec<f64> = Vec::with_capacity(200_000);
    for seed in 0..10_000u64 {
        let s = generate(&params, seed).unwrap();
        assert_eq!(s.obstacles.len(), 20, "seed {seed} obstacle count");
        // |p_start| = L_p / 2 exactly, up to the f64 rounding of cos/sin.
        let norm_err = (s.p_start.norm() - 200.0).abs();
        assert!(norm_err < 1e-12, "seed {seed}: |p_start| off by {norm_err}");
        radius_sum += s.obstacles.iter().map(|o| o.radius).sum::<f64>();
        radius_count += s.obstacles.len();
        offsets.extend(s.placements.iter().map(|p| p.lateral_offset));
    }
    let mean_radius = radius_sum / radius_count as f64;
    assert!(
        (mean_radius - 30.0).abs() < 1.0,
        "sample mean radius {mean_radius}"
    );
    let mean_offset = offsets.iter().sum::<f64>() / offsets.len() as f64;
    let var = offsets
        .iter()
        .map(|o| (o - mean_offset) * (o - mean_offset))
        .sum::<f64>()
        / (offsets.len() - 1) as f64;
    let std = var.sqrt();
    assert!((std - 150.0).abs() < 3.0, "offset sample std {std}");
    println!(
        "ACCEPTANCE 07 (scenario statistics): PASS — 10000 scenarios, mean radius {mean_radius:.3}, offset std {std:.2}"
    );
}

#[test]
fn acceptance_08_lambda_sampling() {
    let params = RewardParams::default();
    let mut rng = Rng::seed_from_u64(808);
    let n = 1_000_000;
    let mut sum = 0.0;
    for _ in 0..n {
        let lambda = sample_lambda(&mut rng, &params);
        assert!(lambda > 0.0 && lambda <= 1.0);
        sum += -lambda.log10();
    }
    let mean = sum / n as f64;
    assert!(
        (mean - 0.5).abs() < 0.005,
        "mean of -log10(lambda) = {mean}"
    );
    println!("ACCEPTANCE 08 (lambda sampling): PASS — mean -log10(lambda) = {mean:.5} over 1e6 draws");
}

#[test]
fn acceptance_10_lm_fit_recovery() {
    let sweep_grid = [1.0, 0.9, 0.5, 0.1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6];
    let cases: [(TrendModel, Vec<f64>); 3] = [
        (TrendModel::LogisticSuccess, vec![0.705, 0.614]),
        (TrendModel::PowerCte, vec![-4.44, 26.1, 0.086]),
        (TrendModel::LoglinearLength, vec![329.0, 15.3]),
    ];

    // Noiseless: parameters recovered to 1e-6 relative on the sweep grid.
    for (model, truth) in &cases {
        let data: Vec<(f64, f64)> = sweep_grid.iter().map(|&l| (l, model.eval(truth, l))).collect();
        let fit = lm_fit(*model, &data, &[]).unwrap();
        assert!(fit.converged, "{} did not converge", model.id());
        for (got, want) in fit.params.iter().zip(truth) {
            let rel = ((got - want) / want).abs();
            assert!(rel < 1e-6, "{}: {got} vs {want} (rel {rel})", model.id());
        }
    }

    // 1% multiplicative noise: median parameter recovery within 5% over 100
    // trials. Runs on a dense log-spaced grid — on the 9-point sweep grid the
    // statistical estimator variance alone exceeds the band, independent of
    // the optimizer.
    let n_grid = 2000;
    let dense: Vec<f64> = (0..n_grid)
        .map(|i| 10f64.powf(-6.0 + 6.0 * i as f64 / (n_grid - 1) as f64))
        .collect();
    let mut rng = Rng::seed_from_u64(1010);
    let mut worst_median = 0.0f64;
    for (model, truth) in &cases {
        let clean: Vec<(f64, f64)> = dense.iter().map(|&l| (l, model.eval(truth, l))).collect();
        let mut rel_errors: Vec<Vec<f64>> = vec![Vec::new(); truth.len()];
        for _ in 0..100 {
            let noisy: Vec<(f64, f64)> = clean
                .iter()
                .map(|&(l, y)| (l, y * (1.0 + 0.01 * rng.standard_normal())))
                .collect();
            let fit = lm_fit(*model, &noisy, &[]).unwrap();
            for (j, (got, want)) in fit.params.iter().zip(truth).enumerate() {
                rel_errors[j].push(((got - want) / want).abs());
            }
        }
        for (j, errs) in rel_errors.iter_mut().enumerate() {
            errs.sort_by(f64::total_cmp);
            let median = errs[errs.len() / 2];
            assert!(
                median < 0.05,
                "{} parameter {j}: median relative error {median}",
                model.id()
            );
            worst_median = worst_median.max(median);
        }
    }
    println!(
        "ACCEPTANCE 10 (LM fit recovery): PASS — noiseless 1e-6 on sweep grid; noisy worst median {worst_median:.4}"
    );
}
