// temporary training probe: desk-scale hyperparameter search
use asvlab::dynamics::VesselParams;
use asvlab::env::{Env, EnvConfig, LambdaMode, RewardParams, ScenarioSource};
use asvlab::eval::{run_eval, EvalSetup};
use asvlab::rl::{FeatureScaling, PPOConfig, Trainer, VesselTrainEnv};
use asvlab::rng::Rng;
use asvlab::scenario::GenParams;
use asvlab::sensing::SensorConfig;

fn make_envs(gen: &GenParams, n: usize, lambda: LambdaMode, seed: u64) -> Vec<VesselTrainEnv> {
    let master = Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let s = master.derive_stream(5000 + i as u64).next_u64();
            VesselTrainEnv::new(
                Env::new(
                    VesselParams::shipped_defaults(),
                    SensorConfig::default(),
                    RewardParams::default(),
                    EnvConfig::default(),
                    ScenarioSource::Random(gen.clone()),
                    lambda,
                    s,
                )
                .unwrap(),
            )
        })
        .collect()
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let lr: f64 = args[1].parse().unwrap();
    let t: usize = args[2].parse().unwrap();
    let ls0: f64 = args[3].parse().unwrap();
    let steps: u64 = args[4].parse().unwrap();
    let gen = GenParams { n_obstacles: 0, path_length: 200.0, mean_radius: 15.0, ..GenParams::default() };
    let cfg = PPOConfig { learning_rate: lr, rollout_len: t, total_steps: steps, ..PPOConfig::default() };
    println!("### lr={lr} T={t} log_std0={ls0} steps={steps}");
    let mut tr = Trainer::new(
        make_envs(&gen, cfg.n_workers, LambdaMode::Pinned(1.0), 99),
        cfg,
        FeatureScaling::for_observation(2.0, 150.0, 25),
        99,
    )
    .unwrap();
    tr.net.log_std = vec![ls0; 2];
    let setup = EvalSetup::randomized(gen.clone());
    let mut next_report = 0u64;
    while tr.steps_done < steps {
        let s = tr.run_iteration().unwrap();
        if tr.steps_done >= next_report {
            next_report += 25_000;
            let ev = run_eval(&tr.net, 1.0, 8, 4242, &setup).unwrap();
            println!(
                "steps {:7} eps {:3} mean_rew {:9.1} ent {:.2} kl {:.4} | eval: succ {:.2} cte {:6.1} len {:6.0}s",
                s.total_steps, s.episodes, s.mean_episode_reward, s.entropy, s.approx_kl,
                ev.success_rate, ev.avg_cross_track_error, ev.avg_episode_length_s
            );
        }
    }
}
