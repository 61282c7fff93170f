//! Command-line entry point: scenario generation, training, evaluation,
//! replay, curve fitting and the pooling benchmark.

use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use asvlab::config::{write_atomic, RunConfig};
use asvlab::env::{Env, EnvError, LambdaMode, ScenarioSource, TraceRecorder};
use asvlab::eval::{
    builtin_scenarios, fit_csv, lm_fit, parse_report_column, report_csv, run_eval, EvalSetup,
    TrendModel,
};
use asvlab::rl::{
    load_checkpoint, metrics_csv_header, metrics_csv_row, normalized_to_control, save_checkpoint,
    Checkpoint, FeatureScaling, Trainer, VesselTrainEnv,
};
use asvlab::rng::Rng;
use asvlab::scenario;
use asvlab::sensing::{bench_csv, pooling_bench, PoolingMethod};

#[derive(Parser)]
#[command(
    name = "asvlab",
    version,
    about = "Vessel guidance laboratory: simulate, train and evaluate path-following agents"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a scenario file (random or one of the built-in scenes).
    GenerateScenario {
        /// Output scenario file.
        #[arg(long)]
        out: PathBuf,
        /// Generator seed (defaults to the config seed).
        #[arg(long)]
        seed: Option<u64>,
        /// Optional config file supplying generator defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Emit a built-in qualitative scene (a, b, c or d) instead.
        #[arg(long)]
        builtin: Option<String>,
        /// Override the obstacle count.
        #[arg(long)]
        n_obstacles: Option<usize>,
        /// Override the nominal path length [m].
        #[arg(long)]
        path_length: Option<f64>,
        /// Override the mean obstacle radius [m].
        #[arg(long)]
        mean_radius: Option<f64>,
        /// Override the lateral offset standard deviation [m].
        #[arg(long)]
        offset_std: Option<f64>,
    },
    /// Train a policy and write checkpoints plus a metrics CSV.
    Train {
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Master seed override.
        #[arg(long)]
        seed: Option<u64>,
        /// Total environment steps override.
        #[arg(long)]
        steps: Option<u64>,
        /// Resume from an existing checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Write an intermediate checkpoint every N iterations (0 disables).
        #[arg(long, default_value_t = 10)]
        checkpoint_every: u64,
    },
    /// Evaluate a checkpoint across one or more trade-off values.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Comma-separated trade-off values in (0, 1].
        #[arg(long, value_delimiter = ',', required = true)]
        lambda: Vec<f64>,
        #[arg(long, default_value_t = 100)]
        episodes: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Output report CSV.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Roll one episode on a fixed scenario and write the step trace.
    Replay {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Scenario file to replay.
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        /// Output trace CSV.
        #[arg(long)]
        trace_out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Fit the trend models against a sweep report.
    FitCurves {
        /// Report CSV produced by `evaluate`.
        #[arg(long)]
        report: PathBuf,
        /// Model: logistic-success, power-cte, loglinear-length or all.
        #[arg(long, default_value = "all")]
        model: String,
        /// Report row indices (0-based) to exclude from the fit.
        #[arg(long, value_delimiter = ',')]
        exclude: Vec<usize>,
        /// Output fit CSV (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time the sector pooling methods.
    PoolingBench {
        /// Comma-separated sector densities.
        #[arg(long, value_delimiter = ',', default_value = "9")]
        n: Vec<usize>,
        /// Comma-separated methods (min, max, feasibility).
        #[arg(long, value_delimiter = ',', default_value = "min,max,feasibility")]
        methods: Vec<String>,
        #[arg(long, default_value_t = 20000)]
        iterations: usize,
        /// Output CSV (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    fn runtime(msg: impl Into<String>) -> Self {
        CliError::Runtime(msg.into())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, CliError> {
    match path {
        Some(p) => RunConfig::load(p).map_err(|e| CliError::usage(e.to_string())),
        None => Ok(RunConfig::default()),
    }
}

fn write_output(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    write_atomic(path, bytes)
        .map_err(|e| CliError::runtime(format!("failed to write {}: {e}", path.display())))
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::GenerateScenario {
            out,
            seed,
            config,
            builtin,
            n_obstacles,
            path_length,
            mean_radius,
            offset_std,
        } => {
            let cfg = load_config(config.as_deref())?;
            let scene = if let Some(name) = builtin {
                let idx = match name.to_ascii_lowercase().as_str() {
                    "a" => 0,
                    "b" => 1,
                    "c" => 2,
                    "d" => 3,
                    other => {
                        return Err(CliError::usage(format!(
                            "unknown builtin scene {other:?} (expected a, b, c or d)"
                        )))
                    }
                };
                builtin_scenarios().into_iter().nth(idx).unwrap()
            } else {
                let mut gp = cfg.scenario.clone();
                if let Some(v) = n_obstacles {
                    gp.n_obstacles = v;
                }
                if let Some(v) = path_length {
                    gp.path_length = v;
                }
                if let Some(v) = mean_radius {
                    gp.mean_radius = v;
                }
                if let Some(v) = offset_std {
                    gp.offset_std = v;
                }
                scenario::generate(&gp, seed.unwrap_or(cfg.seed))
                    .map_err(|e| CliError::usage(e.to_string()))?
            };
            scenario::save(&scene, &out).map_err(|e| CliError::runtime(e.to_string()))?;
            println!(
                "wrote {} ({} obstacles, path length {:.1} m)",
                out.display(),
                scene.obstacles.len(),
                scene.path.length()
            );
            Ok(())
        }

        Command::Train {
            out,
            config,
            seed,
            steps,
            resume,
            checkpoint_every,
        } => cmd_train(out, config, seed, steps, resume, checkpoint_every),

        Command::Evaluate {
            checkpoint,
            lambda,
            episodes,
            seed,
            out,
            config,
        } => cmd_evaluate(checkpoint, lambda, episodes, seed, out, config),

        Command::Replay {
            checkpoint,
            scenario: scenario_path,
            lambda,
            trace_out,
            seed,
            config,
        } => cmd_replay(checkpoint, scenario_path, lambda, trace_out, seed, config),

        Command::FitCurves {
            report,
            model,
            exclude,
            out,
        } => cmd_fit_curves(report, model, exclude, out),

        Command::PoolingBench {
            n,
            methods,
            iterations,
            out,
        } => {
            let methods: Vec<PoolingMethod> = methods
                .iter()
                .map(|m| m.parse().map_err(CliError::usage))
                .collect::<Result<_, _>>()?;
            let mut rows = Vec::new();
            for &density in &n {
                if density == 0 {
                    return Err(CliError::usage("sector density must be positive"));
                }
                for &method in &methods {
                    rows.push(pooling_bench(density, method, iterations));
                }
            }
            let csv = bench_csv(&rows);
            match out {
                Some(path) => {
                    write_output(&path, csv.as_bytes())?;
                    println!("wrote {}", path.display());
                }
                None => print!("{csv}"),
            }
            Ok(())
        }
    }
}

fn cmd_train(
    out: PathBuf,
    config: Option<PathBuf>,
    seed: Option<u64>,
    steps: Option<u64>,
    resume: Option<PathBuf>,
    checkpoint_every: u64,
) -> Result<(), CliError> {
    let mut cfg = load_config(config.as_deref())?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(k) = steps {
        cfg.ppo.total_steps = k;
    }
    let vessel = cfg.validate().map_err(|e| CliError::usage(e.to_string()))?;
    std::fs::create_dir_all(&out)
        .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", out.display())))?;
    write_output(&out.join("config.toml"), cfg.to_toml().as_bytes())?;

    let master = Rng::seed_from_u64(cfg.seed);
    let mut envs = Vec::with_capacity(cfg.ppo.n_workers);
    for i in 0..cfg.ppo.n_workers {
        let env_seed = master.derive_stream(5000 + i as u64).next_u64();
        let env = Env::new(
            vessel.clone(),
            cfg.sensors.clone(),
            cfg.rewards.clone(),
            cfg.env.clone(),
            ScenarioSource::Random(cfg.scenario.clone()),
            LambdaMode::Sampled,
            env_seed,
        )
        .map_err(|e| CliError::usage(e.to_string()))?;
        envs.push(VesselTrainEnv::new(env));
    }

    let mut trainer = match &resume {
        Some(ckpt_path) => {
            let ckpt = load_checkpoint(ckpt_path).map_err(|e| CliError::usage(e.to_string()))?;
            Trainer::resume(
                envs,
                cfg.ppo.clone(),
                ckpt.net,
                ckpt.opt,
                ckpt.steps_done,
                ckpt.iteration,
                cfg.seed,
            )
            .map_err(|e| CliError::usage(e.to_string()))?
        }
        None => {
            let scaling = FeatureScaling::for_observation(
                vessel.max_speed,
                cfg.sensors.max_range,
                cfg.sensors.n_sectors,
            );
            Trainer::new(envs, cfg.ppo.clone(), scaling, cfg.seed)
                .map_err(|e| CliError::usage(e.to_string()))?
        }
    };

    let save_state = |trainer: &Trainer<VesselTrainEnv>, path: &Path| -> Result<(), CliError> {
        let ckpt = Checkpoint {
            net: trainer.net.clone(),
            opt: trainer.opt.clone(),
            steps_done: trainer.steps_done,
            iteration: trainer.iteration,
        };
        save_checkpoint(path, &ckpt).map_err(|e| CliError::runtime(e.to_string()))
    };

    let target = cfg.ppo.total_steps;
    let metrics_path = out.join("metrics.csv");
    let mut metrics = String::from(metrics_csv_header());
    while trainer.steps_done < target {
        let stats = trainer
            .run_iteration()
            .map_err(|e| CliError::runtime(e.to_string()))?;
        metrics.push_str(&metrics_csv_row(&stats));
        println!(
            "iter {:4}  steps {:9}  episodes {:3}  mean_reward {:10.2}  success {:5.2}  entropy {:6.3}",
            stats.iteration,
            stats.total_steps,
            stats.episodes,
            stats.mean_episode_reward,
            stats.success_rate,
            stats.entropy
        );
        if checkpoint_every > 0 && stats.iteration % checkpoint_every == 0 {
            save_state(&trainer, &out.join(format!("ckpt_{:06}.bin", stats.iteration)))?;
            write_output(&metrics_path, metrics.as_bytes())?;
        }
    }
    save_state(&trainer, &out.join("checkpoint.bin"))?;
    write_output(&metrics_path, metrics.as_bytes())?;
    println!(
        "trained to {} steps over {} iterations; checkpoint at {}",
        trainer.steps_done,
        trainer.iteration,
        out.join("checkpoint.bin").display()
    );
    Ok(())
}

fn cmd_evaluate(
    checkpoint: PathBuf,
    lambdas: Vec<f64>,
    episodes: usize,
    seed: Option<u64>,
    out: PathBuf,
    config: Option<PathBuf>,
) -> Result<(), CliError> {
    if lambdas.is_empty() {
        return Err(CliError::usage("provide at least one --lambda value"));
    }
    for &l in &lambdas {
        if !(l > 0.0 && l <= 1.0) {
            return Err(CliError::usage(format!("lambda {l} outside (0, 1]")));
        }
    }
    let cfg = load_config(config.as_deref())?;
    let vessel = cfg.validate().map_err(|e| CliError::usage(e.to_string()))?;
    let ckpt = load_checkpoint(&checkpoint).map_err(|e| CliError::usage(e.to_string()))?;
    let expected_dim = 7 + cfg.sensors.n_sectors;
    if ckpt.net.obs_dim != expected_dim {
        return Err(CliError::usage(format!(
            "checkpoint observes {} features but this configuration produces {expected_dim}",
            ckpt.net.obs_dim
        )));
    }
    let setup = EvalSetup {
        vessel,
        sensors: cfg.sensors.clone(),
        rewards: cfg.rewards.clone(),
        env_cfg: cfg.env.clone(),
        source: ScenarioSource::Random(cfg.scenario.clone()),
    };
    let seed = seed.unwrap_or(cfg.seed);
    let mut reports = Vec::with_capacity(lambdas.len());
    for &lambda in &lambdas {
        let report = run_eval(&ckpt.net, lambda, episodes, seed, &setup)
            .map_err(|e| CliError::runtime(e.to_string()))?;
        println!(
            "lambda {:>9.2e}: success {:5.1}% (95% CI {:4.1}-{:4.1}%), avg CTE {:7.2} m, avg length {:7.1} s, cap terminations {}",
            report.lambda,
            100.0 * report.success_rate,
            100.0 * report.success_ci_95.0,
            100.0 * report.success_ci_95.1,
            report.avg_cross_track_error,
            report.avg_episode_length_s,
            report.cap_terminations
        );
        reports.push(report);
    }
    write_output(&out, report_csv(&reports).as_bytes())?;
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_replay(
    checkpoint: PathBuf,
    scenario_path: PathBuf,
    lambda: f64,
    trace_out: PathBuf,
    seed: Option<u64>,
    config: Option<PathBuf>,
) -> Result<(), CliError> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(CliError::usage(format!("lambda {lambda} outside (0, 1]")));
    }
    let cfg = load_config(config.as_deref())?;
    let vessel = cfg.validate().map_err(|e| CliError::usage(e.to_string()))?;
    let ckpt = load_checkpoint(&checkpoint).map_err(|e| CliError::usage(e.to_string()))?;
    let scene = scenario::load(&scenario_path).map_err(|e| CliError::usage(e.to_string()))?;
    let mut env = Env::new(
        vessel.clone(),
        cfg.sensors.clone(),
        cfg.rewards.clone(),
        cfg.env.clone(),
        ScenarioSource::Fixed(Box::new(scene)),
        LambdaMode::Pinned(lambda),
        seed.unwrap_or(cfg.seed),
    )
    .map_err(|e| CliError::usage(e.to_string()))?;

    let mut obs = env.reset().map_err(|e| CliError::runtime(e.to_string()))?;
    let mut trace = TraceRecorder::new();
    let timestep = cfg.env.timestep;
    let reason = loop {
        let action = ckpt.net.act_mean(&obs.to_vec());
        let control = normalized_to_control(&action, &vessel);
        let r = env.step(control).map_err(|e| match e {
            EnvError::StepAfterDone => CliError::runtime("episode ended unexpectedly"),
            other => CliError::runtime(other.to_string()),
        })?;
        trace.record(env.steps() as f64 * timestep, env.state(), &r);
        let done_reason = r.termination_reason;
        obs = r.observation;
        if let Some(reason) = done_reason {
            break reason;
        }
    };
    write_output(&trace_out, trace.to_csv().as_bytes())?;
    println!(
        "episode finished: {reason} after {} steps ({:.1} s); trace at {}",
        env.steps(),
        env.steps() as f64 * timestep,
        trace_out.display()
    );
    Ok(())
}

fn cmd_fit_curves(
    report: PathBuf,
    model: String,
    exclude: Vec<usize>,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&report)
        .map_err(|e| CliError::usage(format!("cannot read report {}: {e}", report.display())))?;
    let models: Vec<TrendModel> = if model == "all" {
        vec![
            TrendModel::LogisticSuccess,
            TrendModel::PowerCte,
            TrendModel::LoglinearLength,
        ]
    } else {
        model
            .split(',')
            .map(|m| m.parse().map_err(CliError::usage))
            .collect::<Result<_, _>>()?
    };
    let mut fits = Vec::new();
    for m in models {
        let column = match m {
            TrendModel::LogisticSuccess => "success_rate",
            TrendModel::PowerCte => "avg_cte_m",
            TrendModel::LoglinearLength => "avg_len_s",
        };
        let data = parse_report_column(&text, column).map_err(CliError::usage)?;
        let fit = lm_fit(m, &data, &exclude).map_err(|e| CliError::runtime(e.to_string()))?;
        println!(
            "{}: params {:?}, residual {:.3e}, {} iterations, converged: {}",
            fit.model.id(),
            fit.params,
            fit.residual_norm,
            fit.iterations,
            fit.converged
        );
        fits.push(fit);
    }
    let csv = fit_csv(&fits);
    match out {
        Some(path) => {
            write_output(&path, csv.as_bytes())?;
            println!("wrote {}", path.display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}
