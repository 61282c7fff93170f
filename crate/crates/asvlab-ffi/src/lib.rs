//! C ABI for embedding the vessel environment and trained policies.
//!
//! Handles are opaque pointers created and destroyed by this library.
//! Every fallible function returns an [`AsvStatus`] code; on failure a
//! thread-local message with details is available through
//! [`asvlab_last_error`]. Entry points never unwind across the boundary.

use std::cell::RefCell;
use std::ffi::CStr;
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use asvlab::config::RunConfig;
use asvlab::env::{Env, EnvError, LambdaMode, ScenarioSource, TerminationReason};
use asvlab::rl::{load_checkpoint, normalized_to_control, PolicyValueNet};
use asvlab::scenario;

/// Status codes returned by every fallible call.
#[repr(i32)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AsvStatus {
    Ok = 0,
    /// A pointer was null, a buffer too small or a value out of range.
    InvalidArgument = 1,
    /// File could not be read or parsed.
    Io = 2,
    /// Call violated the episode protocol (e.g. step after done).
    Protocol = 3,
    /// Unexpected internal failure.
    Internal = 4,
}

/// Episode termination codes reported by `asvlab_env_step`.
#[repr(i32)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AsvTermination {
    None = 0,
    Goal = 1,
    Collision = 2,
    RewardFloor = 3,
    StepCap = 4,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn fail(status: AsvStatus, msg: impl Into<String>) -> i32 {
    set_error(msg);
    status as i32
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `cap`). Returns the full message length in bytes.
///
/// # Safety
/// `buf` must point to `cap` writable bytes, or be null (query mode).
#[no_mangle]
pub unsafe extern "C" fn asvlab_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Opaque simulator handle (one episode at a time).
pub struct AsvEnv {
    env: Env,
    obs_buf: Vec<f64>,
}

/// Opaque trained-policy handle.
pub struct AsvPolicy {
    net: PolicyValueNet,
}

unsafe fn cstr_to_path<'a>(ptr: *const c_char) -> Result<&'a Path, String> {
    if ptr.is_null() {
        return Err("path pointer is null".into());
    }
    let s = CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| "path is not valid UTF-8".to_string())?;
    Ok(Path::new(s))
}

fn env_from_config(cfg: &RunConfig, lambda: LambdaMode, seed: u64) -> Result<Env, String> {
    let vessel = cfg.validate().map_err(|e| e.to_string())?;
    Env::new(
        vessel,
        cfg.sensors.clone(),
        cfg.rewards.clone(),
        cfg.env.clone(),
        ScenarioSource::Random(cfg.scenario.clone()),
        lambda,
        seed,
    )
    .map_err(|e| e.to_string())
}

fn wrap_env(result: Result<Env, String>, out: *mut *mut AsvEnv) -> i32 {
    match result {
        Ok(env) => {
            unsafe {
                *out = Box::into_raw(Box::new(AsvEnv {
                    env,
                    obs_buf: Vec::new(),
                }));
            }
            AsvStatus::Ok as i32
        }
        Err(msg) => fail(AsvStatus::Io, msg),
    }
}

/// Creates an environment with the default configuration: randomized
/// scenarios and a freshly sampled trade-off weight per episode.
///
/// # Safety
/// `out` must be a valid pointer to an `AsvEnv*` slot.
#[no_mangle]
pub unsafe extern "C" fn asvlab_env_new_default(seed: u64, out: *mut *mut AsvEnv) -> i32 {
    if out.is_null() {
        return fail(AsvStatus::InvalidArgument, "out pointer is null");
    }
    catch_unwind(AssertUnwindSafe(|| {
        wrap_env(
            env_from_config(&RunConfig::default(), LambdaMode::Sampled, seed),
            out,
        )
    }))
    .unwrap_or_else(|_| fail(AsvStatus::Internal, "panic in asvlab_env_new_default"))
}

/// Creates an environment from a run-configuration TOML file.
///
/// # Safety
/// `config_path` must be a NUL-terminated string; `out` a valid slot.
#[no_mangle]
pub unsafe extern "C" fn asvlab_env_new_from_config(
    config_path: *const c_char,
    seed: u64,
    out: *mut *mut AsvEnv,
) -> i32 {
    if out.is_null() {
        return fail(AsvStatus::InvalidArgument, "out pointer is null");
    }
    catch_unwind(AssertUnwindSafe(|| {
        let path = match cstr_to_path(config_path) {
            Ok(p) => p,
            Err(msg) => return fail(AsvStatus::InvalidArgument, msg),
        };
        let cfg = match RunConfig::load(path) {
            Ok(c) => c,
            Err(e) => return fail(AsvStatus::Io, e.to_string()),
        };
        wrap_env(env_from_config(&cfg, LambdaMode::Sampled, seed), out)
    }))
    .unwrap_or_else(|_| fail(AsvStatus::Internal, "panic in asvlab_env_new_from_config"))
}

/// Creates an environment replaying one scenario file at a pinned trade-off.
///
/// # Safety
/// `scenario_path` must be a NUL-terminated string; `out` a valid slot.
#[no_mangle]
pub unsafe extern "C" fn asvlab_env_new_from_scenario(
    scenario_path: *const c_char,
    lambda: f64,
    seed: u64,
    out: *mut *mut AsvEnv,
) -> i32 {
    if out.is_null() {
        return fail(AsvStatus::InvalidArgument, "out pointer is null");
    }
    catch_unwind(AssertUnwindSafe(|| {
        let path = match cstr_to_path(scenario_path) {
            Ok(p) => p,
            Err(msg) => return fail(AsvStatus::InvalidArgument, msg),
        };
        if !(lambda > 0.0 && lambda <= 1.0) {
            return fail(
                AsvStatus::InvalidArgument,
                format!("lambda {lambda} outside (0, 1]"),
            );
        }
        let scene = match scenario::load(path) {
            Ok(s) => s,
            Err(e) => return fail(AsvStatus::Io, e.to_string()),
        };
        let cfg = RunConfig::default();
        let vessel = match cfg.validate() {
            Ok(v) => v,
            Err(e) => return fail(AsvStatus::Internal, e.to_string()),
        };
        let env = Env::new(
            vessel,
            cfg.sensors.clone(),
            cfg.rewards.clone(),
            cfg.env.clone(),
            ScenarioSource::Fixed(Box::new(scene)),
            LambdaMode::Pinned(lambda),
            seed,
        )
        .map_err(|e| e.to_string());
        wrap_env(env, out)
    }))
    .unwrap_or_else(|_| fail(AsvStatus::Internal, "panic in asvlab_env_new_from_scenario"))
}

/// Destroys an environment handle (null is a no-op).
///
/// # Safety
/// `env` must have been produced by an `asvlab_env_new_*` call.
#[no_mangle]
pub unsafe extern "C" fn asvlab_env_free(env: *mut AsvEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// Observation length of this environment (scalar features plus sectors).
///
/// # Safety
/// `env` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn asvlab_env_obs_dim(env: *const AsvEnv) -> usize {
    if env.is_null() {
        return 0;
    }
    (*env).env.obs_dim()
}

/// Trade-off weight of the current episode.
///
/// # Safety
/// `env` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn asvlab_env_lambda(env: *const AsvEnv) -> f64 {
    if env.is_null() {
        return f64::NAN;
    }
    (*env).env.lambda()
}

unsafe fn write_obs(obs: &[f64], out: *mut f64, len: usize) -> Result<(), String> {
    if out.is_null() {
        return Err("observation buffer is null".into());
    }
    if len < obs.len() {
        return Err(format!(
            "observation buffer holds {len} values, need {}",
            obs.len()
        ));
    }
    std::ptr::copy_nonoverlapping(obs.as_ptr(), out, obs.len());
    Ok(())
}

/// Starts a new episode; writes the first observation into `obs_out`.
///
/// # Safety
/// `env` must be a live handle and `obs_out` point to `obs_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn asvlab_env_reset(env: *mut AsvEnv, obs_out: *mut f64, obs_len: usize) -> i32 {
    if env.is_null() {
        return fail(AsvStatus::InvalidArgument, "env handle is null");
    }
    catch_unwind(AssertUnwindSafe(|| {
        let handle = &mut *env;
        match handle.env.reset() {
            Ok(obs) => {
                handle.obs_buf = obs.to_vec();
                match write_obs(&handle.obs_buf, obs_out, obs_len) {
                    Ok(()) => AsvStatus::Ok as i32,
                    Err(msg) => fail(AsvStatus::InvalidArgument, msg),
                }
            }
            Err(e) => fail(AsvStatus::Internal, e.to_string()),
        }
    }))
    .unwrap_or_else(|_| fail(AsvStatus::Internal, "panic in asvlab_env_reset"))
}

unsafe fn step_common(
    env: *mut AsvEnv,
    control: [f64; 2],
    obs_out: *mut f64,
    obs_len: usize,
    reward_out: *mut f64,
    done_out: *mut u8,
    reason_out: *mut i32,
) -> i32 {
    if env.is_null() {
        return fail(AsvStatus::InvalidArgument, "env handle is null");
    }
    let handle = &mut *env;
    match handle.env.step(control) {
        Ok(result) => {
            handle.obs_buf = result.observation.to_vec();
            if let Err(msg) = write_obs(&handle.obs_buf, obs_out, obs_len) {
                return fail(AsvStatus::InvalidArgument, msg);
            }
            if !reward_out.is_null() {
                *reward_out = result.reward;
            }
            if !done_out.is_null() {
                *done_out = result.done as u8;
            }
            if !reason_out.is_null() {
                *reason_out = match result.termination_reason {
                    None => AsvTermination::None,
                    Some(TerminationReason::Goal) => AsvTermination::Goal,
                    Some(TerminationReason::Collision) => AsvTermination::Collision,
                    Some(TerminationReason::RewardFloor) => AsvTermination::RewardFloor,
                    Some(TerminationReason::StepCap) => AsvTermination::StepCap,
                } as i32;
            }
            AsvStatus::Ok as i32
        }
        Err(EnvError::StepAfterDone) => fail(
            AsvStatus::Protocol,
            "step called on a finished episode; call asvlab_env_reset first",
        ),
        Err(e) => fail(AsvStatus::Internal, e.to_string()),
    }
}

/// Advances one control period with a physical command (clamped to the
/// actuator limits): `thrust_n` in newtons, `yaw_moment_nm` in newton-meters.
///
/// # Safety
/// `env` must be a live handle; output pointers may be null except
/// `obs_out`, which must hold `obs_len >= obs_dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn asvlab_env_step(
    env: *mut AsvEnv,
    thrust_n: f64,
    yaw_moment_nm: f64,
    obs_out: *mut f64,
    obs_len: usize,
    reward_out: *mut f64,
    done_out: *mut u8,
    reason_out: *mut i32,
) -> i32 {
    catch_unwind(AssertUnwindSafe(|| {
        step_common(
            env,
            [thrust_n, yaw_moment_nm],
            obs_out,
            obs_len,
            reward_out,
            done_out,
            reason_out,
        )
    }))
    .unwrap_or_else(|_| fail(AsvStatus::Internal, "panic in asvlab_env_step"))
}

/// Advances one control period with a normalized command in `[-1, 1]^2`,
/// mapped onto the actuator ranges (the convention trained policies use).
///
/// # Safety
/// Same contract as [`asvlab_env_step`].
#[no_mangle]
pub unsafe extern "C" fn asvlab_env_step_normalized(
    env: *mut AsvEnv,
    action_0: f64,
    action_1: f64,
    obs_out: *mut f64,
    obs_len: usize,
    reward_out: *mut f64,
    done_out: *mut u8,
    reason_out: *mut i32,
) -> i32 {
    catch_unwind(AssertUnwindSafe(|| {
        if env.is_null() {
            return fail(AsvStatus::InvalidArgument, "env handle is null");
        }
        let control = normalized_to_control(&[action_0, action_1], (*env).env.vessel_params());
        step_common(env, control, obs_out, obs_len, reward_out, done_out, reason_out)
    }))
    .unwrap_or_else(|_| fail(AsvStatus::Internal, "panic in asvlab_env_step_normalized"))
}

/// Loads a trained policy from a checkpoint file.
///
/// # Safety
/// `checkpoint_path` must be NUL-terminated; `out` a valid slot.
#[no_mangle]
pub unsafe extern "C" fn asvlab_policy_load(
    checkpoint_path: *const c_char,
    out: *mut *mut AsvPolicy,
) -> i32 {
    if out.is_null() {
        return fail(AsvStatus::InvalidArgument, "out pointer is null");
    }
    catch_unwind(AssertUnwindSafe(|| {
        let path = match cstr_to_path(checkpoint_path) {
            Ok(p) => p,
            Err(msg) => return fail(AsvStatus::InvalidArgument, msg),
        };
        match load_checkpoint(path) {
            Ok(ckpt) => {
                *out = Box::into_raw(Box::new(AsvPolicy { net: ckpt.net }));
                AsvStatus::Ok as i32
            }
            Err(e) => fail(AsvStatus::Io, e.to_string()),
        }
    }))
    .unwrap_or_else(|_| fail(AsvStatus::Internal, "panic in asvlab_policy_load"))
}

/// Destroys a policy handle (null is a no-op).
///
/// # Safety
/// `policy` must have been produced by `asvlab_policy_load`.
#[no_mangle]
pub unsafe extern "C" fn asvlab_policy_free(policy: *mut AsvPolicy) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}

/// Observation length the policy expects.
///
/// # Safety
/// `policy` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn asvlab_policy_obs_dim(policy: *const AsvPolicy) -> usize {
    if policy.is_null() {
        return 0;
    }
    (*policy).net.obs_dim
}

/// Deterministic (mean) normalized action for a raw observation; pair with
/// [`asvlab_env_step_normalized`].
///
/// # Safety
/// `obs` must hold `obs_len` doubles and `action_out` two doubles.
#[no_mangle]
pub unsafe extern "C" fn asvlab_policy_act(
    policy: *const AsvPolicy,
    obs: *const f64,
    obs_len: usize,
    action_out: *mut f64,
) -> i32 {
    catch_unwind(AssertUnwindSafe(|| {
        if policy.is_null() || obs.is_null() || action_out.is_null() {
            return fail(AsvStatus::InvalidArgument, "null pointer argument");
        }
        let net = &(*policy).net;
        if obs_len != net.obs_dim {
            return fail(
                AsvStatus::InvalidArgument,
                format!(
                    "observation has {obs_len} values, policy expects {}",
                    net.obs_dim
                ),
            );
        }
        let obs_slice = std::slice::from_raw_parts(obs, obs_len);
        let action = net.act_mean(obs_slice);
        std::ptr::copy_nonoverlapping(action.as_ptr(), action_out, action.len());
        AsvStatus::Ok as i32
    }))
    .unwrap_or_else(|_| fail(AsvStatus::Internal, "panic in asvlab_policy_act"))
}
