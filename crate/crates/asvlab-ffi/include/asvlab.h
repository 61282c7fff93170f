#ifndef ASVLAB_H
#define ASVLAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible call.
 */
enum AsvStatus
#ifdef __cplusplus
  : int32_t
#endif // __cplusplus
 {
  ASV_STATUS_OK = 0,
  /**
   * A pointer was null, a buffer too small or a value out of range.
   */
  ASV_STATUS_INVALID_ARGUMENT = 1,
  /**
   * File could not be read or parsed.
   */
  ASV_STATUS_IO = 2,
  /**
   * Call violated the episode protocol (e.g. step after done).
   */
  ASV_STATUS_PROTOCOL = 3,
  /**
   * Unexpected internal failure.
   */
  ASV_STATUS_INTERNAL = 4,
};
#ifndef __cplusplus
typedef int32_t AsvStatus;
#endif // __cplusplus

/**
 * Episode termination codes reported by `asvlab_env_step`.
 */
enum AsvTermination
#ifdef __cplusplus
  : int32_t
#endif // __cplusplus
 {
  ASV_TERMINATION_NONE = 0,
  ASV_TERMINATION_GOAL = 1,
  ASV_TERMINATION_COLLISION = 2,
  ASV_TERMINATION_REWARD_FLOOR = 3,
  ASV_TERMINATION_STEP_CAP = 4,
};
#ifndef __cplusplus
typedef int32_t AsvTermination;
#endif // __cplusplus

/**
 * Opaque simulator handle (one episode at a time).
 */
typedef struct AsvEnv AsvEnv;

/**
 * Opaque trained-policy handle.
 */
typedef struct AsvPolicy AsvPolicy;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `cap`). Returns the full message length in bytes.
 *
 * # Safety
 * `buf` must point to `cap` writable bytes, or be null (query mode).
 */
uintptr_t asvlab_last_error(char *buf, uintptr_t cap);

/**
 * Creates an environment with the default configuration: randomized
 * scenarios and a freshly sampled trade-off weight per episode.
 *
 * # Safety
 * `out` must be a valid pointer to an `AsvEnv*` slot.
 */
int32_t asvlab_env_new_default(uint64_t seed, struct AsvEnv **out);

/**
 * Creates an environment from a run-configuration TOML file.
 *
 * # Safety
 * `config_path` must be a NUL-terminated string; `out` a valid slot.
 */
int32_t asvlab_env_new_from_config(const char *config_path, uint64_t seed, struct AsvEnv **out);

/**
 * Creates an environment replaying one scenario file at a pinned trade-off.
 *
 * # Safety
 * `scenario_path` must be a NUL-terminated string; `out` a valid slot.
 */
int32_t asvlab_env_new_from_scenario(const char *scenario_path,
                                     double lambda,
                                     uint64_t seed,
                                     struct AsvEnv **out);

/**
 * Destroys an environment handle (null is a no-op).
 *
 * # Safety
 * `env` must have been produced by an `asvlab_env_new_*` call.
 */
void asvlab_env_free(struct AsvEnv *env);

/**
 * Observation length of this environment (scalar features plus sectors).
 *
 * # Safety
 * `env` must be a live handle.
 */
uintptr_t asvlab_env_obs_dim(const struct AsvEnv *env);

/**
 * Trade-off weight of the current episode.
 *
 * # Safety
 * `env` must be a live handle.
 */
double asvlab_env_lambda(const struct AsvEnv *env);

/**
 * Starts a new episode; writes the first observation into `obs_out`.
 *
 * # Safety
 * `env` must be a live handle and `obs_out` point to `obs_len` doubles.
 */
int32_t asvlab_env_reset(struct AsvEnv *env, double *obs_out, uintptr_t obs_len);

/**
 * Advances one control period with a physical command (clamped to the
 * actuator limits): `thrust_n` in newtons, `yaw_moment_nm` in newton-meters.
 *
 * # Safety
 * `env` must be a live handle; output pointers may be null except
 * `obs_out`, which must hold `obs_len >= obs_dim` doubles.
 */
int32_t asvlab_env_step(struct AsvEnv *env,
                        double thrust_n,
                        double yaw_moment_nm,
                        double *obs_out,
                        uintptr_t obs_len,
                        double *reward_out,
                        uint8_t *done_out,
                        int32_t *reason_out);

/**
 * Advances one control period with a normalized command in `[-1, 1]^2`,
 * mapped onto the actuator ranges (the convention trained policies use).
 *
 * # Safety
 * Same contract as [`asvlab_env_step`].
 */
int32_t asvlab_env_step_normalized(struct AsvEnv *env,
                                   double action_0,
                                   double action_1,
                                   double *obs_out,
                                   uintptr_t obs_len,
                                   double *reward_out,
                                   uint8_t *done_out,
                                   int32_t *reason_out);

/**
 * Loads a trained policy from a checkpoint file.
 *
 * # Safety
 * `checkpoint_path` must be NUL-terminated; `out` a valid slot.
 */
int32_t asvlab_policy_load(const char *checkpoint_path, struct AsvPolicy **out);

/**
 * Destroys a policy handle (null is a no-op).
 *
 * # Safety
 * `policy` must have been produced by `asvlab_policy_load`.
 */
void asvlab_policy_free(struct AsvPolicy *policy);

/**
 * Observation length the policy expects.
 *
 * # Safety
 * `policy` must be a live handle.
 */
uintptr_t asvlab_policy_obs_dim(const struct AsvPolicy *policy);

/**
 * Deterministic (mean) normalized action for a raw observation; pair with
 * [`asvlab_env_step_normalized`].
 *
 * # Safety
 * `obs` must hold `obs_len` doubles and `action_out` two doubles.
 */
int32_t asvlab_policy_act(const struct AsvPolicy *policy,
                          const double *obs,
                          uintptr_t obs_len,
                          double *action_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ASVLAB_H */
