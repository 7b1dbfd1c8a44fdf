#ifndef SLOTBENCH_H
#define SLOTBENCH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SbBlocker {
  SB_BLOCKER_NONE = 0,
  SB_BLOCKER_TARGET_SLOT = 1,
  /**
   * Blocker in the target slot with the configured probability.
   */
  SB_BLOCKER_SAMPLED = 2,
} SbBlocker;

typedef enum SbStart {
  SB_START_SAMPLED = 0,
  SB_START_PARTIAL_INSERT = 1,
  SB_START_REGION = 2,
  SB_START_CENTERED = 3,
} SbStart;

typedef enum SbStatus {
  SB_STATUS_OK = 0,
  SB_STATUS_NULL_POINTER = 1,
  SB_STATUS_INVALID_ARGUMENT = 2,
  SB_STATUS_INVALID_CONFIG = 3,
  SB_STATUS_EPISODE_OVER = 4,
  SB_STATUS_BUFFER_TOO_SMALL = 5,
  SB_STATUS_IO = 6,
  SB_STATUS_CHECKPOINT = 7,
  SB_STATUS_INCOMPATIBLE = 8,
  SB_STATUS_SIMULATION = 9,
  SB_STATUS_PANIC = 10,
} SbStatus;

typedef enum SbTermination {
  SB_TERMINATION_NONE = 0,
  SB_TERMINATION_SUCCESS = 1,
  SB_TERMINATION_JAM = 2,
} SbTermination;

typedef struct SbEnv SbEnv;

typedef struct SbPolicy SbPolicy;

typedef struct SbResetOptions {
  double noise_fraction;
  /**
   * Negative picks a slot at random.
   */
  int32_t target_slot;
  enum SbBlocker blocker;
  enum SbStart start;
} SbResetOptions;

typedef struct SbStepInfo {
  double reward;
  enum SbTermination terminated;
  bool truncated;
  /**
   * End-effector pose `(x, z, theta)`.
   */
  double pose[3];
  /**
   * Contact wrench `(fx, fz, tau)` at the end-effector.
   */
  double wrench[3];
  size_t delay;
  double peak_force;
} SbStepInfo;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failing call on this thread; valid until the next failing call.
 */
const char *sb_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sb_version(void);

/**
 * Default reset: full noise, sampled blocker and start.
 */
struct SbResetOptions sb_reset_options_default(void);

/**
 * Creates an environment from an experiment TOML string, or defaults when `config_toml` is null.
 *
 * # Safety
 * `config_toml` must be null or a NUL-terminated string; `out` must be writable.
 */
enum SbStatus sb_env_new(const char *config_toml, struct SbEnv **out);

/**
 * # Safety
 * `env` must be null or a handle from `sb_env_new` not yet freed.
 */
void sb_env_free(struct SbEnv *env);

/**
 * # Safety
 * `env` must be a live handle; `out` must be writable.
 */
enum SbStatus sb_env_observation_dim(const struct SbEnv *env, size_t *out);

/**
 * Starts an episode and writes the first observation to `obs` (may be null).
 *
 * # Safety
 * `env` must be a live handle, `opts` null or valid, `obs` null or `obs_len` writable values.
 */
enum SbStatus sb_env_reset(struct SbEnv *env,
                           uint64_t seed,
                           const struct SbResetOptions *opts,
                           double *obs,
                           size_t obs_len);

/**
 * Applies one normalized action of 3 values; writes the next observation and step info.
 *
 * # Safety
 * `env` must be a live handle, `action` must point to 3 values, `obs` null or `obs_len`
 * writable values, `info` null or writable.
 */
enum SbStatus sb_env_step(struct SbEnv *env,
                          const double *action,
                          double *obs,
                          size_t obs_len,
                          struct SbStepInfo *info);

/**
 * Creates `straight-down` or `random-search`.
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be writable.
 */
enum SbStatus sb_policy_baseline(const char *name, struct SbPolicy **out);

/**
 * Loads a trained checkpoint and checks it against `env`'s observation layout.
 *
 * # Safety
 * `path` must be a NUL-terminated string, `env` a live handle, `out` writable.
 */
enum SbStatus sb_policy_load(const char *path, const struct SbEnv *env, struct SbPolicy **out);

/**
 * # Safety
 * `policy` must be null or a handle not yet freed.
 */
void sb_policy_free(struct SbPolicy *policy);

/**
 * Reseeds per-episode policy state; call after every reset.
 *
 * # Safety
 * `policy` must be a live handle.
 */
enum SbStatus sb_policy_begin_episode(struct SbPolicy *policy, uint64_t seed);

/**
 * Writes the policy's 3-value action for the current state of `env`.
 *
 * # Safety
 * Handles must be live, `obs` must point to `obs_len` values, `action` to 3 writable values.
 */
enum SbStatus sb_policy_act(struct SbPolicy *policy,
                            const struct SbEnv *env,
                            const double *obs,
                            size_t obs_len,
                            double *action);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SLOTBENCH_H */
