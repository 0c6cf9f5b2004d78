#ifndef UNREALDC_H
#define UNREALDC_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

#define UDC_ACTION_FIRE 0

#define UDC_ACTION_MOVE_FORWARD 1

#define UDC_ACTION_TURN_RIGHT 2

#define UDC_ACTION_TURN_LEFT 3

#define UDC_ACTION_MOVE_BACKWARD 4

#define UDC_ROLE_ACTION 0

#define UDC_ROLE_NAVIGATION 1

/**
 * No sub-agent (single agents).
 */
#define UDC_CHOICE_NONE -1

#define UDC_CHOICE_ACTION 0

#define UDC_CHOICE_NAVIGATION 1

typedef enum UdcStatus {
  UDC_STATUS_OK = 0,
  UDC_STATUS_NULL_POINTER = 1,
  UDC_STATUS_INVALID_ARGUMENT = 2,
  UDC_STATUS_MAP_ERROR = 3,
  UDC_STATUS_CHECKPOINT_ERROR = 4,
  UDC_STATUS_ACTION_COUNT_MISMATCH = 5,
  UDC_STATUS_EPISODE_FINISHED = 6,
  UDC_STATUS_BUFFER_TOO_SMALL = 7,
  UDC_STATUS_RUNTIME_ERROR = 8,
  UDC_STATUS_PANIC = 9,
} UdcStatus;

/**
 * Single or combined agent.
 */
typedef struct UdcAgent UdcAgent;

/**
 * Simulator instance.
 */
typedef struct UdcEnv UdcEnv;

typedef struct UdcEvents {
  uint32_t kill;
  uint32_t death;
  uint32_t missed_shot;
  uint32_t lost_health;
  uint32_t object_gathered;
} UdcEvents;

typedef struct UdcEpisodeStats {
  uint64_t seed;
  uint32_t kills;
  uint32_t deaths;
  uint32_t objects;
  uint32_t steps;
  double shaped_return;
} UdcEpisodeStats;

typedef struct UdcTTest {
  /**
   * 0 when both samples have zero variance; t, df and p are then NaN.
   */
  bool defined;
  double t;
  double df;
  double p;
} UdcTTest;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the next failing call.
 */
const char *udc_last_error(void);

const char *udc_version(void);

/**
 * Creates an environment from map text. `role` picks the reward profile.
 *
 * # Safety
 * `map_text` must be a NUL-terminated string and `out` a valid pointer.
 */
enum UdcStatus udc_env_new(const char *map_text,
                           uint64_t seed,
                           size_t height,
                           size_t width,
                           bool timed,
                           uint32_t role,
                           struct UdcEnv **out);

/**
 * # Safety
 * `env` must come from [`udc_env_new`] and not be used afterwards. Null is ignored.
 */
void udc_env_free(struct UdcEnv *env);

/**
 * # Safety
 * `env` must be a live handle.
 */
enum UdcStatus udc_env_reset(struct UdcEnv *env, uint64_t seed);

/**
 * Advances one tick. Any of the output pointers may be null.
 *
 * # Safety
 * `env` must be a live handle; non-null outputs must be valid.
 */
enum UdcStatus udc_env_step(struct UdcEnv *env,
                            uint32_t action,
                            double *reward,
                            bool *done,
                            struct UdcEvents *out_events);

/**
 * Number of floats in an observation (height * width * 3).
 *
 * # Safety
 * `env` must be a live handle or null.
 */
size_t udc_env_observation_len(const struct UdcEnv *env);

/**
 * Copies the current observation, row-major height x width x RGB in [0, 1].
 *
 * # Safety
 * `env` must be a live handle and `buf` valid for `len` floats.
 */
enum UdcStatus udc_env_observation(const struct UdcEnv *env, float *buf, size_t len);

/**
 * # Safety
 * `env` must be a live handle or null.
 */
bool udc_env_is_terminal(const struct UdcEnv *env);

/**
 * Loads a single-agent checkpoint.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum UdcStatus udc_agent_load(const char *path, bool greedy, struct UdcAgent **out);

/**
 * Loads a combined agent. `negative_only` restricts routing to predicted negative rewards.
 *
 * # Safety
 * Both paths must be NUL-terminated strings and `out` a valid pointer.
 */
enum UdcStatus udc_combined_load(const char *action_path,
                                 const char *navigation_path,
                                 bool greedy,
                                 bool negative_only,
                                 struct UdcAgent **out);

/**
 * # Safety
 * `agent` must come from a load call and not be used afterwards. Null is ignored.
 */
void udc_agent_free(struct UdcAgent *agent);

/**
 * Input frame size the agent expects.
 *
 * # Safety
 * `agent` must be a live handle; outputs must be valid.
 */
enum UdcStatus udc_agent_input_dims(const struct UdcAgent *agent, size_t *height, size_t *width);

/**
 * Clears recurrent state and reseeds action sampling.
 *
 * # Safety
 * `agent` must be a live handle.
 */
enum UdcStatus udc_agent_reset(struct UdcAgent *agent, uint64_t seed);

/**
 * Picks an action for the environment's current observation. `choice` receives one of
 * the `UDC_CHOICE_*` values and may be null.
 *
 * # Safety
 * Handles must be live; `action` valid; `choice` valid or null.
 */
enum UdcStatus udc_agent_act(struct UdcAgent *agent,
                             const struct UdcEnv *env,
                             uint32_t *action,
                             int32_t *choice);

/**
 * Plays `n` episodes with seeds `seed .. seed + n` and writes one record per episode.
 *
 * # Safety
 * `agent` must be a live handle, `map_text` NUL-terminated, `out` valid for `n` records.
 */
enum UdcStatus udc_agent_run_episodes(struct UdcAgent *agent,
                                      const char *map_text,
                                      size_t n,
                                      bool timed,
                                      uint64_t seed,
                                      struct UdcEpisodeStats *out);

/**
 * Shaped reward of an event tally under a role's profile.
 *
 * # Safety
 * `e` must be a valid pointer.
 */
enum UdcStatus udc_shaped_reward(uint32_t role, const struct UdcEvents *e, double *reward);

/**
 * Welch's two-tailed two-sample t-test.
 *
 * # Safety
 * `a` and `b` must be valid for `na` and `nb` doubles; `out` must be valid.
 */
enum UdcStatus udc_welch_t_test(const double *a,
                                size_t na,
                                const double *b,
                                size_t nb,
                                struct UdcTTest *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* UNREALDC_H */
