#ifndef TRAJATTACK_H
#define TRAJATTACK_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TaStatus {
  TA_STATUS_OK = 0,
  TA_STATUS_NULL_POINTER = 1,
  TA_STATUS_INVALID_UTF8 = 2,
  TA_STATUS_INVALID_JSON = 3,
  TA_STATUS_INVALID_SCENARIO = 4,
  /**
   * The response text did not match the answer grammar.
   */
  TA_STATUS_PARSE_FAILURE = 5,
  TA_STATUS_INVALID_PARAMS = 6,
  TA_STATUS_NO_ATTACK_SURFACE = 7,
  TA_STATUS_TRANSPORT = 8,
  TA_STATUS_PANIC = 9,
} TaStatus;

typedef enum TaPromptMode {
  TA_PROMPT_MODE_PLAIN = 0,
  TA_PROMPT_MODE_CHAIN_OF_THOUGHT = 1,
} TaPromptMode;

/**
 * Trajectory and intention predictor.
 */
typedef struct TaPredictor TaPredictor;

/**
 * Parsed, validated driving scenario.
 */
typedef struct TaScenario TaScenario;

/**
 * Differential-evolution settings; start from [`ta_de_params_default`].
 */
typedef struct TaDeParams {
  size_t population;
  double mutation;
  double crossover;
  size_t generations;
  double budget;
} TaDeParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null after a success.
 * The pointer stays valid until the next call into this library.
 */
const char *ta_last_error(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library and not yet freed.
 */
void ta_string_free(char *s);

/**
 * Parses and validates a scenario from JSON.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum TaStatus ta_scenario_from_json(const char *json, struct TaScenario **out);

/**
 * Canonical JSON of a scenario.
 *
 * # Safety
 * `scenario` must be a live handle; `out` must be writable.
 */
enum TaStatus ta_scenario_to_json(const struct TaScenario *scenario, char **out);

/**
 * # Safety
 * `scenario` must be null or a handle from [`ta_scenario_from_json`] not yet freed.
 */
void ta_scenario_free(struct TaScenario *scenario);

/**
 * Renders the system and user messages for a scenario.
 *
 * # Safety
 * `scenario` must be a live handle; both `out` pointers must be writable.
 */
enum TaStatus ta_render_prompt(const struct TaScenario *scenario,
                               enum TaPromptMode mode,
                               char **out_system,
                               char **out_user);

/**
 * Parses a model response into prediction JSON
 * (`{"intention": ..., "trajectory": [[x, y], ...], "thought": ...}`).
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be writable.
 */
enum TaStatus ta_parse_response(const char *text, enum TaPromptMode mode, char **out);

/**
 * Rule-based stand-in predictor with default thresholds.
 */
struct TaPredictor *ta_surrogate_new(enum TaPromptMode mode);

/**
 * Chat-completion predictor configured from endpoint JSON (`base_url`,
 * `model`, `timeout_s`, `max_retries`, `temperature`, `backoff_ms`; all
 * optional). Environment overrides apply.
 *
 * # Safety
 * `config_json` must be a NUL-terminated string; `out` must be writable.
 */
enum TaStatus ta_remote_new(const char *config_json,
                            enum TaPromptMode mode,
                            struct TaPredictor **out);

/**
 * # Safety
 * `predictor` must be null or a handle from this library not yet freed.
 */
void ta_predictor_free(struct TaPredictor *predictor);

/**
 * Queries the predictor once. The JSON holds the raw response and either
 * `{"parsed": prediction}` or `{"failed": reason}` under `outcome`; an
 * unparseable response is still `TA_STATUS_OK`.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum TaStatus ta_predict(const struct TaPredictor *predictor,
                         const struct TaScenario *scenario,
                         char **out);

/**
 * Population 5, α 0.5, CR 0.9, 10 generations, Δ 0.1.
 */
struct TaDeParams ta_de_params_default(void);

/**
 * Runs the one-feature DE attack against `truth_json` (intention and
 * four-waypoint trajectory) and returns the attack result as JSON.
 * `params` may be null for the defaults.
 *
 * # Safety
 * Handles must be live, `truth_json` NUL-terminated, `params` null or
 * readable, and `out` writable.
 */
enum TaStatus ta_run_attack(const struct TaPredictor *predictor,
                            const struct TaScenario *scenario,
                            const char *truth_json,
                            const struct TaDeParams *params,
                            uint64_t seed,
                            char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TRAJATTACK_H */
