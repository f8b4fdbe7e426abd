#ifndef CAUSAL_FRAMES_H
#define CAUSAL_FRAMES_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define CF_FRAME_ALPHA 0

#define CF_FRAME_BETA 1

#define CF_FRAME_GAMMA 2

typedef enum CfStatus {
  CF_STATUS_OK = 0,
  CF_STATUS_NULL_POINTER = 1,
  CF_STATUS_INVALID_UTF8 = 2,
  CF_STATUS_PARSE = 3,
  CF_STATUS_DIMENSION = 4,
  /**
   * A state, POVM or channel failed validation.
   */
  CF_STATUS_VALIDATION = 5,
  CF_STATUS_INVALID_ARGUMENT = 6,
  /**
   * Eigensolver failure, exhausted retries or a broken internal invariant.
   */
  CF_STATUS_NUMERICAL = 7,
  CF_STATUS_BUFFER_TOO_SMALL = 8,
  CF_STATUS_PANIC = 9,
} CfStatus;

/**
 * Opaque result of a frame-equality check.
 */
typedef struct CfFrameReport CfFrameReport;

/**
 * Opaque scenario handle.
 */
typedef struct CfScenario CfScenario;

typedef struct CfFrameSummary {
  bool passed;
  double alpha_beta;
  double alpha_gamma;
  double beta_gamma;
  double choi;
  double star_acausal;
  double star_causal;
  double tol;
  double wall_time_secs;
} CfFrameSummary;

typedef struct CfNoSignallingSummary {
  bool passed;
  double max_deviation;
} CfNoSignallingSummary;

typedef struct CfBatchSummary {
  size_t n_trials;
  size_t passed;
  size_t failed;
  size_t errored;
  double worst_frame_deviation;
  double worst_no_signalling;
  double total_secs;
} CfBatchSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static nul-terminated string.
 */
const char *cf_version(void);

/**
 * Message for the last failing call on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *cf_last_error_message(void);

/**
 * Parse and validate a scenario from JSON text.
 */
enum CfStatus cf_scenario_from_json(const char *json, struct CfScenario **out);

/**
 * Built-in scenario by name: `stern-gerlach`, `depolarizing` or `bell`.
 */
enum CfStatus cf_scenario_preset(const char *name, struct CfScenario **out);

/**
 * Seeded random scenario with full-rank state and an alternative POVM for A.
 */
enum CfStatus cf_scenario_random(size_t d1,
                                 size_t d2,
                                 size_t n_kraus,
                                 uint64_t seed,
                                 struct CfScenario **out);

/**
 * Free a scenario. NULL is ignored.
 */
void cf_scenario_free(struct CfScenario *scenario);

enum CfStatus cf_scenario_dims(const struct CfScenario *scenario, size_t *d1, size_t *d2);

/**
 * Number of outcomes of A's and B's measurements.
 */
enum CfStatus cf_scenario_outcomes(const struct CfScenario *scenario, size_t *n_a, size_t *n_b);

/**
 * Serialize a scenario. Free the result with [`cf_string_free`].
 */
enum CfStatus cf_scenario_to_json(const struct CfScenario *scenario, char **out);

/**
 * Row-major `n_a x n_b` joint distribution in one frame (`CF_FRAME_*`).
 */
enum CfStatus cf_joint_probabilities(const struct CfScenario *scenario,
                                     uint32_t frame,
                                     double *out,
                                     size_t len);

/**
 * Run every frame and operator identity check. A report is produced even
 * when a check fails; inspect `passed` in its summary.
 */
enum CfStatus cf_verify_frames(const struct CfScenario *scenario,
                               double tol,
                               struct CfFrameReport **out);

void cf_frame_report_free(struct CfFrameReport *report);

enum CfStatus cf_frame_report_summary(const struct CfFrameReport *report,
                                      struct CfFrameSummary *out);

/**
 * The joint table a report holds for one frame, row-major.
 */
enum CfStatus cf_frame_report_joint(const struct CfFrameReport *report,
                                    uint32_t frame,
                                    double *out,
                                    size_t len);

/**
 * Full report as JSON. Free the result with [`cf_string_free`].
 */
enum CfStatus cf_frame_report_to_json(const struct CfFrameReport *report, char **out);

/**
 * Compare B's marginals under A's two measurements. The scenario needs an
 * alternative POVM for A.
 */
enum CfStatus cf_verify_no_signalling(const struct CfScenario *scenario,
                                      double tol,
                                      struct CfNoSignallingSummary *out);

/**
 * Frame equality on `n_trials` random scenarios seeded `seed, seed+1, ...`.
 */
enum CfStatus cf_batch_verify(size_t d1,
                              size_t d2,
                              size_t n_kraus,
                              size_t n_trials,
                              uint64_t seed,
                              double tol,
                              struct CfBatchSummary *out);

/**
 * Free a string returned by this library. NULL is ignored.
 */
void cf_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CAUSAL_FRAMES_H */
