#ifndef TLFW_H
#define TLFW_H

/* Generated by cbindgen from the tlfw-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Planning mode selector for `tlfw_run_options`.
 */
typedef enum TlfwMode {
  /**
   * Layered: clusters, head tour, joint composition.
   */
  TLFW_MODE_LAYERED = 0,
  /**
   * Single-layer baseline: tour every occupied cell.
   */
  TLFW_MODE_BASELINE = 1,
} TlfwMode;

/**
 * Status codes returned by every fallible call.
 */
typedef enum TlfwStatus {
  TLFW_STATUS_OK = 0,
  /**
   * Malformed input (bad JSON, bad arguments, violated invariants).
   */
  TLFW_STATUS_INVALID = 1,
  /**
   * The requested schedule does not exist for this deployment.
   */
  TLFW_STATUS_INFEASIBLE = 2,
  /**
   * A required pointer argument was null.
   */
  TLFW_STATUS_NULL_ARGUMENT = 3,
  /**
   * An internal invariant failed; details via `tlfw_last_error_message`.
   */
  TLFW_STATUS_INTERNAL = 4,
} TlfwStatus;

/**
 * Opaque run-report handle.
 */
typedef struct TlfwReport TlfwReport;

/**
 * Opaque deployment handle.
 */
typedef struct TlfwScenario TlfwScenario;

/**
 * Options for `tlfw_run`; obtain defaults from `tlfw_run_options_default`.
 */
typedef struct TlfwRunOptions {
  enum TlfwMode mode;
  uint32_t clusters;
  uint64_t seed;
  uint32_t restarts;
  /**
   * 0 = centroid snap, 1 = exact medoid.
   */
  uint32_t medoid_update;
  double seg_max;
  /**
   * Flow-target pruning; negative picks the mode default (0 / 6).
   */
  int32_t prune_k;
  uint32_t jobs;
  /**
   * Simulation timestep.
   */
  double dt;
  /**
   * Simulated periods; 0 skips simulation.
   */
  uint32_t periods;
} TlfwRunOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread. Valid until the next
 * failing call on the same thread.
 */
const char *tlfw_last_error_message(void);

/**
 * Parse a scenario document (JSON). On success the handle must be released
 * with `tlfw_scenario_free`.
 *
 * # Safety
 * `json` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum TlfwStatus tlfw_scenario_from_json(const char *json, struct TlfwScenario **out);

/**
 * The built-in 50-node reference deployment.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum TlfwStatus tlfw_scenario_builtin_table1(struct TlfwScenario **out);

/**
 * Random deployment: `n` nodes uniform on `width x height`, rates uniform
 * in [rate_min, rate_max], default physical parameters.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum TlfwStatus tlfw_scenario_generate(uint64_t seed,
                                       uint32_t n,
                                       double width,
                                       double height,
                                       double rate_min,
                                       double rate_max,
                                       struct TlfwScenario **out);

/**
 * Node count of a scenario handle; 0 for null.
 *
 * # Safety
 * `scenario` must be a live handle or null.
 */
uint32_t tlfw_scenario_node_count(const struct TlfwScenario *scenario);

/**
 * Serialize the scenario back to its JSON document form.
 *
 * # Safety
 * `scenario` must be a live handle; `out` a valid pointer.
 */
enum TlfwStatus tlfw_scenario_to_json(const struct TlfwScenario *scenario, char **out);

/**
 * Release a scenario handle.
 *
 * # Safety
 * `scenario` must be a handle from this library or null.
 */
void tlfw_scenario_free(struct TlfwScenario *scenario);

/**
 * Defaults matching the command-line tool.
 */
struct TlfwRunOptions tlfw_run_options_default(void);

/**
 * Plan a schedule. Returns `Infeasible` when the layered composition does
 * not exist; the report (with the failure reason embedded) is still
 * produced in that case.
 *
 * # Safety
 * All pointers must be valid; `options` may be null for defaults.
 */
enum TlfwStatus tlfw_run(const struct TlfwScenario *scenario,
                         const struct TlfwRunOptions *options,
                         struct TlfwReport **out);

/**
 * Parse a previously produced report document.
 *
 * # Safety
 * `json` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum TlfwStatus tlfw_report_from_json(const char *json, struct TlfwReport **out);

/**
 * Serialize a report to JSON.
 *
 * # Safety
 * `report` must be a live handle; `out` a valid pointer.
 */
enum TlfwStatus tlfw_report_to_json(const struct TlfwReport *report, char **out);

/**
 * Render a report as an SVG document.
 *
 * # Safety
 * `report` must be a live handle; `out` a valid pointer.
 */
enum TlfwStatus tlfw_report_render_svg(const struct TlfwReport *report, char **out);

/**
 * Re-simulate a report and check battery limits. `pass` receives 1 when
 * every node stays above the floor with steady period ends.
 *
 * # Safety
 * `report` and `pass` must be valid pointers.
 */
enum TlfwStatus tlfw_validate(const struct TlfwReport *report,
                              double dt,
                              uint32_t periods,
                              int32_t *pass);

/**
 * Release a report handle.
 *
 * # Safety
 * `report` must be a handle from this library or null.
 */
void tlfw_report_free(struct TlfwReport *report);

/**
 * Release a string produced by this library.
 *
 * # Safety
 * `s` must come from this library or be null.
 */
void tlfw_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TLFW_H */
