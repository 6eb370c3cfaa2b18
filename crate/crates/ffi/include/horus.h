#ifndef HORUS_H
#define HORUS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HorusPolicy {
  HORUS_POLICY_MAXIMUM_CONFIDENCE = 0,
  HORUS_POLICY_SIMPLE_AVERAGE = 1,
  HORUS_POLICY_CONFIDENCE_WEIGHTED = 2,
} HorusPolicy;

typedef enum HorusStatus {
  HORUS_STATUS_OK = 0,
  /**
   * Fusion had no usable source; outputs are left untouched.
   */
  HORUS_STATUS_DEGENERATE = 1,
  HORUS_STATUS_NULL_POINTER = -1,
  HORUS_STATUS_INVALID_UTF8 = -2,
  HORUS_STATUS_PARSE = -3,
  HORUS_STATUS_INVALID_ARGUMENT = -4,
  HORUS_STATUS_IO = -5,
  HORUS_STATUS_BUFFER_TOO_SMALL = -6,
  HORUS_STATUS_PANIC = -7,
} HorusStatus;

/**
 * Opaque PID controller state plus gains.
 */
typedef struct HorusPid HorusPid;

/**
 * Opaque latest-command table of the vehicle node.
 */
typedef struct HorusRegistry HorusRegistry;

/**
 * Opaque validated scenario.
 */
typedef struct HorusScenario HorusScenario;

/**
 * One steering report: left and right power, confidence, then the P, I and
 * D terms that produced it.
 */
typedef struct HorusCommand {
  double left;
  double right;
  double confidence;
  double p;
  double i;
  double d;
} HorusCommand;

typedef struct HorusPidOutput {
  double correction;
  double integral;
  double derivative;
} HorusPidOutput;

/**
 * Headline numbers of one run. `crash_time` is NaN when the run completed;
 * means are NaN when no sample was recorded.
 */
typedef struct HorusRunSummary {
  bool completed;
  double crash_time;
  double end_time;
  uint64_t samples;
  double mean_abs_deviation;
  double mean_abs_correction;
} HorusRunSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` (NUL
 * terminated, truncated to fit) and returns its full length in bytes.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t horus_last_error(char *buf, size_t len);

/**
 * Encodes `cmd` as `l;r;err;P;I;D`. `written` receives the text length
 * without the terminator; on `HORUS_STATUS_BUFFER_TOO_SMALL` it holds the
 * required length.
 *
 * # Safety
 * `cmd` and `written` must be valid; `buf` must point to `len` bytes.
 */
enum HorusStatus horus_encode_command(const struct HorusCommand *cmd,
                                      char *buf,
                                      size_t len,
                                      size_t *written);

/**
 * # Safety
 * `text` must be a NUL-terminated string and `out` valid for writes.
 */
enum HorusStatus horus_decode_command(const char *text, struct HorusCommand *out);

/**
 * Heading from the green (rear) to the orange (front) marker, degrees in
 * `[0, 360)`, image coordinates.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum HorusStatus horus_compute_robot_angle(double green_x,
                                           double green_y,
                                           double orange_x,
                                           double orange_y,
                                           double *out);

double horus_disambiguate_line_angle(double width,
                                     double height,
                                     double raw_angle,
                                     double vehicle_angle);

double horus_direction_fix(double line_angle, double vehicle_angle);

double horus_position_fix(double front_x,
                          double front_y,
                          double line_x,
                          double line_y,
                          double vehicle_angle);

/**
 * Creates a controller with a fresh state. `decay` must lie in `[0, 1)`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum HorusStatus horus_pid_new(double kp,
                               double ki,
                               double kd,
                               double decay,
                               struct HorusPid **out);

/**
 * One controller step. `external_derivative` is used when
 * `has_external_derivative` is true, otherwise the error difference is.
 *
 * # Safety
 * `pid` must come from `horus_pid_new`; `out` must be valid for writes.
 */
enum HorusStatus horus_pid_update(struct HorusPid *pid,
                                  double error,
                                  bool has_external_derivative,
                                  double external_derivative,
                                  struct HorusPidOutput *out);

/**
 * # Safety
 * `pid` must be null or come from `horus_pid_new`, and not be used again.
 */
void horus_pid_free(struct HorusPid *pid);

/**
 * Registry with the onboard slot and `infra_count` camera slots (at least
 * two).
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum HorusStatus horus_registry_new(size_t infra_count, struct HorusRegistry **out);

/**
 * Stores a received (unscaled) command for `source`.
 *
 * # Safety
 * `reg` must come from `horus_registry_new`; `cmd` must be valid.
 */
enum HorusStatus horus_registry_ingest(struct HorusRegistry *reg,
                                       size_t source,
                                       const struct HorusCommand *cmd,
                                       double now);

/**
 * Fused (scaled, untruncated) left and right power under `policy`.
 *
 * # Safety
 * `reg` must come from `horus_registry_new`; outputs must be valid.
 */
enum HorusStatus horus_registry_fuse(const struct HorusRegistry *reg,
                                     enum HorusPolicy policy,
                                     double *left,
                                     double *right);

/**
 * # Safety
 * `reg` must be null or come from `horus_registry_new`, and not be used again.
 */
void horus_registry_free(struct HorusRegistry *reg);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be valid for writes.
 */
enum HorusStatus horus_scenario_load(const char *path, struct HorusScenario **out);

/**
 * # Safety
 * `toml` must be a NUL-terminated string; `out` must be valid for writes.
 */
enum HorusStatus horus_scenario_from_toml(const char *toml, struct HorusScenario **out);

/**
 * Seed stored in the scenario file.
 *
 * # Safety
 * `sc` must come from a `horus_scenario_*` constructor.
 */
uint64_t horus_scenario_seed(const struct HorusScenario *sc);

/**
 * Runs the scenario on the simulated network. When `out_dir` is not null
 * the run's CSV logs and summary are written there.
 *
 * # Safety
 * `sc` must come from a `horus_scenario_*` constructor; `out_dir` must be
 * null or a NUL-terminated string; `summary` must be valid for writes.
 */
enum HorusStatus horus_scenario_run(const struct HorusScenario *sc,
                                    uint64_t seed,
                                    const char *out_dir,
                                    struct HorusRunSummary *summary);

/**
 * # Safety
 * `sc` must be null or come from a `horus_scenario_*` constructor, and not
 * be used again.
 */
void horus_scenario_free(struct HorusScenario *sc);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HORUS_H */
