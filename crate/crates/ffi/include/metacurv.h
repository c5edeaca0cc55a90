#ifndef METACURV_H
#define METACURV_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum McCommand {
  MC_COMMAND_VALIDATE = 0,
  MC_COMMAND_CONNECTION = 1,
  MC_COMMAND_HAWKINS = 2,
  MC_COMMAND_METACURVATURE = 3,
  MC_COMMAND_TENSOR_T = 4,
  MC_COMMAND_RECONSTRUCT = 5,
} McCommand;

typedef enum McStatus {
  MC_STATUS_OK = 0,
  MC_STATUS_NULL_POINTER = 1,
  MC_STATUS_INVALID_UTF8 = 2,
  MC_STATUS_INVALID_CHART = 3,
  MC_STATUS_UNKNOWN_CHART = 4,
  MC_STATUS_UNKNOWN_COMMAND = 5,
  MC_STATUS_PANIC = 6,
} McStatus;

/**
 * Opaque chart handle.
 */
typedef struct McChart McChart;

/**
 * Non-positive `tol`/`step` and zero `grid` select the defaults.
 */
typedef struct McOptions {
  double tol;
  size_t grid;
  double step;
  uint64_t seed;
} McOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Parses a chart document. The handle is released with [`mc_chart_free`].
 *
 * # Safety
 * `json` must be a nul-terminated string and `out` a valid pointer.
 */
enum McStatus mc_chart_from_json(const char *json, struct McChart **out);

/**
 * Opens one of the charts shipped with the library by name.
 *
 * # Safety
 * `name` must be a nul-terminated string and `out` a valid pointer.
 */
enum McStatus mc_chart_bundled(const char *name, struct McChart **out);

/**
 * # Safety
 * `chart` must come from this library and not be freed twice.
 */
void mc_chart_free(struct McChart *chart);

/**
 * Number of chart coordinates, zero for a null handle.
 *
 * # Safety
 * `chart` must be null or a live handle.
 */
size_t mc_chart_dim(const struct McChart *chart);

/**
 * Runs `command`, an [`McCommand`] value, on the chart. The JSON report
 * goes to `report` (release it with [`mc_string_free`]) and the exit code of
 * the equivalent command-line call to `exit_code`.
 *
 * # Safety
 * `chart` must be a live handle; `options` may be null; `report` and
 * `exit_code` must be valid pointers.
 */
enum McStatus mc_run(const struct McChart *chart,
                     uint32_t command,
                     const struct McOptions *options,
                     char **report,
                     int32_t *exit_code);

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call into the library.
 */
const char *mc_last_error(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library.
 */
void mc_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* METACURV_H */
