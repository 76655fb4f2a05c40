#ifndef SNN_TUNE_H
#define SNN_TUNE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SntStatus {
  SNT_STATUS_OK = 0,
  SNT_STATUS_NULL_POINTER = 1,
  SNT_STATUS_INVALID_UTF8 = 2,
  SNT_STATUS_PARSE = 3,
  SNT_STATUS_VALIDATION = 4,
  SNT_STATUS_UNKNOWN_PRESET = 5,
  SNT_STATUS_DIVERGENCE = 6,
  SNT_STATUS_PARAMETER = 7,
  SNT_STATUS_IO = 8,
  SNT_STATUS_FINISHED = 9,
  SNT_STATUS_INTERNAL = 10,
} SntStatus;

/**
 * A built network plus the recording of the steps taken so far.
 */
typedef struct SntNetwork SntNetwork;

typedef struct SntRecording SntRecording;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *snt_last_error(void);

/**
 * Builds a network from a JSON spec.
 *
 * # Safety
 * `spec_json` must be a NUL-terminated string; `out` must be writable.
 */
enum SntStatus snt_network_from_json(const char *spec_json, struct SntNetwork **out);

/**
 * Builds the network of a catalog preset.
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be writable.
 */
enum SntStatus snt_network_from_preset(const char *name, struct SntNetwork **out);

/**
 * # Safety
 * `network` must come from this library and not be used afterwards.
 */
void snt_network_free(struct SntNetwork *network);

/**
 * Advances one step. `spikes_out`, if not NULL, receives the number of
 * spikes emitted across all populations. Returns `Finished` once the
 * configured duration is exhausted.
 *
 * # Safety
 * `network` must be a live handle.
 */
enum SntStatus snt_network_step(struct SntNetwork *network, uint64_t *spikes_out);

/**
 * Runs the remaining steps and returns the whole recording. On divergence
 * the partial recording is still returned together with `Divergence`.
 *
 * # Safety
 * `network` must be a live handle; `out` must be writable.
 */
enum SntStatus snt_network_run(struct SntNetwork *network, struct SntRecording **out);

/**
 * Changes a numeric parameter before the next step, e.g.
 * `projections.inh_to_exc.weight`. Out-of-range neuron parameters give
 * `Validation`; unknown paths and sign flips give `Parameter`.
 *
 * # Safety
 * `network` must be a live handle; `path` a NUL-terminated string.
 */
enum SntStatus snt_network_set_param(struct SntNetwork *network, const char *path, double value);

/**
 * Steps executed so far, 0 for NULL.
 *
 * # Safety
 * `network` must be NULL or a live handle.
 */
uint64_t snt_network_current_step(const struct SntNetwork *network);

/**
 * Configured number of steps, 0 for NULL.
 *
 * # Safety
 * `network` must be NULL or a live handle.
 */
uint64_t snt_network_total_steps(const struct SntNetwork *network);

/**
 * Validates a JSON spec. `diagnostics_out` receives a JSON array of
 * diagnostics; the status is `Validation` when any of them is an error.
 *
 * # Safety
 * `spec_json` must be a NUL-terminated string; `diagnostics_out` writable.
 */
enum SntStatus snt_validate(const char *spec_json, char **diagnostics_out);

/**
 * Runs a catalog preset with its expectations; `report_out` receives the
 * JSON report. Failed expectations are reported, not signalled by status.
 *
 * # Safety
 * `name` must be a NUL-terminated string; `report_out` writable.
 */
enum SntStatus snt_preset_run(const char *name, char **report_out);

/**
 * # Safety
 * `recording` must be a live handle; `out` writable.
 */
enum SntStatus snt_recording_to_json(const struct SntRecording *recording, char **out);

/**
 * One JSON object per spike event.
 *
 * # Safety
 * `recording` must be a live handle; `out` writable.
 */
enum SntStatus snt_recording_events_ndjson(const struct SntRecording *recording, char **out);

/**
 * Spike events across all populations, 0 for NULL.
 *
 * # Safety
 * `recording` must be NULL or a live handle.
 */
uint64_t snt_recording_event_count(const struct SntRecording *recording);

/**
 * Writes exports into `dir` in `format` (`ndjson`, `csv` or `svg`).
 *
 * # Safety
 * `recording` must be a live handle; `dir` and `format` NUL-terminated.
 */
enum SntStatus snt_recording_export(const struct SntRecording *recording,
                                    const char *dir,
                                    const char *format);

/**
 * # Safety
 * `recording` must come from this library and not be used afterwards.
 */
void snt_recording_free(struct SntRecording *recording);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `text` must come from this library and not be used afterwards.
 */
void snt_string_free(char *text);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SNN_TUNE_H */
