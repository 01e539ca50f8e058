#ifndef TRAFFICLENS_H
#define TRAFFICLENS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Result code of every fallible call.
typedef enum TlStatus {
  TL_STATUS_OK = 0,
  TL_STATUS_NULL_POINTER = 1,
  TL_STATUS_INVALID_UTF8 = 2,
  TL_STATUS_INVALID_ARGUMENT = 3,
  TL_STATUS_OUT_OF_RANGE = 4,
  TL_STATUS_STORAGE = 5,
  TL_STATUS_ANALYSIS = 6,
  TL_STATUS_PANIC = 7,
} TlStatus;

typedef enum TlDayType {
  TL_DAY_TYPE_WEEKDAY = 0,
  TL_DAY_TYPE_WEEKEND = 1,
} TlDayType;

// Accumulates observations and analysis settings.
typedef struct TlAnalysis TlAnalysis;

// Result of [`tl_analysis_run`].
typedef struct TlReport TlReport;

// One report row. `source` and `window` point into the report and stay valid
// until it is freed. Optional values carry a `has_` flag; hours are local.
typedef struct TlReportRow {
  const char *source;
  enum TlDayType day_type;
  const char *window;
  bool has_peak_before;
  double peak_before;
  uint8_t hour_before;
  bool has_peak_after;
  double peak_after;
  uint8_t hour_after;
  bool has_delta;
  double delta;
} TlReportRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or NULL. The pointer is
// valid until the next call into this library from the same thread.
const char *tl_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *tl_version(void);

// Creates an analysis with the default peak windows.
//
// `tz` may be NULL for America/New_York. Returns NULL on invalid input.
//
// # Safety
// `tz` must be NULL or a NUL-terminated string.
struct TlAnalysis *tl_analysis_new(size_t window_size, int64_t split_unix_ms, const char *tz);

// Replaces the peak windows with a list like `Morning=6-9,Evening=16-19`.
//
// # Safety
// `analysis` must come from [`tl_analysis_new`]; `spec` must be NUL-terminated.
enum TlStatus tl_analysis_set_windows(struct TlAnalysis *analysis, const char *spec);

// Restricts the analysed value to one class (`car`, `bus`, ...) or `total`.
//
// # Safety
// `analysis` must come from [`tl_analysis_new`]; `class` must be NUL-terminated.
enum TlStatus tl_analysis_set_class(struct TlAnalysis *analysis, const char *class_);

// Adds one observation. `counts` points to five values in the order
// bicycle, car, motorcycle, bus, truck.
//
// # Safety
// `analysis` must come from [`tl_analysis_new`], `source` must be
// NUL-terminated and `counts` must point to five readable `uint32_t`.
enum TlStatus tl_analysis_add_observation(struct TlAnalysis *analysis,
                                          const char *source,
                                          int64_t captured_at_unix_ms,
                                          const uint32_t *counts);

// Adds every stored observation from a database written by `collect` or
// `import`.
//
// # Safety
// `analysis` must come from [`tl_analysis_new`]; `path` must be NUL-terminated.
enum TlStatus tl_analysis_load_db(struct TlAnalysis *analysis, const char *path);

// Number of observations added so far, or 0 for NULL.
//
// # Safety
// `analysis` must be NULL or come from [`tl_analysis_new`].
size_t tl_analysis_observation_count(const struct TlAnalysis *analysis);

// Computes the report. On success `*out` receives a handle to free with
// [`tl_report_free`]; on failure it is set to NULL.
//
// # Safety
// `analysis` must come from [`tl_analysis_new`]; `out` must be writable.
enum TlStatus tl_analysis_run(const struct TlAnalysis *analysis, struct TlReport **out);

// Releases an analysis. NULL is ignored.
//
// # Safety
// `analysis` must be NULL or come from [`tl_analysis_new`] and not be used
// afterwards.
void tl_analysis_free(struct TlAnalysis *analysis);

// Number of rows, or 0 for NULL.
//
// # Safety
// `report` must be NULL or come from [`tl_analysis_run`].
size_t tl_report_len(const struct TlReport *report);

// Copies row `index` into `*row`. Rows are sorted by source, day type and
// window label.
//
// # Safety
// `report` must come from [`tl_analysis_run`]; `row` must be writable.
enum TlStatus tl_report_row(const struct TlReport *report, size_t index, struct TlReportRow *row);

// Report as CSV (header included). Free the result with [`tl_string_free`].
// Returns NULL on failure.
//
// # Safety
// `report` must come from [`tl_analysis_run`].
char *tl_report_to_csv(const struct TlReport *report);

// Releases a report. NULL is ignored.
//
// # Safety
// `report` must be NULL or come from [`tl_analysis_run`] and not be used
// afterwards, including row string pointers.
void tl_report_free(struct TlReport *report);

// Releases a string returned by this library. NULL is ignored.
//
// # Safety
// `s` must be NULL or come from [`tl_report_to_csv`].
void tl_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TRAFFICLENS_H */
