#ifndef MMIMO_EMF_H
#define MMIMO_EMF_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MmimoStatus {
  MMIMO_STATUS_OK = 0,
  MMIMO_STATUS_NULL_POINTER = 1,
  MMIMO_STATUS_INVALID_ARGUMENT = 2,
  MMIMO_STATUS_CONFIG = 3,
  MMIMO_STATUS_VALIDATION = 4,
  MMIMO_STATUS_RUNTIME = 5,
  MMIMO_STATUS_IO = 6,
  MMIMO_STATUS_BUFFER_TOO_SMALL = 7,
  MMIMO_STATUS_PANIC = 8,
} MmimoStatus;

// Opaque run configuration.
typedef struct MmimoConfig MmimoConfig;

// Opaque heat map: field values in V/m over the probe grid.
typedef struct MmimoHeatmap MmimoHeatmap;

typedef struct MmimoCompliance {
  double limit_vpm;
  size_t exceed_count;
  double exceed_fraction;
  // `-INFINITY` for an all-zero map.
  double worst_margin_db;
} MmimoCompliance;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or NULL. The pointer stays
// valid until the next failing call on the same thread.
const char *mmimo_last_error(void);

// New config holding the shipped defaults. Never NULL.
struct MmimoConfig *mmimo_config_default(void);

// Loads a TOML config into `*out`.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum MmimoStatus mmimo_config_load(const char *path, struct MmimoConfig **out);

// # Safety
// `cfg` must come from this library.
enum MmimoStatus mmimo_config_set_seed(struct MmimoConfig *cfg, uint64_t seed);

// Multiplies every computed field value by `calibration`.
//
// # Safety
// `cfg` must come from this library.
enum MmimoStatus mmimo_config_set_calibration(struct MmimoConfig *cfg, double calibration);

// # Safety
// `cfg` must come from this library or be NULL; it must not be used after.
void mmimo_config_free(struct MmimoConfig *cfg);

// Number of scenarios a run of `cfg` would execute.
//
// # Safety
// `cfg` must come from this library or be NULL (returns 0).
size_t mmimo_scenario_count(const struct MmimoConfig *cfg);

// Validates `cfg`, storing the number of findings in `*findings`. Returns
// `MMIMO_STATUS_VALIDATION` when there is at least one; the findings are
// then listed in `mmimo_last_error`.
//
// # Safety
// `cfg` must come from this library; `findings` may be NULL.
enum MmimoStatus mmimo_validate(const struct MmimoConfig *cfg, size_t *findings);

// Runs `cfg` and writes all artifacts and `manifest.json` into `out_dir`.
//
// # Safety
// `cfg` must come from this library; `out_dir` must be NUL-terminated.
enum MmimoStatus mmimo_run(const struct MmimoConfig *cfg, const char *out_dir);

// Heat map of scenario `scenario_id` under `cfg`, stored in `*out`.
//
// # Safety
// `cfg` must come from this library, `scenario_id` must be NUL-terminated
// and `out` valid.
enum MmimoStatus mmimo_heatmap_compute(const struct MmimoConfig *cfg,
                                       const char *scenario_id,
                                       struct MmimoHeatmap **out);

// Number of grid points, or 0 for NULL.
//
// # Safety
// `map` must come from this library or be NULL.
size_t mmimo_heatmap_len(const struct MmimoHeatmap *map);

// Copies field values (V/m) and, when non-NULL, the grid `x`/`y`
// coordinates (m) in row-major grid order. Each buffer must hold
// `mmimo_heatmap_len` entries; `len` is their capacity.
//
// # Safety
// Buffers must be valid for `len` writes.
enum MmimoStatus mmimo_heatmap_values(const struct MmimoHeatmap *map,
                                      double *values,
                                      double *x,
                                      double *y,
                                      size_t len);

// # Safety
// `map` must come from this library or be NULL; it must not be used after.
void mmimo_heatmap_free(struct MmimoHeatmap *map);

// Checks `map` against `region` from the limit table of `cfg`.
//
// # Safety
// Handles must come from this library, `region` must be NUL-terminated and
// `out` valid.
enum MmimoStatus mmimo_check_compliance(const struct MmimoConfig *cfg,
                                        const struct MmimoHeatmap *map,
                                        const char *region,
                                        struct MmimoCompliance *out);

// RMS field (V/m) from received power (W) on a probe of linear gain
// `gain` at `frequency_hz`.
//
// # Safety
// `out` must be valid.
enum MmimoStatus mmimo_power_to_field(double power_w,
                                      double frequency_hz,
                                      double gain,
                                      double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MMIMO_EMF_H */
