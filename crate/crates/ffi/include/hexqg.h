#ifndef HEXQG_H
#define HEXQG_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes; the positive ones match the CLI exit codes.
 */
typedef enum HexqgStatus {
  HEXQG_STATUS_OK = 0,
  HEXQG_STATUS_IO = 1,
  HEXQG_STATUS_VALIDATION = 2,
  HEXQG_STATUS_NUMERIC = 3,
  HEXQG_STATUS_COVERAGE = 4,
  HEXQG_STATUS_NULL_POINTER = -1,
  HEXQG_STATUS_BUFFER_TOO_SMALL = -2,
  HEXQG_STATUS_INVALID_UTF8 = -3,
  HEXQG_STATUS_PANIC = -4,
} HexqgStatus;

/**
 * Forward-generated D-N dataset.
 */
typedef struct HexqgDataset HexqgDataset;

/**
 * Reconstruction report.
 */
typedef struct HexqgReport HexqgReport;

/**
 * Parsed and validated scenario.
 */
typedef struct HexqgScenario HexqgScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread (empty if none).
 *
 * # Safety
 * `buf` must point to `cap` writable bytes; `len_out` must be valid.
 */
enum HexqgStatus hexqg_last_error(char *buf, size_t cap, size_t *len_out);

/**
 * `s(λ) = φ(1, λ)` for the potential `Σ modes[m] cos(2πmz)`.
 *
 * # Safety
 * `modes` must point to `n_modes` doubles (may be null when `n_modes == 0`).
 */
enum HexqgStatus hexqg_s_value(const double *modes, size_t n_modes, double lambda, double *out);

/**
 * First `count` Dirichlet eigenvalues of the potential.
 *
 * # Safety
 * `modes` as in [`hexqg_s_value`]; `out` must hold `cap` doubles.
 */
enum HexqgStatus hexqg_dirichlet_spectrum(const double *modes,
                                          size_t n_modes,
                                          size_t count,
                                          double *out,
                                          size_t cap,
                                          size_t *len_out);

/**
 * Parse and validate a scenario from JSON text.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be valid.
 */
enum HexqgStatus hexqg_scenario_from_json(const char *json, struct HexqgScenario **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be valid.
 */
enum HexqgStatus hexqg_scenario_load(const char *path, struct HexqgScenario **out);

/**
 * # Safety
 * `sc` must come from a scenario constructor and not be used afterwards.
 */
void hexqg_scenario_free(struct HexqgScenario *sc);

/**
 * Hex SHA-256 of the canonical scenario JSON.
 *
 * # Safety
 * `sc` must be a live handle; `buf` must hold `cap` bytes.
 */
enum HexqgStatus hexqg_scenario_hash(const struct HexqgScenario *sc,
                                     char *buf,
                                     size_t cap,
                                     size_t *len_out);

/**
 * Vertex-model D-N map of the scenario's domain at `lambda`, row-major;
 * `*dim_out` receives the number of boundary vertices.
 *
 * # Safety
 * `sc` must be a live handle; `out` must hold `cap` doubles.
 */
enum HexqgStatus hexqg_dn_map(const struct HexqgScenario *sc,
                              double lambda,
                              double *out,
                              size_t cap,
                              size_t *len_out,
                              size_t *dim_out);

/**
 * Forward-generate the scenario's dataset.
 *
 * # Safety
 * `sc` must be a live handle; `out` must be valid.
 */
enum HexqgStatus hexqg_forward(const struct HexqgScenario *sc, struct HexqgDataset **out);

/**
 * # Safety
 * `ds` must be a live handle; `path` a NUL-terminated string.
 */
enum HexqgStatus hexqg_dataset_save(const struct HexqgDataset *ds, const char *path);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be valid.
 */
enum HexqgStatus hexqg_dataset_load(const char *path, struct HexqgDataset **out);

/**
 * Number of D-N records.
 *
 * # Safety
 * `ds` must be a live handle.
 */
enum HexqgStatus hexqg_dataset_len(const struct HexqgDataset *ds, size_t *out);

/**
 * # Safety
 * `ds` must come from a dataset constructor and not be used afterwards.
 */
void hexqg_dataset_free(struct HexqgDataset *ds);

/**
 * Reconstruct with forward solves on demand.  On a stage failure the
 * partial report is still returned through `out`.
 *
 * # Safety
 * `sc` must be a live handle; `out` must be valid.
 */
enum HexqgStatus hexqg_invert_live(const struct HexqgScenario *sc, struct HexqgReport **out);

/**
 * Reconstruct from recorded D-N maps only.
 *
 * # Safety
 * `ds` must be a live handle; `out` must be valid.
 */
enum HexqgStatus hexqg_invert_dataset(const struct HexqgDataset *ds, struct HexqgReport **out);

/**
 * # Safety
 * `r` must be a live handle.
 */
enum HexqgStatus hexqg_report_edge_count(const struct HexqgReport *r, size_t *out);

/**
 * Recovered cosine coefficients of edge `index`.
 *
 * # Safety
 * `r` must be a live handle; `out` must hold `cap` doubles.
 */
enum HexqgStatus hexqg_report_edge_modes(const struct HexqgReport *r,
                                         size_t index,
                                         double *out,
                                         size_t cap,
                                         size_t *len_out);

/**
 * Largest coefficient error against the scenario's true potentials
 * (NaN when there is nothing to compare).
 *
 * # Safety
 * `r` must be a live handle.
 */
enum HexqgStatus hexqg_report_max_error(const struct HexqgReport *r, double *out);

/**
 * The report as JSON.
 *
 * # Safety
 * `r` must be a live handle; `buf` must hold `cap` bytes.
 */
enum HexqgStatus hexqg_report_json(const struct HexqgReport *r,
                                   char *buf,
                                   size_t cap,
                                   size_t *len_out);

/**
 * # Safety
 * `r` must come from an inversion call and not be used afterwards.
 */
void hexqg_report_free(struct HexqgReport *r);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HEXQG_H */
