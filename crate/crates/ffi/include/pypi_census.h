#ifndef PYPI_CENSUS_H
#define PYPI_CENSUS_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum PcStatus {
  PC_STATUS_OK = 0,
  PC_STATUS_NULL_ARGUMENT = 1,
  PC_STATUS_INVALID_UTF8 = 2,
  PC_STATUS_INVALID_ARGUMENT = 3,
  PC_STATUS_NOT_FOUND = 4,
  PC_STATUS_STORE = 5,
  PC_STATUS_STATS = 6,
  PC_STATUS_PANIC = 7,
} PcStatus;

/**
 * Opaque handle to a license rule set.
 */
typedef struct PcLicenseRules PcLicenseRules;

/**
 * Opaque handle to an open census store.
 */
typedef struct PcStore PcStore;

/**
 * Five-number summary plus mean and standard deviation.
 */
typedef struct PcSummary {
  size_t n;
  double mean;
  double std;
  double min;
  double p25;
  double p50;
  double p75;
  double max;
} PcSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failure on this thread, or null. Valid until the next
 * call into this library from the same thread.
 */
const char *pc_last_error(void);

/**
 * Library version as a static string.
 */
const char *pc_version(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void pc_string_free(char *s);

/**
 * Opens (creating if needed) the store at `path`.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum PcStatus pc_store_open(const char *path, struct PcStore **out);

/**
 * Opens an empty in-memory store.
 *
 * # Safety
 * `out` must be writable.
 */
enum PcStatus pc_store_open_in_memory(struct PcStore **out);

/**
 * Closes a store. Null is ignored.
 *
 * # Safety
 * `store` must come from `pc_store_open*` and not have been freed.
 */
void pc_store_free(struct PcStore *store);

/**
 * Row counts per table as a JSON object.
 *
 * # Safety
 * `store` must be a live handle; `out` must be writable.
 */
enum PcStatus pc_store_counts_json(const struct PcStore *store, char **out);

/**
 * Runs a named view and returns `{"columns": [...], "rows": [[...]]}`.
 * `package` may be null; a negative `limit` means no limit.
 *
 * # Safety
 * `store` must be a live handle; `view` a NUL-terminated string; `package`
 * null or NUL-terminated; `out` writable.
 */
enum PcStatus pc_store_query_json(const struct PcStore *store,
                                  const char *view,
                                  const char *package,
                                  int64_t limit,
                                  char **out);

/**
 * Creates the built-in license rule set.
 *
 * # Safety
 * `out` must be writable.
 */
enum PcStatus pc_license_rules_new(struct PcLicenseRules **out);

/**
 * Releases a rule set. Null is ignored.
 *
 * # Safety
 * `rules` must come from `pc_license_rules_new` and not have been freed.
 */
void pc_license_rules_free(struct PcLicenseRules *rules);

/**
 * Normalizes a free-text license string to its canonical form, for
 * example `"GPLv2"` to `"GPL 2"`. Returns `NotFound` when no rule matches.
 *
 * # Safety
 * `rules` must be a live handle; `raw` NUL-terminated; `out` writable.
 */
enum PcStatus pc_license_normalize(const struct PcLicenseRules *rules, const char *raw, char **out);

/**
 * Detects a license from the text of a license file.
 *
 * # Safety
 * `rules` must be a live handle; `text_ptr` NUL-terminated; `out` writable.
 */
enum PcStatus pc_license_detect_text(const struct PcLicenseRules *rules,
                                     const char *text_ptr,
                                     char **out);

/**
 * Extracts import statements from Python source. The result is
 * `{"stage": "...", "statements": [...]}`.
 *
 * # Safety
 * `source` must be NUL-terminated; `out` writable.
 */
enum PcStatus pc_extract_imports_json(const char *source, char **out);

/**
 * Gini coefficient of `len` nonnegative values.
 *
 * # Safety
 * `values_ptr` must point to `len` doubles (may be null when `len` is 0);
 * `out` writable.
 */
enum PcStatus pc_gini(const double *values_ptr, size_t len, double *out);

/**
 * Compound annual growth rate `(end / start)^(1 / years) - 1`.
 *
 * # Safety
 * `out` must be writable.
 */
enum PcStatus pc_cagr(double start, double end, uint32_t years, double *out);

/**
 * Distribution summary of `len` values.
 *
 * # Safety
 * `values_ptr` must point to `len` doubles (may be null when `len` is 0);
 * `out` writable.
 */
enum PcStatus pc_distribution_summary(const double *values_ptr, size_t len, struct PcSummary *out);

/**
 * Runs the command-line tool with `argc` arguments (including the program
 * name) and returns its exit code. Returns -1 if an argument is null or not
 * UTF-8.
 *
 * # Safety
 * `argv` must point to `argc` NUL-terminated strings.
 */
int pc_cli_run(int argc, const char *const *argv);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PYPI_CENSUS_H */
