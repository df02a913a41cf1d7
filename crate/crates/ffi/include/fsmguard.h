#ifndef FSMGUARD_H
#define FSMGUARD_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes.
typedef enum FsmStatus {
  FSM_STATUS_OK = 0,
  FSM_STATUS_NULL_POINTER = 1,
  FSM_STATUS_INVALID_UTF8 = 2,
  FSM_STATUS_PARSE_ERROR = 3,
  FSM_STATUS_INVALID_ARGUMENT = 4,
  FSM_STATUS_INJECT_FAILED = 5,
  // The check ran and found at least one violation.
  FSM_STATUS_VIOLATIONS = 6,
  FSM_STATUS_INTERNAL = 7,
} FsmStatus;

// Opaque parsed design.
typedef struct FsmDesign FsmDesign;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *fsmguard_version(void);

// Message for the last failing call on this thread, or NULL. The pointer is
// valid until the next call into the library on the same thread.
const char *fsmguard_last_error(void);

// Parses Verilog source. `origin` may be NULL.
//
// # Safety
// `source` and `origin` must be NULL or valid NUL-terminated strings; `out`
// must be a valid pointer.
enum FsmStatus fsmguard_parse(const char *source, const char *origin, struct FsmDesign **out);

// Releases a design handle. NULL is ignored.
//
// # Safety
// `design` must be NULL or a handle from this library not yet freed.
void fsmguard_design_free(struct FsmDesign *design);

// Releases a string returned by this library. NULL is ignored.
//
// # Safety
// `s` must be NULL or a string from this library not yet freed.
void fsmguard_string_free(char *s);

// Canonical Verilog for a design.
//
// # Safety
// `design` must be a live handle and `out` a valid pointer.
enum FsmStatus fsmguard_emit(const struct FsmDesign *design, char **out);

// Runs the checker and writes the JSON report to `out`. `protected_csv` is
// a comma-separated list of extra protected states, or NULL. Returns
// `Violations` when the report is non-empty; `out` is filled either way.
//
// # Safety
// `design` must be a live handle, `protected_csv` NULL or a valid string,
// `out` a valid pointer.
enum FsmStatus fsmguard_check_json(const struct FsmDesign *design,
                                   const char *protected_csv,
                                   bool enable_fif,
                                   char **out);

// Injects a vulnerability of class `vuln` (e.g. `STATIC_DEADLOCK`). On
// success `out_design` receives a new handle and `out_plan`, if not NULL,
// the injection plan as JSON.
//
// # Safety
// `design` must be a live handle, `vuln` a valid string, `out_design` a
// valid pointer, `out_plan` NULL or a valid pointer.
enum FsmStatus fsmguard_inject(const struct FsmDesign *design,
                               const char *vuln,
                               uint64_t seed,
                               struct FsmDesign **out_design,
                               char **out_plan);

// Runs the mitigator and writes the outcome as JSON to `out`.
//
// # Safety
// Same contract as [`fsmguard_check_json`].
enum FsmStatus fsmguard_mitigate(const struct FsmDesign *design,
                                 const char *protected_csv,
                                 char **out);

// FIF of one transition given three binary encodings of equal width.
// Writes 0 or 1 to `out`.
//
// # Safety
// All string arguments must be valid; `out` must be a valid pointer.
enum FsmStatus fsmguard_fif(const char *bx, const char *by, const char *bp, uint8_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FSMGUARD_H */
