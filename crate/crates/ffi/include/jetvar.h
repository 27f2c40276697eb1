#ifndef JETVAR_H
#define JETVAR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every call.
typedef enum JvStatus {
  JV_STATUS_OK = 0,
  // Syntax, unknown-coordinate, order or other input errors.
  JV_STATUS_INPUT_ERROR = 1,
  // The command ran but one of its checks failed; the report is still
  // returned.
  JV_STATUS_VERIFICATION_FAILED = 2,
  JV_STATUS_NULL_POINTER = 3,
  JV_STATUS_INVALID_UTF8 = 4,
  // A Rust panic was caught at the boundary.
  JV_STATUS_PANIC = 5,
} JvStatus;

// Opaque expression handle.
typedef struct JvExpr JvExpr;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Parses an expression. Any identifier is admitted: coordinate names
// denote coordinates, others become free symbols.
//
// # Safety
// `src` must be a NUL-terminated string; `out` must be writable.
enum JvStatus jv_expr_parse(const char *src, struct JvExpr **out);

// Canonical normal form (fully expanded).
//
// # Safety
// `e` must be a live handle; `out` must be writable.
enum JvStatus jv_expr_normalize(const struct JvExpr *e, struct JvExpr **out);

// Partial derivative with respect to the coordinate or symbol `name`.
//
// # Safety
// `e` must be a live handle, `name` a NUL-terminated string and `out`
// writable.
enum JvStatus jv_expr_diff(const struct JvExpr *e, const char *name, struct JvExpr **out);

// Canonical text of an expression.
//
// # Safety
// `e` must be a live handle; `out` must be writable.
enum JvStatus jv_expr_to_string(const struct JvExpr *e, char **out);

// Releases a handle; null is ignored.
//
// # Safety
// `e` must come from this library and not be used afterwards.
void jv_expr_free(struct JvExpr *e);

// Releases a string returned by this library; null is ignored.
//
// # Safety
// `s` must come from this library and not be used afterwards.
void jv_string_free(char *s);

// Runs a command (`analyze`, `constraints`, `gravity-verify`,
// `fixtures-check`) and returns the JSON report. `lagrangian` is Lagrangian
// source text and may be null for the commands that do not need it.
// `options_json` may be null or an object with the keys
// `max_generations`, `points`, `seed`, `dim`, `fixtures`, `timing`.
// A failed verification returns [`JvStatus::VerificationFailed`] together
// with the report.
//
// # Safety
// Non-null string arguments must be NUL-terminated; `out_json` must be
// writable.
enum JvStatus jv_run_command(const char *command,
                             const char *lagrangian,
                             const char *options_json,
                             char **out_json);

// Message of the last failed call on this thread, empty after a success.
// The pointer stays valid until the next call on the same thread.
const char *jv_last_error_message(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* JETVAR_H */
