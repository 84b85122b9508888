/*
 * C interface to the vmi signal simulator.
 *
 * Scenarios are opaque handles created from the same TOML configuration
 * text that the `vmi` command-line tool consumes. Every fallible call
 * returns a VmiStatus; on failure, vmi_last_error() retrieves a
 * human-readable message for the calling thread.
 */

#ifndef VMI_H
#define VMI_H

/* Auto-generated from the vmi-ffi crate by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Outcome of a C-interface call. Matches the command-line exit codes where
// a counterpart exists.
typedef enum VmiStatus {
  // Success.
  VMI_STATUS_OK = 0,
  // Filesystem or serialization failure.
  VMI_STATUS_IO = 1,
  // Invalid configuration text, model, or argument.
  VMI_STATUS_INVALID_INPUT = 2,
  // A quadrature failed to converge or produced a non-finite value.
  VMI_STATUS_NUMERICAL = 3,
  // A required pointer argument was null.
  VMI_STATUS_NULL_ARGUMENT = 4,
  // The provided buffer is too small for the result.
  VMI_STATUS_BUFFER_TOO_SMALL = 5,
  // An internal invariant failed; the library state is still valid.
  VMI_STATUS_PANIC = 6,
} VmiStatus;

// Evaluation domain for signal integrals.
typedef enum VmiDomain {
  // Nested time integrals with retarded coupling.
  VMI_DOMAIN_TIME = 0,
  // Frequency integrals with the full retarded tensor.
  VMI_DOMAIN_FREQ = 1,
} VmiDomain;

// Opaque simulation scenario: molecules, drive pulses, detection pulse,
// and numerical settings.
typedef struct VmiScenario VmiScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Version of the underlying library as a static NUL-terminated string.
const char *vmi_version(void);

// Copy the calling thread's last error message into `buf` (NUL-terminated,
// truncated to `cap` bytes) and return the size the full message needs,
// including the terminator. Call with a null `buf` or zero `cap` to query
// the required size. Never fails.
//
// # Safety
// `buf` must either be null or point to at least `cap` writable bytes.
size_t vmi_last_error(char *buf, size_t cap);

// Build a scenario from TOML configuration text (the same schema the
// command-line tool reads). Returns null on failure; the message is then
// available from [`vmi_last_error`].
//
// The returned handle must be released with [`vmi_scenario_free`].
//
// # Safety
// `toml_text` must be a valid NUL-terminated UTF-8 string.
struct VmiScenario *vmi_scenario_from_toml(const char *toml_text);

// Release a scenario handle. Null is ignored.
//
// # Safety
// `scenario` must be null or a handle returned by
// [`vmi_scenario_from_toml`] that has not been freed already.
void vmi_scenario_free(struct VmiScenario *scenario);

// Number of molecules in the scenario; zero if the handle is null.
//
// # Safety
// `scenario` must be null or a live handle.
size_t vmi_scenario_molecule_count(const struct VmiScenario *scenario);

// Interaction order implied by the drive pulses; zero if the handle is
// null.
//
// # Safety
// `scenario` must be null or a live handle.
uint32_t vmi_scenario_order(const struct VmiScenario *scenario);

// Override the relative quadrature tolerance (must be finite and
// positive).
//
// # Safety
// `scenario` must be a live handle.
enum VmiStatus vmi_scenario_set_rel_tol(struct VmiScenario *scenario, double rel_tol);

// Evaluate the uncoupled (single-molecule, additive) heterodyne signal at
// the given interaction order.
//
// # Safety
// `scenario` must be a live handle; `out` must point to a writable f64.
enum VmiStatus vmi_baseline_signal(const struct VmiScenario *scenario,
                                   uint32_t order,
                                   enum VmiDomain domain,
                                   double *out);

// Evaluate the total vacuum-mediated pair correction at the given order.
//
// # Safety
// `scenario` must be a live handle; `out` must point to a writable f64.
enum VmiStatus vmi_pair_signal(const struct VmiScenario *scenario,
                               uint32_t order,
                               enum VmiDomain domain,
                               double *out);

// Number of named additive terms in the pair correction at this order
// (independent of any scenario).
size_t vmi_pair_term_count(uint32_t order);

// Copy the NUL-terminated name of pair-correction term `index` at `order`
// into `buf`.
//
// # Safety
// `buf` must point to at least `cap` writable bytes.
enum VmiStatus vmi_pair_term_name(uint32_t order, size_t index, char *buf, size_t cap);

// Evaluate the pair correction and write one value per named term into
// `out_terms` (see [`vmi_pair_term_name`] for the naming). `out_written`
// always receives the required term count; if `cap` is smaller, nothing
// else is written and the call reports [`VmiStatus::BufferTooSmall`].
//
// # Safety
// `scenario` must be a live handle; `out_terms` must point to at least
// `cap` writable f64 values; `out_written` must point to a writable
// size_t.
enum VmiStatus vmi_pair_breakdown(const struct VmiScenario *scenario,
                                  uint32_t order,
                                  enum VmiDomain domain,
                                  double *out_terms,
                                  size_t cap,
                                  size_t *out_written);

// Linear response α^{ij}(ω) of one molecule at a real frequency, split
// into real and imaginary parts. Cartesian indices run 0 = x, 1 = y,
// 2 = z.
//
// # Safety
// `scenario` must be a live handle; `out_re` and `out_im` must point to
// writable f64 values.
enum VmiStatus vmi_alpha_freq(const struct VmiScenario *scenario,
                              size_t molecule,
                              uint32_t i,
                              uint32_t j,
                              double omega,
                              double *out_re,
                              double *out_im);

// Total number of distinct pair diagrams at the given order.
//
// # Safety
// `out` must point to a writable u64.
enum VmiStatus vmi_diagram_count_total(uint32_t order, uint64_t *out);

// Number of equal-order cascading diagrams at the given (odd) order.
//
// # Safety
// `out` must point to a writable u64.
enum VmiStatus vmi_diagram_count_equal_order_cascading(uint32_t order, uint64_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VMI_H */
