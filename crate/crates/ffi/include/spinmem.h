#ifndef SPINMEM_H
#define SPINMEM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SpinmemMethod {
  SPINMEM_METHOD_EIGEN = 0,
  SPINMEM_METHOD_BROMWICH = 1,
} SpinmemMethod;

typedef enum SpinmemScheme {
  SPINMEM_SCHEME_QUANTILE = 0,
  SPINMEM_SCHEME_GRID = 1,
} SpinmemScheme;

typedef enum SpinmemStatus {
  SPINMEM_STATUS_OK = 0,
  SPINMEM_STATUS_NULL_POINTER = 1,
  // Bad parameter, domain violation or configuration error.
  SPINMEM_STATUS_INVALID_ARGUMENT = 2,
  // A numerical routine failed or hit a pole.
  SPINMEM_STATUS_NUMERICAL = 3,
  SPINMEM_STATUS_IO = 4,
  // A Rust panic was caught at the boundary.
  SPINMEM_STATUS_PANIC = 5,
} SpinmemStatus;

// A scenario with its ensemble discretised.
typedef struct SpinmemPrepared SpinmemPrepared;

// A storage scenario under construction.
typedef struct SpinmemScenario SpinmemScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or NULL. Valid until the next
// failing call on the same thread.
const char *spinmem_last_error(void);

// Library version as a static NUL-terminated string.
const char *spinmem_version(void);

// Undriven Lorentzian scenario with unit width, optimised detuning and
// default discretisation. `omega` is the bare collective coupling.
//
// # Safety
// `out` must be a valid pointer.
enum SpinmemStatus spinmem_scenario_new(double omega,
                                        double kappa,
                                        double gamma,
                                        struct SpinmemScenario **out);

// Scenario from configuration text (NUL-terminated UTF-8).
//
// # Safety
// `text` must be a NUL-terminated string and `out` a valid pointer.
enum SpinmemStatus spinmem_scenario_from_config(const char *text, struct SpinmemScenario **out);

// # Safety
// `scenario` must come from this library and not be used afterwards. NULL is ignored.
void spinmem_scenario_free(struct SpinmemScenario *scenario);

// Switches to dressed spins with drive amplitudes uniform on `[b_min, b_max]`.
//
// # Safety
// `scenario` must be a valid handle.
enum SpinmemStatus spinmem_scenario_set_drive(struct SpinmemScenario *h,
                                              double b_min,
                                              double b_max);

// # Safety
// `scenario` must be a valid handle.
enum SpinmemStatus spinmem_scenario_set_ensemble(struct SpinmemScenario *h,
                                                 size_t n_spins,
                                                 enum SpinmemScheme scheme);

// # Safety
// `scenario` must be a valid handle.
enum SpinmemStatus spinmem_scenario_set_method(struct SpinmemScenario *h,
                                               enum SpinmemMethod method);

// Fixes the cavity detuning instead of optimising it.
//
// # Safety
// `scenario` must be a valid handle.
enum SpinmemStatus spinmem_scenario_set_detuning(struct SpinmemScenario *h, double delta);

// # Safety
// `scenario` must be a valid handle.
enum SpinmemStatus spinmem_scenario_set_times(struct SpinmemScenario *h,
                                              double horizon,
                                              double dt,
                                              double target_time);

// Copies out the bare coupling, collective coupling actually simulated, and spin count.
//
// # Safety
// All pointers must be valid; output pointers may be NULL to skip a value.
enum SpinmemStatus spinmem_scenario_describe(const struct SpinmemScenario *h,
                                             double *omega,
                                             double *coupling,
                                             size_t *n_spins);

// Discretises the ensemble.
//
// # Safety
// `scenario` must be a valid handle and `out` a valid pointer.
enum SpinmemStatus spinmem_prepare(const struct SpinmemScenario *h, struct SpinmemPrepared **out);

// # Safety
// `prepared` must come from this library and not be used afterwards. NULL is ignored.
void spinmem_prepared_free(struct SpinmemPrepared *prepared);

// `F(t) = |f(t)|²` at cavity detuning `delta`, with the scenario's method.
//
// # Safety
// `prepared` must be a valid handle and `out` a valid pointer.
enum SpinmemStatus spinmem_fidelity_at(const struct SpinmemPrepared *h,
                                       double delta,
                                       double t,
                                       double *out);

// Complex overlap `f(t)` at `len` times, written to `re` and `im`.
//
// # Safety
// `times`, `re` and `im` must each point to `len` values.
enum SpinmemStatus spinmem_overlap(const struct SpinmemPrepared *h,
                                   double delta,
                                   enum SpinmemMethod method,
                                   const double *times,
                                   size_t len,
                                   double *re,
                                   double *im);

// Detuning maximising `F(target_time)` on `[lo, hi]`; pass `lo >= hi` for
// the default bracket `[0, 20Ω]`.
//
// # Safety
// `prepared` must be a valid handle; `delta` and `fidelity` valid pointers.
enum SpinmemStatus spinmem_optimize_detuning(const struct SpinmemPrepared *h,
                                             double target_time,
                                             double lo,
                                             double hi,
                                             double *delta,
                                             double *fidelity);

// Density of dressed frequencies for a Lorentzian line of FWHM `width` and
// drive amplitudes uniform on `[b_min, b_max]`.
//
// # Safety
// `out` must be a valid pointer.
enum SpinmemStatus spinmem_dressed_pdf(double width,
                                       double b_min,
                                       double b_max,
                                       double omega_bar,
                                       double *out);

// Cumulative distribution matching [`spinmem_dressed_pdf`].
//
// # Safety
// `out` must be a valid pointer.
enum SpinmemStatus spinmem_dressed_cdf(double width,
                                       double b_min,
                                       double b_max,
                                       double omega_bar,
                                       double *out);

// Runs a CLI command (`spectrum`, `transmission`, `rabi`, `memory`,
// `optimize`, `fig2`, `fig3` or `fig4`) on configuration text and writes its
// files, including `manifest.json`, into `out_dir`.
//
// # Safety
// All arguments must be NUL-terminated strings.
enum SpinmemStatus spinmem_run(const char *command, const char *config_text, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPINMEM_H */
