/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef DROPLET_H
#define DROPLET_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result of every fallible call.
 */
typedef enum DropletStatus {
  DROPLET_STATUS_OK = 0,
  DROPLET_STATUS_NULL_POINTER = 1,
  DROPLET_STATUS_INVALID_ARGUMENT = 2,
  DROPLET_STATUS_CONFIG = 3,
  DROPLET_STATUS_OUTSIDE_DOMAIN = 4,
  DROPLET_STATUS_NO_CONVERGENCE = 5,
  DROPLET_STATUS_SINGULAR = 6,
  DROPLET_STATUS_IO = 7,
  DROPLET_STATUS_UTF8 = 8,
  DROPLET_STATUS_PANIC = 9,
} DropletStatus;

/*
 How the mollifier's derivative kernel is scaled.
 */
typedef enum DropletKernelScaling {
  DROPLET_KERNEL_SCALING_TRAPEZOID = 0,
  DROPLET_KERNEL_SCALING_UNIT_MOMENT = 1,
} DropletKernelScaling;

/*
 Truncated expansion `W_N` at one receiver.
 */
typedef struct DropletExpansion DropletExpansion;

/*
 Discrete mollified differentiation.
 */
typedef struct DropletMollifier DropletMollifier;

/*
 Riesz coefficients of `V(z, ·)` recovered from one trace.
 */
typedef struct DropletRiesz DropletRiesz;

/*
 A parsed scenario.
 */
typedef struct DropletScenario DropletScenario;

/*
 Droplet `z + aB` in a medium with speed `c0`, and its Riesz parameter `b`.
 */
typedef struct DropletGeometry {
  double center[3];
  double radius;
  double riesz_b;
  double c0;
} DropletGeometry;

/*
 Incident field `V(x, t)`. Called concurrently from several threads, so it
 must be thread-safe; `user` is passed through unchanged.
 */
typedef double (*DropletFieldFn)(void *user, const double *x, double t);

/*
 A user source: `V` from a callback, supported in the ball
 `|x − center| < radius` and vanishing for `t > support_end`.
 */
typedef struct DropletSource {
  DropletFieldFn field;
  void *user;
  double center[3];
  double radius;
  double support_end;
} DropletSource;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or null. Owned by the
 library; valid until the next call on this thread.
 */
const char *droplet_last_error(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *droplet_version(void);

/*
 Releases a string returned by this library. Null is ignored.

 # Safety
 `s` must come from this library and not be freed twice.
 */
void droplet_string_free(char *s);

/*
 Parses a TOML scenario. The result is validated by
 [`droplet_scenario_validate`] or when run.

 # Safety
 `toml` must be a NUL-terminated string and `out` a valid pointer.
 */
enum DropletStatus droplet_scenario_parse(const char *toml, struct DropletScenario **out);

/*
 Checks a scenario; warnings are returned as a JSON array of strings.

 # Safety
 `scenario` must be a live handle; `warnings_json` a valid pointer.
 */
enum DropletStatus droplet_scenario_validate(const struct DropletScenario *scenario,
                                             char **warnings_json);

/*
 Runs a scenario, writing its files under `out_dir`, and returns the
 report as JSON.

 # Safety
 `scenario` must be a live handle, `out_dir` a NUL-terminated path and
 `report_json` a valid pointer.
 */
enum DropletStatus droplet_scenario_run(const struct DropletScenario *scenario,
                                        const char *out_dir,
                                        char **report_json);

/*
 # Safety
 `scenario` must be null or a handle not yet freed.
 */
void droplet_scenario_free(struct DropletScenario *scenario);

/*
 Prepares `W_N` for `n_terms` radial modes at `receiver`. Memory
 integrals use composite Simpson with step at most `step`.

 # Safety
 `receiver` must point to 3 doubles, `out` must be valid, and the source
 callback must stay callable until the handle is freed.
 */
enum DropletStatus droplet_expansion_new(struct DropletGeometry geometry,
                                         struct DropletSource source,
                                         const double *receiver,
                                         size_t n_terms,
                                         double step,
                                         struct DropletExpansion **out);

/*
 `W_N(x, t)` at the handle's receiver for each of `len` times.

 # Safety
 `times` and `values` must hold `len` doubles.
 */
enum DropletStatus droplet_expansion_evaluate(const struct DropletExpansion *expansion,
                                              const double *times,
                                              size_t len,
                                              double *values);

/*
 # Safety
 `expansion` must be null or a handle not yet freed.
 */
void droplet_expansion_free(struct DropletExpansion *expansion);

/*
 Simulates the trace `U(x*, t) = V + W_N` on `[t_start, t_start + 2π/b]`
 at `intervals + 1` uniform samples, written to `samples`.

 # Safety
 `x_star` must point to 3 doubles and `samples` to `intervals + 1`.
 */
enum DropletStatus droplet_synthesize_trace(struct DropletGeometry geometry,
                                            struct DropletSource source,
                                            const double *x_star,
                                            double t_start,
                                            size_t intervals,
                                            size_t n_terms,
                                            double step,
                                            double *samples);

/*
 Recovers the first `n_terms` Riesz coefficients of `V(z, ·)` from a trace
 sampled uniformly on `[t_start, t_start + 2π/b]`.

 # Safety
 `x_star` must point to 3 doubles and `samples` to `len` doubles.
 */
enum DropletStatus droplet_riesz_new(struct DropletGeometry geometry,
                                     const double *x_star,
                                     double t_start,
                                     const double *samples,
                                     size_t len,
                                     size_t n_terms,
                                     struct DropletRiesz **out);

/*
 `V_N(z, t)` for `t ∈ [0, 2π/b]`.

 # Safety
 `riesz` must be a live handle and `value` a valid pointer.
 */
enum DropletStatus droplet_riesz_evaluate(const struct DropletRiesz *riesz,
                                          double t,
                                          double *value);

/*
 # Safety
 `riesz` must be null or a handle not yet freed.
 */
void droplet_riesz_free(struct DropletRiesz *riesz);

/*
 Mollifier of radius `epsilon = (n_t + 1)·dtau`.

 # Safety
 `out` must be a valid pointer.
 */
enum DropletStatus droplet_mollifier_new(double epsilon,
                                         double dtau,
                                         enum DropletKernelScaling scaling,
                                         struct DropletMollifier **out);

/*
 First derivative of uniform samples; the output loses `n_t` samples at
 each end.

 # Safety
 `input` must hold `len` doubles, `output` `capacity` doubles.
 */
enum DropletStatus droplet_mollifier_derivative(const struct DropletMollifier *mollifier,
                                                const double *input,
                                                size_t len,
                                                double *output,
                                                size_t capacity,
                                                size_t *written);

/*
 Second derivative of uniform samples; the output loses `2n_t` samples at
 each end.

 # Safety
 `input` must hold `len` doubles, `output` `capacity` doubles.
 */
enum DropletStatus droplet_mollifier_second_derivative(const struct DropletMollifier *mollifier,
                                                       const double *input,
                                                       size_t len,
                                                       double *output,
                                                       size_t capacity,
                                                       size_t *written);

/*
 # Safety
 `mollifier` must be null or a handle not yet freed.
 */
void droplet_mollifier_free(struct DropletMollifier *mollifier);

/*
 Truncation `N` for absolute noise `delta` and radius `a`.

 # Safety
 `n` must be a valid pointer.
 */
enum DropletStatus droplet_choose_truncation(double delta, double a, size_t *n);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DROPLET_H */
