#ifndef BI_FFI_H
#define BI_FFI_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum BiStatus {
  BI_STATUS_OK = 0,
  BI_STATUS_NULL_POINTER = 1,
  BI_STATUS_CONFIG = 2,
  BI_STATUS_DOMAIN = 3,
  BI_STATUS_BREAKDOWN = 4,
  BI_STATUS_STRUCTURAL = 5,
  BI_STATUS_PRECONDITION = 6,
  BI_STATUS_IO = 7,
  BI_STATUS_BUFFER_SIZE = 8,
  BI_STATUS_PANIC = 9,
} BiStatus;

typedef enum BiBackend {
  BI_BACKEND_EXPLICIT = 0,
  BI_BACKEND_FLUX = 1,
} BiBackend;

/**
 * Opaque simulation handle.
 */
typedef struct BiSimulation BiSimulation;

/**
 * Grid and stepping parameters shared by every constructor.
 */
typedef struct BiParams {
  double half_length;
  size_t points;
  double t_start;
  double cfl;
  double window_constant;
  double gamma_floor;
  enum BiBackend backend;
} BiParams;

/**
 * Functionals at the current state.
 */
typedef struct BiDiagnostics {
  double t;
  double virial_i;
  double virial_j;
  double weighted_energy;
  double mass;
  double energy;
  double loc_norm;
  double sup_ux;
  double sup_v;
  double gamma_min;
  double integra_density;
} BiDiagnostics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failure on this thread. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *bi_last_error_message(void);

/**
 * Fills `out` with the library defaults.
 */
enum BiStatus bi_params_default(struct BiParams *out);

/**
 * `u = a g`, `u_t = a s g` with `g = exp(-((x - center)/width)^2)`.
 */
enum BiStatus bi_simulation_new_gaussian(const struct BiParams *params,
                                         double amplitude,
                                         double center,
                                         double width,
                                         double velocity_scale,
                                         struct BiSimulation **out);

/**
 * Copies `len` nodal values of `u` and `u_t`; `len` must equal
 * `params.points`.
 *
 * # Safety
 * `u` and `v` must each point to `len` readable doubles.
 */
enum BiStatus bi_simulation_new_from_arrays(const struct BiParams *params,
                                            const double *u,
                                            const double *v,
                                            size_t len,
                                            struct BiSimulation **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `sim` must come from a `bi_simulation_new_*` call and not be freed twice.
 */
void bi_simulation_free(struct BiSimulation *sim);

/**
 * Takes `steps` RK4 steps of size `dt`. On failure the handle keeps the
 * last valid state.
 */
enum BiStatus bi_simulation_step(struct BiSimulation *sim, double dt, size_t steps);

/**
 * Advances to `t_end` with equal steps no larger than `cfl * h`.
 */
enum BiStatus bi_simulation_advance_to(struct BiSimulation *sim, double t_end);

enum BiStatus bi_simulation_time(const struct BiSimulation *sim, double *out);

enum BiStatus bi_simulation_len(const struct BiSimulation *sim, size_t *out);

/**
 * Copies the nodal `u` and `u_t` into caller buffers of `len` doubles.
 * Either buffer may be null to skip it.
 *
 * # Safety
 * Non-null `u`/`v` must point to `len` writable doubles.
 */
enum BiStatus bi_simulation_copy_fields(const struct BiSimulation *sim,
                                        double *u,
                                        double *v,
                                        size_t len);

/**
 * Functionals at the current state. Requires `t >= 2`.
 */
enum BiStatus bi_simulation_diagnostics(const struct BiSimulation *sim, struct BiDiagnostics *out);

/**
 * `sqrt(1 + ux^2 - ut^2)`; `BI_STATUS_BREAKDOWN` outside the hyperbolic region.
 */
enum BiStatus bi_lorentz_density(double ux, double ut, double *out);

/**
 * `u_tt` determined by the equation from the other jet entries.
 */
double bi_pde_utt(double ut, double ux, double utx, double uxx);

enum BiStatus bi_lambda(double window_constant, double t, double *out);

/**
 * Bounds of the open window `(-lambda(|t|), lambda(|t|))`.
 */
enum BiStatus bi_window(double window_constant, double t, double *lower, double *upper);

/**
 * Both sides of the momentum-numerator identity on an on-shell jet;
 * `BI_STATUS_PRECONDITION` when `utt` is off shell.
 */
enum BiStatus bi_check_qnum(double ut,
                            double ux,
                            double utx,
                            double uxx,
                            double utt,
                            double *lhs,
                            double *rhs);

/**
 * Both sides of the energy-numerator identity on an on-shell jet.
 */
enum BiStatus bi_check_qtilde(double ut,
                              double ux,
                              double utx,
                              double uxx,
                              double utt,
                              double *lhs,
                              double *rhs);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BI_FFI_H */
