#ifndef BRIDGEPOT_H
#define BRIDGEPOT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum BpQuadratureStatus {
    BP_QUADRATURE_STATUS_CONVERGED = 0,
    BP_QUADRATURE_STATUS_MAX_SUBDIVISIONS_REACHED = 1,
    BP_QUADRATURE_STATUS_DIVERGED = 2,
} BpQuadratureStatus;

// Result code of every call.
typedef enum BpStatus {
    BP_STATUS_OK = 0,
    BP_STATUS_NULL_POINTER = 1,
    BP_STATUS_INVALID_ARGUMENT = 2,
    BP_STATUS_PARSE_ERROR = 3,
    BP_STATUS_COMPUTATION_FAILED = 4,
    BP_STATUS_PANIC = 5,
} BpStatus;

// Opaque potential handle.
typedef struct BpPotential BpPotential;

// A value with an error bound and convergence status.
typedef struct BpEstimate {
    double value;
    double error_bound;
    enum BpQuadratureStatus status;
} BpEstimate;

// Monte Carlo mean with its standard error.
typedef struct BpMcEstimate {
    double mean;
    double std_error;
    uint64_t paths;
} BpMcEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *bp_version(void);

// Message of the last failed call on this thread, or NULL.
//
// The pointer stays valid until the next failing call on the same thread.
const char *bp_last_error_message(void);

// Parses a potential from its JSON description.
enum BpStatus bp_potential_from_json(const char *json, struct BpPotential **out);

// Releases a handle; NULL is ignored.
void bp_potential_free(struct BpPotential *p);

// Serialises a potential to JSON; release the string with [`bp_string_free`].
enum BpStatus bp_potential_to_json(const struct BpPotential *p, char **out);

enum BpStatus bp_potential_evaluate(const struct BpPotential *p,
                                    const double *z,
                                    uint32_t d,
                                    double *out);

// Releases a string returned by this library; NULL is ignored.
void bp_string_free(char *s);

// Heat kernel `g(t, x, y)` in dimension `d`.
enum BpStatus bp_heat_kernel(double t, const double *x, const double *y, uint32_t d, double *out);

// `K₀(x, y)`; `+∞` at `x = 0`.
enum BpStatus bp_k0(const double *x, const double *y, uint32_t d, double *out);

enum BpStatus bp_j_kernel(const double *x,
                          const double *y,
                          uint32_t d,
                          double rel_tol,
                          struct BpEstimate *out);

// `f(a, b; β, c)`.
enum BpStatus bp_f_integral(double a,
                            double b,
                            double beta,
                            double c,
                            double rel_tol,
                            struct BpEstimate *out);

// `K(V, x, y)`. An infinite value is returned with quadrature status
// `Diverged` and call status `Ok`.
enum BpStatus bp_k_transform(const struct BpPotential *p,
                             const double *x,
                             const double *y,
                             uint32_t d,
                             double rel_tol,
                             struct BpEstimate *out);

enum BpStatus bp_j_transform(const struct BpPotential *p,
                             const double *x,
                             const double *y,
                             uint32_t d,
                             double rel_tol,
                             struct BpEstimate *out);

enum BpStatus bp_newton_potential(const struct BpPotential *p,
                                  const double *x,
                                  uint32_t d,
                                  double rel_tol,
                                  struct BpEstimate *out);

// `S(V, t, x, y)`.
enum BpStatus bp_s_functional(const struct BpPotential *p,
                              double t,
                              const double *x,
                              const double *y,
                              uint32_t d,
                              double rel_tol,
                              struct BpEstimate *out);

// `N(V, t, x, y)`.
enum BpStatus bp_n_functional(const struct BpPotential *p,
                              double t,
                              const double *x,
                              const double *y,
                              uint32_t d,
                              double rel_tol,
                              struct BpEstimate *out);

// `‖V‖_{L^{d/2}}`; infinite norms come back with status `Diverged`.
enum BpStatus bp_lp_halfd_norm(const struct BpPotential *p,
                               uint32_t d,
                               double rel_tol,
                               struct BpEstimate *out);

// Monte Carlo estimate of `G/g`.
enum BpStatus bp_g_ratio_mc(const struct BpPotential *p,
                            double t,
                            const double *x,
                            const double *y,
                            uint32_t d,
                            uint64_t paths,
                            uint64_t steps,
                            uint64_t seed,
                            struct BpMcEstimate *out);

// Monte Carlo estimate of `S(V, t, x, y)`.
enum BpStatus bp_s_mc(const struct BpPotential *p,
                      double t,
                      const double *x,
                      const double *y,
                      uint32_t d,
                      uint64_t paths,
                      uint64_t steps,
                      uint64_t seed,
                      struct BpMcEstimate *out);

// Runs a verification suite and returns its JSON report through
// `report_json` (release with [`bp_string_free`]) and its verdict through
// `passed` (1 or 0).
enum BpStatus bp_verify_suite(const char *suite,
                              uint64_t seed,
                              bool quick,
                              char **report_json,
                              int32_t *passed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BRIDGEPOT_H */
