/* C interface of the group sequential design toolkit. */

#ifndef SEQDESIGN_H
#define SEQDESIGN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status code returned by every fallible entry point.
typedef enum SeqStatus {
  // Success.
  SEQ_STATUS_OK = 0,
  // A required pointer argument was null.
  SEQ_STATUS_NULL_ARG = 1,
  // Invalid argument, configuration, or input file.
  SEQ_STATUS_INVALID = 2,
  // A numerical routine failed to converge or hit a degenerate case.
  SEQ_STATUS_NUMERICAL = 3,
  // No design satisfies the requested error budgets.
  SEQ_STATUS_INFEASIBLE = 4,
  // The solver exhausted its work budget without any design.
  SEQ_STATUS_WORK_BUDGET = 5,
  // Internal panic caught at the boundary; see the error message.
  SEQ_STATUS_PANIC = 6,
} SeqStatus;

// Opaque solved design.
typedef struct SeqDesign SeqDesign;

// Opaque trial design specification.
typedef struct SeqSpec SeqSpec;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copy the most recent error message on this thread into `buf`
// (NUL-terminated, truncated to `len` bytes) and return the full
// message length in bytes, excluding the terminator. Pass a null `buf`
// or zero `len` to query the length alone.
//
// # Safety
// `buf`, when non-null, must point to at least `len` writable bytes.
size_t seqdesign_last_error(char *buf, size_t len);

// ABI version of this header; bumps on breaking changes.
uint32_t seqdesign_abi_version(void);

// Create a z-test design specification.
//
// `stage_sizes` lists per-stage enrollments (`n_stages` entries). Pass a
// non-positive `alpha_tilde` to use the default training budget, and
// `beta = 1` / `lambda = 1` to disable the power constraint and
// alternative scaling. On success `*out` owns the new handle; release it
// with [`seqdesign_spec_free`].
//
// # Safety
// `stage_sizes` must point to `n_stages` readable entries and `out` to a
// writable pointer slot.
enum SeqStatus seqdesign_spec_new_z(double mu_alt,
                                    double sigma,
                                    bool two_sided,
                                    const uint32_t *stage_sizes,
                                    size_t n_stages,
                                    double alpha,
                                    double alpha_tilde,
                                    double beta,
                                    double lambda,
                                    struct SeqSpec **out);

// Create a two-proportion design specification; arguments as in
// [`seqdesign_spec_new_z`] with success rates `p_x` (treatment) and
// `p_y` (control).
//
// # Safety
// Same as [`seqdesign_spec_new_z`].
enum SeqStatus seqdesign_spec_new_two_prop(double p_x,
                                           double p_y,
                                           bool two_sided,
                                           const uint32_t *stage_sizes,
                                           size_t n_stages,
                                           double alpha,
                                           double alpha_tilde,
                                           double beta,
                                           double lambda,
                                           struct SeqSpec **out);

// Destroy a specification handle. Null is ignored.
//
// # Safety
// `spec` must be null or a pointer from a `seqdesign_spec_new_*` call,
// not yet freed.
void seqdesign_spec_free(struct SeqSpec *spec);

// Number of interim analyses in a specification.
//
// # Safety
// `spec` must be a live specification handle.
size_t seqdesign_spec_stages(const struct SeqSpec *spec);

// Solve the optimal design problem on `m_paths` simulated paths per
// hypothesis. `tick_limit = 0` means unlimited deterministic work;
// `symmetric` requests the two-boundary (accept and reject) design.
// Returns `Ok` when a design was found — call
// [`seqdesign_design_proven`] to see whether it is proven optimal —
// and an error status otherwise.
//
// # Safety
// `spec` must be a live specification handle and `out` a writable
// pointer slot. Release the design with [`seqdesign_design_free`].
enum SeqStatus seqdesign_solve(const struct SeqSpec *spec,
                               size_t m_paths,
                               uint64_t seed,
                               uint64_t tick_limit,
                               bool symmetric,
                               struct SeqDesign **out);

// Destroy a design handle. Null is ignored.
//
// # Safety
// `design` must be null or a pointer from [`seqdesign_solve`], not yet
// freed.
void seqdesign_design_free(struct SeqDesign *design);

// Number of stages in a solved design.
//
// # Safety
// `design` must be a live design handle.
size_t seqdesign_design_stages(const struct SeqDesign *design);

// 1 when the design is proven optimal, 0 when it is the best incumbent
// found within the work budget.
//
// # Safety
// `design` must be a live design handle.
int32_t seqdesign_design_proven(const struct SeqDesign *design);

// Empirical objective value (average stages-weighted sample size on the
// training paths); NaN when unavailable.
//
// # Safety
// `design` must be a live design handle.
double seqdesign_design_objective(const struct SeqDesign *design);

// Read the rejection (upper) cutoff of `stage` (0-based).
//
// # Safety
// `design` must be a live design handle and `out` writable.
enum SeqStatus seqdesign_design_threshold(const struct SeqDesign *design,
                                          size_t stage,
                                          double *out);

// Read the acceptance (lower) cutoff of `stage` (0-based); only
// two-boundary designs have one.
//
// # Safety
// `design` must be a live design handle and `out` writable.
enum SeqStatus seqdesign_design_lower(const struct SeqDesign *design, size_t stage, double *out);

// Exact operating characteristics of a solved design under its
// specification: type-1 error, type-2 error, and expected sample size.
// Available for Gaussian-law families (z and two-proportion).
//
// # Safety
// `spec` and `design` must be live handles; `type1`, `type2`, and `ess`
// must be writable.
enum SeqStatus seqdesign_exact_rates(const struct SeqSpec *spec,
                                     const struct SeqDesign *design,
                                     double *type1,
                                     double *type2,
                                     double *ess);

// Alpha-spending boundaries for the specification's schedule and level.
// `kind` is one of `"pocock"`, `"obf"`, or `"lan-demets"`; `out_theta`
// receives one cutoff per stage and `len` must equal the stage count.
//
// # Safety
// `spec` must be a live handle, `kind` a NUL-terminated string, and
// `out_theta` writable for `len` entries.
enum SeqStatus seqdesign_spending_boundaries(const struct SeqSpec *spec,
                                             const char *kind,
                                             double *out_theta,
                                             size_t len);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* SEQDESIGN_H */
