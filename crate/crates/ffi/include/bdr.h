#ifndef BDR_H
#define BDR_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum BdrFormulation {
  // Objective `βε·λ₀ + (1/n)Σλᵢ` over shared constraints.
  BDR_FORMULATION_SHARED = 0,
  // Separate epigraph variables for the worst-case and empirical parts.
  BDR_FORMULATION_EXACT = 1,
} BdrFormulation;

typedef enum BdrStatus {
  BDR_STATUS_OK = 0,
  BDR_STATUS_NULL_POINTER = 1,
  BDR_STATUS_INVALID_ARGUMENT = 2,
  BDR_STATUS_SOLVER_FAILURE = 3,
  BDR_STATUS_PANIC = 4,
} BdrStatus;

// Wasserstein ball around a discrete center under the Euclidean metric.
typedef struct BdrBall BdrBall;

// SVM trainer that reuses its simplex basis across `(β, ε)` solves.
typedef struct BdrSvm BdrSvm;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread; empty when none. The pointer
// stays valid until the next failing call on the same thread.
const char *bdr_last_error(void);

// Order-`order` Wasserstein distance between two discrete distributions
// with `dim`-dimensional atoms.
//
// # Safety
// Point buffers hold `n·dim` values, weight buffers `n` values.
enum BdrStatus bdr_wasserstein_distance(const double *a_points,
                                        const double *a_weights,
                                        uintptr_t na,
                                        const double *b_points,
                                        const double *b_weights,
                                        uintptr_t nb,
                                        uintptr_t dim,
                                        double order,
                                        double *out_distance);

// Creates a ball of the given radius and order around the center.
//
// # Safety
// `center_points` holds `n·dim` values, `center_weights` `n` values;
// `out_ball` is writable.
enum BdrStatus bdr_ball_new(const double *center_points,
                            const double *center_weights,
                            uintptr_t n,
                            uintptr_t dim,
                            double radius,
                            double order,
                            struct BdrBall **out_ball);

// # Safety
// `ball` is null or came from [`bdr_ball_new`] and is not used afterwards.
void bdr_ball_free(struct BdrBall *ball);

// Worst-case expected loss over the ball, restricted to `m` candidate
// points with losses `losses[j]`. Writes the value and the worst-case mass
// on each candidate (`out_mass`, length `m`; may be null). Candidates with
// identical coordinates must carry identical losses.
//
// # Safety
// `candidates` holds `m·dim` values, `losses` `m` values; `out_mass` is
// null or holds `m` values.
enum BdrStatus bdr_worst_case(const struct BdrBall *ball,
                              const double *candidates,
                              const double *losses,
                              uintptr_t m,
                              double *out_value,
                              double *out_mass);

// Builds an SVM trainer over `n` samples with `l` features and labels
// `±1`, using ground metric `‖·‖∞ + κ·1{label flip}`.
//
// # Safety
// `features` holds `n·l` values, `labels` `n` values; `out_svm` is writable.
enum BdrStatus bdr_svm_new(const double *features,
                           const int32_t *labels,
                           uintptr_t n,
                           uintptr_t l,
                           double kappa,
                           enum BdrFormulation formulation,
                           struct BdrSvm **out_svm);

// Trains at blend weight `beta` and radius `epsilon`; writes `l` weights
// and the LP optimum.
//
// # Safety
// `svm` came from [`bdr_svm_new`]; `out_weights` holds `l` values.
enum BdrStatus bdr_svm_train(struct BdrSvm *svm,
                             double beta,
                             double epsilon,
                             double *out_weights,
                             double *out_objective);

// # Safety
// `svm` is null or came from [`bdr_svm_new`] and is not used afterwards.
void bdr_svm_free(struct BdrSvm *svm);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BDR_H */
