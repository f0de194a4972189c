#ifndef NQS_H
#define NQS_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define NQS_ARCH_MADE 0

#define NQS_ARCH_TRANSFORMER 1

#define NQS_ARCH_RETNET 2

#define NQS_METRIC_VSCORE 0

#define NQS_METRIC_ABSERR 1

/**
 * Result codes.
 */
typedef enum NqsStatus {
  NQS_STATUS_OK = 0,
  NQS_STATUS_NULL_POINTER = 1,
  NQS_STATUS_INVALID_ARGUMENT = 2,
  NQS_STATUS_PARSE = 3,
  NQS_STATUS_TOO_LARGE = 4,
  NQS_STATUS_UNDEFINED = 5,
  NQS_STATUS_RUNTIME = 6,
  NQS_STATUS_PANIC = 7,
} NqsStatus;

/**
 * Opaque fitted-curve handle.
 */
typedef struct NqsCurve NqsCurve;

/**
 * Opaque Hamiltonian handle.
 */
typedef struct NqsHamiltonian NqsHamiltonian;

/**
 * Inputs of the per-architecture training FLOP estimate.
 */
typedef struct NqsFlopInputs {
  double n_qubits;
  /**
   * Unique batch size B.
   */
  double batch;
  double steps;
  /**
   * Number of distinct bit-flip groups M.
   */
  double flip_groups;
  double n_mod;
  double n_ph;
  double n_blocks;
  double d_model;
} NqsFlopInputs;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *nqs_last_error(void);

void nqs_clear_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *nqs_version(void);

/**
 * Parses Hamiltonian text. The handle must be released with
 * [`nqs_hamiltonian_free`].
 */
enum NqsStatus nqs_hamiltonian_parse(const char *text, struct NqsHamiltonian **out);

/**
 * Reads and parses a Hamiltonian file.
 */
enum NqsStatus nqs_hamiltonian_load(const char *path, struct NqsHamiltonian **out);

/**
 * Releases a handle; null is ignored.
 */
void nqs_hamiltonian_free(struct NqsHamiltonian *h);

enum NqsStatus nqs_hamiltonian_n_qubits(const struct NqsHamiltonian *h, size_t *out);

enum NqsStatus nqs_hamiltonian_n_terms(const struct NqsHamiltonian *h, size_t *out);

/**
 * Number of distinct bit-flip patterns M.
 */
enum NqsStatus nqs_hamiltonian_flip_groups(const struct NqsHamiltonian *h, size_t *out);

/**
 * Size of the particle-number sector; fails with `Undefined` when the file
 * declares no electron count.
 */
enum NqsStatus nqs_hamiltonian_search_space(const struct NqsHamiltonian *h, uint64_t *out);

/**
 * Exact ground energy within the particle sector (whole space when no
 * sector is declared).
 */
enum NqsStatus nqs_hamiltonian_ground_energy(const struct NqsHamiltonian *h, double *out);

/**
 * Constrained configuration-space size for `n_qubits` spin orbitals.
 */
enum NqsStatus nqs_search_space_size(size_t n_qubits,
                                     size_t n_electrons,
                                     size_t multiplicity,
                                     uint64_t *out);

/**
 * V-score `n Var / (E - offset)^2`; `Undefined` when the denominator
 * vanishes or the result is not finite.
 */
enum NqsStatus nqs_vscore(size_t n_qubits,
                          double energy,
                          double variance,
                          double identity_offset,
                          double *out);

/**
 * Total training FLOPs for `architecture` (one of the `NQS_ARCH_*` codes).
 */
enum NqsStatus nqs_training_flops(int architecture_code,
                                  const struct NqsFlopInputs *inputs,
                                  double *out);

/**
 * Autoregressive sampling FLOPs for a modulus forward cost `f_mod`.
 */
enum NqsStatus nqs_sampling_flops(double f_mod,
                                  double steps,
                                  uint64_t batch,
                                  size_t n_qubits,
                                  double *out);

/**
 * Simplified estimate `k S D' N`.
 */
enum NqsStatus nqs_simplified_flops(int architecture_code,
                                    double flip_groups,
                                    double n_qubits,
                                    double d_model,
                                    double search_space,
                                    double d_prime,
                                    double n_params,
                                    double *out);

/**
 * Creates a curve `A0 + A1 / N^alpha1 + A2 / D'^alpha2`.
 */
enum NqsStatus nqs_curve_new(int metric_code,
                             double a0,
                             double a1,
                             double a2,
                             double alpha1,
                             double alpha2,
                             struct NqsCurve **out);

/**
 * Parses a curve document as written by `nqs fit`.
 */
enum NqsStatus nqs_curve_parse(const char *text, struct NqsCurve **out);

void nqs_curve_free(struct NqsCurve *c);

enum NqsStatus nqs_curve_predict(const struct NqsCurve *c, double n_k, double d_prime, double *out);

/**
 * Frontier `D' = coefficient * N^exponent`.
 */
enum NqsStatus nqs_curve_frontier(const struct NqsCurve *c, double *coefficient, double *exponent);

/**
 * Frontier allocation for budget `C = k N D'`.
 */
enum NqsStatus nqs_curve_allocation(const struct NqsCurve *c,
                                    double budget,
                                    double k,
                                    double *n_k,
                                    double *d_prime);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NQS_H */
