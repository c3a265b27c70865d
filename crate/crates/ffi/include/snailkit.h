#ifndef SNAILKIT_H
#define SNAILKIT_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum {
  SNK_STATUS_OK = 0,
  SNK_STATUS_NULL_POINTER = 1,
  SNK_STATUS_INVALID_ARGUMENT = 2,
  SNK_STATUS_SOLVER = 3,
  SNK_STATUS_FIT = 4,
  SNK_STATUS_TRUNCATION = 5,
  SNK_STATUS_INTEGRATION = 6,
  SNK_STATUS_CALIBRATION = 7,
  SNK_STATUS_CONFIG = 8,
  SNK_STATUS_IO = 9,
  SNK_STATUS_BUFFER_TOO_SMALL = 10,
  SNK_STATUS_PANIC = 11,
} SnkStatus;

/**
 * Circuit parameters.
 */
typedef struct SnkCircuit SnkCircuit;

/**
 * A density matrix in a truncated Fock space.
 */
typedef struct SnkState SnkState;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *snk_version(void);

/**
 * Message of the last failed call on this thread, or NULL if none failed.
 * The pointer stays valid until the next failure on this thread.
 */
const char *snk_last_error(void);

/**
 * New circuit from device parameters (frequencies in GHz, impedance in Ohm).
 *
 * # Safety
 * `out` must be valid for one pointer write.
 */
SnkStatus snk_circuit_new(double beta,
                          double ej_ghz,
                          uint32_t n_junctions,
                          double omega_inf_ghz,
                          double impedance_ohm,
                          SnkCircuit **out_circuit);

/**
 * The reference device.
 *
 * # Safety
 * `out` must be valid for one pointer write.
 */
SnkStatus snk_circuit_reference(SnkCircuit **out_circuit);

/**
 * Releases a circuit; NULL is ignored.
 *
 * # Safety
 * `circuit` must come from this library and not be used afterwards.
 */
void snk_circuit_free(SnkCircuit *circuit);

/**
 * Dressed mode angular frequency at static flux `phi_e`.
 *
 * # Safety
 * Pointers must be valid.
 */
SnkStatus snk_resonator_frequency(const SnkCircuit *circuit, double phi_e, double *out_omega);

/**
 * Kerr-free static flux inside `[lo, hi]`.
 *
 * # Safety
 * Pointers must be valid.
 */
SnkStatus snk_kerr_free_flux(const SnkCircuit *circuit, double lo, double hi, double *out_phi);

/**
 * Static and flux-drive coefficients up to `n_max` at `phi_e`.
 * `g_dc` and `g_ac` receive `n_max + 1` values each (index = order).
 *
 * # Safety
 * Buffers must hold `len` doubles.
 */
SnkStatus snk_coefficients(const SnkCircuit *circuit,
                           double phi_e,
                           size_t n_max,
                           double *out_omega0,
                           double *g_dc,
                           double *g_ac,
                           size_t len);

/**
 * # Safety
 * `out_state` must be valid for one pointer write.
 */
SnkStatus snk_state_vacuum(size_t dim, SnkState **out_state);

/**
 * # Safety
 * `out_state` must be valid for one pointer write.
 */
SnkStatus snk_state_fock(size_t dim, size_t n, SnkState **out_state);

/**
 * # Safety
 * `out_state` must be valid for one pointer write.
 */
SnkStatus snk_state_thermal(size_t dim, double n_th, SnkState **out_state);

/**
 * # Safety
 * `out_state` must be valid for one pointer write.
 */
SnkStatus snk_state_coherent(size_t dim, double re, double im, SnkState **out_state);

/**
 * # Safety
 * `out_state` must be valid for one pointer write.
 */
SnkStatus snk_state_squeezed(size_t dim, double re, double im, SnkState **out_state);

/**
 * # Safety
 * `out_state` must be valid for one pointer write.
 */
SnkStatus snk_state_trisqueezed(size_t dim, double re, double im, SnkState **out_state);

/**
 * Rotated, displaced cubic-phase state built on squeezed vacuum.
 *
 * # Safety
 * `out_state` must be valid for one pointer write.
 */
SnkStatus snk_state_cubic(size_t dim,
                          double zeta_re,
                          double zeta_im,
                          double gamma,
                          double alpha_re,
                          double alpha_im,
                          double theta,
                          SnkState **out_state);

/**
 * Releases a state; NULL is ignored.
 *
 * # Safety
 * `state` must come from this library and not be used afterwards.
 */
void snk_state_free(SnkState *state);

/**
 * Truncation dimension, or 0 for NULL.
 *
 * # Safety
 * `state` must be NULL or valid.
 */
size_t snk_state_dim(const SnkState *state);

/**
 * # Safety
 * Pointers must be valid.
 */
SnkStatus snk_state_mean_n(const SnkState *state, double *out_value);

/**
 * # Safety
 * Pointers must be valid.
 */
SnkStatus snk_state_purity(const SnkState *state, double *out_value);

/**
 * Uhlmann fidelity of two states of equal dimension.
 *
 * # Safety
 * Pointers must be valid.
 */
SnkStatus snk_state_fidelity(const SnkState *a, const SnkState *b, double *out_value);

/**
 * Row-major density matrix, real and imaginary parts (`dim * dim` each).
 *
 * # Safety
 * Buffers must hold `len` doubles.
 */
SnkStatus snk_state_density(const SnkState *state, double *re, double *im, size_t len);

/**
 * Wigner function on an `n x n` grid over `[-extent, extent]^2`, row-major
 * with rows along Im(alpha) and columns along Re(alpha).
 *
 * # Safety
 * `values` must hold `len` doubles.
 */
SnkStatus snk_state_wigner(const SnkState *state,
                           size_t n,
                           double extent,
                           double *values,
                           size_t len);

/**
 * Runs one CLI subcommand (`"fit"`, `"cubic"`, ...) on a config file and
 * writes its outputs under `out_dir`.
 *
 * # Safety
 * Strings must be NUL-terminated.
 */
SnkStatus snk_run(const char *config_path, const char *command, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SNAILKIT_H */
