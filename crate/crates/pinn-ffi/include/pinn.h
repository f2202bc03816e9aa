/* C interface of the pinn toolkit. */

#ifndef PINN_H
#define PINN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes of every fallible entry point.
 */
typedef enum PinnStatus {
  PinnStatus_Ok = 0,
  /**
   * Malformed input: bad shapes, invalid arguments, unparsable files.
   */
  PinnStatus_Structural = 1,
  /**
   * Arithmetic failure: divergence, blow-up, non-convergence.
   */
  PinnStatus_Numeric = 2,
  /**
   * Invalid experiment configuration.
   */
  PinnStatus_Config = 3,
  /**
   * Filesystem failure.
   */
  PinnStatus_Io = 4,
  /**
   * Null pointer or invalid UTF-8 from the caller.
   */
  PinnStatus_BadPointer = 5,
} PinnStatus;

/**
 * Opaque trained model: architecture plus parameters, as stored in a
 * checkpoint file.
 */
typedef struct PinnModel PinnModel;

/**
 * Opaque Gauss–Legendre Butcher tableau.
 */
typedef struct PinnTableau PinnTableau;

/**
 * Copy the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length in bytes.
 *
 * # Safety
 * `buf` must point to `len` writable bytes (or be null to query the length).
 */
uintptr_t pinn_last_error(char *buf, uintptr_t len);

/**
 * Library version as a static string.
 */
const char *pinn_version(void);

/**
 * Exact Burgers solution via Cole–Hopf quadrature.
 *
 * # Safety
 * `out` must be a valid pointer to an f64.
 */
enum PinnStatus pinn_burgers_exact(double t, double x, double nu, double *out);

/**
 * Stage count from the truncation-error balance `q = ½ log ε / log Δt`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum PinnStatus pinn_choose_q(double eps, double dt, uintptr_t *out);

/**
 * Build the q-stage Gauss–Legendre tableau.
 *
 * # Safety
 * `out` must be a valid pointer; the handle must be freed with
 * [`pinn_tableau_free`].
 */
enum PinnStatus pinn_tableau_new(uintptr_t q, struct PinnTableau **out);

/**
 * Stage count of the tableau (0 for a null handle).
 *
 * # Safety
 * `t` must be null or a live tableau handle.
 */
uintptr_t pinn_tableau_q(const struct PinnTableau *t);

/**
 * Copy the tableau into caller-provided arrays: `a` (`q*q`, row-major),
 * `b` and `c` (`q`). Null destinations are skipped.
 *
 * # Safety
 * Non-null destinations must hold the stated number of f64s.
 */
enum PinnStatus pinn_tableau_coefficients(const struct PinnTableau *t,
                                          double *a,
                                          double *b,
                                          double *c);

/**
 * Release a tableau handle.
 *
 * # Safety
 * `t` must be null or a handle from [`pinn_tableau_new`], not yet freed.
 */
void pinn_tableau_free(struct PinnTableau *t);

/**
 * Load a model from a checkpoint file written by the `pinn` CLI.
 *
 * # Safety
 * `path` must be a NUL-terminated UTF-8 string; `out` a valid pointer. The
 * handle must be freed with [`pinn_model_free`].
 */
enum PinnStatus pinn_model_load(const char *path, struct PinnModel **out);

/**
 * Input dimension of the model (2 for continuous-time networks, 1 for
 * stage networks). Returns 0 for a null handle.
 *
 * # Safety
 * `m` must be null or a live model handle.
 */
uintptr_t pinn_model_input_dim(const struct PinnModel *m);

/**
 * Output dimension of the model.
 *
 * # Safety
 * `m` must be null or a live model handle.
 */
uintptr_t pinn_model_output_dim(const struct PinnModel *m);

/**
 * Evaluate the model at one point: reads `n_inputs` coordinates, writes
 * `n_outputs` values.
 *
 * # Safety
 * `inputs` and `outputs` must hold the stated counts.
 */
enum PinnStatus pinn_model_eval(const struct PinnModel *m,
                                const double *inputs,
                                uintptr_t n_inputs,
                                double *outputs,
                                uintptr_t n_outputs);

/**
 * Release a model handle.
 *
 * # Safety
 * `m` must be null or a handle from [`pinn_model_load`], not yet freed.
 */
void pinn_model_free(struct PinnModel *m);

/**
 * Run a full experiment from a TOML configuration string and return the
 * report as a JSON string (free it with [`pinn_string_free`]). This is the
 * same path as the CLI run subcommands and may train for a long time.
 *
 * # Safety
 * `config_toml` must be NUL-terminated UTF-8; `report_json` a valid pointer.
 */
enum PinnStatus pinn_run_toml(const char *config_toml, char **report_json);

/**
 * Release a string returned by this library.
 *
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void pinn_string_free(char *s);

#endif /* PINN_H */
