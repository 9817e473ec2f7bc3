#ifndef NETQUBO_H
#define NETQUBO_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum NqStatus {
  NQ_STATUS_OK = 0,
  NQ_STATUS_NULL_POINTER = 1,
  NQ_STATUS_INVALID_ARGUMENT = 2,
  NQ_STATUS_DIMENSION = 3,
  NQ_STATUS_BUDGET_EXCEEDED = 4,
  NQ_STATUS_INFEASIBLE = 5,
  NQ_STATUS_PARSE = 6,
  NQ_STATUS_IO = 7,
  NQ_STATUS_OUT_OF_RANGE = 8,
  NQ_STATUS_PANIC = 9,
  NQ_STATUS_INTERNAL = 10,
} NqStatus;

/**
 * A compiled instance: ILP, bit encoding and QUBO at one penalty.
 */
typedef struct NqInstance NqInstance;

typedef struct NqSampleSet NqSampleSet;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. Valid until the next
 * call into this library from the same thread.
 */
const char *nq_last_error(void);

/**
 * Builds an instance from a pipeline config in JSON; missing fields take
 * their defaults.
 *
 * # Safety
 * `config_json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum NqStatus nq_instance_from_config(const char *config_json, struct NqInstance **out);

/**
 * Growing grid network of `nodes` nodes with default demands and paths.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum NqStatus nq_instance_growing(uintptr_t nodes,
                                  uint32_t accuracy,
                                  double penalty,
                                  struct NqInstance **out);

/**
 * # Safety
 * `inst` must be null or a handle from this library not yet freed.
 */
void nq_instance_free(struct NqInstance *inst);

/**
 * QUBO dimension `N`, triangular nonzeros and off-diagonal couplings.
 *
 * # Safety
 * `inst` must be a live handle; output pointers may be null.
 */
enum NqStatus nq_instance_qubo_size(const struct NqInstance *inst,
                                    uintptr_t *n_bits,
                                    uintptr_t *nnz,
                                    uintptr_t *couplings);

/**
 * `qᵀQq + C` for one bit vector of length `N`.
 *
 * # Safety
 * `bits` must point to `len` readable bytes; `out` must be valid.
 */
enum NqStatus nq_instance_energy(const struct NqInstance *inst,
                                 const uint8_t *bits,
                                 uintptr_t len,
                                 double *out);

/**
 * Decodes a bit vector and reports feasibility (0 or 1) and ILP cost.
 *
 * # Safety
 * `bits` must point to `len` readable bytes; outputs must be valid.
 */
enum NqStatus nq_instance_decode(const struct NqInstance *inst,
                                 const uint8_t *bits,
                                 uintptr_t len,
                                 int32_t *feasible,
                                 int64_t *cost);

/**
 * Exact optimum over pattern selections; `NQ_STATUS_INFEASIBLE` if none.
 *
 * # Safety
 * `inst` must be a live handle and `cost` valid.
 */
enum NqStatus nq_instance_oracle(const struct NqInstance *inst, uint64_t budget, uint64_t *cost);

/**
 * Simulated annealing with the default inverse temperature ladder.
 *
 * # Safety
 * `inst` must be a live handle and `out` valid.
 */
enum NqStatus nq_instance_sample_sa(const struct NqInstance *inst,
                                    uintptr_t n_samples,
                                    uintptr_t sweeps,
                                    uint64_t seed,
                                    struct NqSampleSet **out);

/**
 * Global QUBO minimum by enumeration, as a one-sample set.
 *
 * # Safety
 * `inst` must be a live handle and `out` valid.
 */
enum NqStatus nq_instance_solve_exhaustive(const struct NqInstance *inst,
                                           uint32_t bit_budget,
                                           struct NqSampleSet **out);

/**
 * Writes the QUBO in the coordinate text format.
 *
 * # Safety
 * `path` must be a NUL-terminated string.
 */
enum NqStatus nq_instance_export_qubo(const struct NqInstance *inst, const char *path);

/**
 * Number of samples, or 0 for a null handle.
 *
 * # Safety
 * `set` must be null or a live handle.
 */
uintptr_t nq_sample_set_len(const struct NqSampleSet *set);

/**
 * Copies sample `index` into `bits` (capacity `cap`, at least `N`) and its
 * energy into `energy`.
 *
 * # Safety
 * `bits` must be writable for `cap` bytes; `energy` must be valid.
 */
enum NqStatus nq_sample_set_get(const struct NqSampleSet *set,
                                uintptr_t index,
                                uint8_t *bits,
                                uintptr_t cap,
                                double *energy);

/**
 * # Safety
 * `set` must be null or a handle from this library not yet freed.
 */
void nq_sample_set_free(struct NqSampleSet *set);

/**
 * Per-sample and total run time for `n_samples` anneals of `t_ps_us` plus a
 * pause of `t_p_us` microseconds.
 *
 * # Safety
 * Output pointers must be valid.
 */
enum NqStatus nq_time_to_solution(double t_ps_us,
                                  double t_p_us,
                                  uint64_t n_samples,
                                  double *per_sample_ms,
                                  double *total_s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NETQUBO_H */
