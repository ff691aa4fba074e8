#ifndef COGMAP_H
#define COGMAP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

// Result of every call.
typedef enum CogmapStatus {
  COGMAP_STATUS_OK = 0,
  COGMAP_STATUS_NULL_POINTER = 1,
  COGMAP_STATUS_INVALID_UTF8 = 2,
  // The configuration or an argument was rejected.
  COGMAP_STATUS_CONFIG = 3,
  // Divergence, a rejected step or a root finder failure.
  COGMAP_STATUS_NUMERICAL = 4,
  COGMAP_STATUS_IO = 5,
  // A Rust panic was caught at the boundary.
  COGMAP_STATUS_PANIC = 6,
} CogmapStatus;

// A validated run configuration.
typedef struct CogmapPlan CogmapPlan;

// A simulation being stepped from C.
typedef struct CogmapSimulation CogmapSimulation;

// Library version as a static NUL-terminated string.
const char *cogmap_version(void);

// Message of the last failure on this thread. The pointer stays valid
// until the next failing call on the same thread.
const char *cogmap_last_error(void);

// Parses a TOML configuration for `command` (`"simulate"`, `"measure"`,
// ...). On success `*out` owns a plan to be released with
// `cogmap_plan_free`.
//
// # Safety
// `command` and `config` must be NUL-terminated strings and `out` a valid
// pointer.
enum CogmapStatus cogmap_plan_parse(const char *command,
                                    const char *config,
                                    struct CogmapPlan **out);

// Applies a `key=value` override by re-validating the plan.
//
// # Safety
// `plan` must come from `cogmap_plan_parse`; `assignment` must be a
// NUL-terminated string.
enum CogmapStatus cogmap_plan_override(struct CogmapPlan *plan, const char *assignment);

// Copies the configuration hash (64 hex digits plus NUL) into `buf`.
//
// # Safety
// `buf` must point to at least `len` writable bytes.
enum CogmapStatus cogmap_plan_hash(const struct CogmapPlan *plan, char *buf, size_t len);

// # Safety
// `plan` must come from `cogmap_plan_parse` and not be used afterwards.
void cogmap_plan_free(struct CogmapPlan *plan);

// Runs the plan as the command line tool would, writing into `out_dir`.
// `*exit_code` receives the tool's exit status.
//
// # Safety
// `plan` must be a live plan, `out_dir` a NUL-terminated path and
// `exit_code` a valid pointer.
enum CogmapStatus cogmap_execute(const struct CogmapPlan *plan,
                                 const char *out_dir,
                                 int *exit_code);

// Starts a simulation from a simulate or measure plan.
//
// # Safety
// `plan` must be a live plan and `out` a valid pointer.
enum CogmapStatus cogmap_simulation_new(const struct CogmapPlan *plan,
                                        struct CogmapSimulation **out);

// Takes one step; `*t` receives the new time. Stepping past the end time
// is a no-op.
//
// # Safety
// `sim` must be a live simulation; `t` may be null.
enum CogmapStatus cogmap_simulation_step(struct CogmapSimulation *sim, double *t);

// Steps until the configured end time.
//
// # Safety
// `sim` must be a live simulation.
enum CogmapStatus cogmap_simulation_advance(struct CogmapSimulation *sim);

// Number of state fields and grid cells.
//
// # Safety
// `sim` must be a live simulation; the output pointers may be null.
enum CogmapStatus cogmap_simulation_shape(const struct CogmapSimulation *sim,
                                          size_t *n_fields,
                                          size_t *n_cells);

// Copies field `index` of the current state into `buf`, which must hold
// `len >= n_cells` values.
//
// # Safety
// `sim` must be a live simulation and `buf` point to `len` writable doubles.
enum CogmapStatus cogmap_simulation_field(const struct CogmapSimulation *sim,
                                          size_t index,
                                          double *buf,
                                          size_t len);

// # Safety
// `sim` must come from `cogmap_simulation_new` and not be used afterwards.
void cogmap_simulation_free(struct CogmapSimulation *sim);

// Leading growth rates of a stability plan at modes `0..len`. Writes the
// number of modes computed to `*written`.
//
// # Safety
// `k`, `re` and `im` must each point to `len` writable doubles.
enum CogmapStatus cogmap_dispersion(const struct CogmapPlan *plan,
                                    double *k,
                                    double *re,
                                    double *im,
                                    size_t len,
                                    size_t *written);

#endif  /* COGMAP_H */
