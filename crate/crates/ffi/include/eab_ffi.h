#ifndef EAB_FFI_H
#define EAB_FFI_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum EabStatus {
  EAB_STATUS_OK = 0,
  EAB_STATUS_NULL_POINTER = 1,
  EAB_STATUS_INVALID_INPUT = 2,
  EAB_STATUS_INVALID_PARAMS = 3,
  EAB_STATUS_NON_MONOTONE = 4,
  EAB_STATUS_IO = 5,
  EAB_STATUS_CONFIG = 6,
  EAB_STATUS_NUMERIC = 7,
  EAB_STATUS_PANIC = 8,
} EabStatus;

// Hysteresis pattern codes returned by [`eab_loop_classify`].
typedef enum EabHysteresis {
  EAB_HYSTERESIS_NSL = 0,
  EAB_HYSTERESIS_CW_PLUS = 1,
  EAB_HYSTERESIS_CW_MINUS = 2,
  EAB_HYSTERESIS_CW = 3,
  EAB_HYSTERESIS_CCW_PLUS = 4,
  EAB_HYSTERESIS_CCW_MINUS = 5,
  EAB_HYSTERESIS_CCW = 6,
} EabHysteresis;

// Opaque hysteresis loop handle.
typedef struct EabLoop EabLoop;

// Opaque particle population handle.
typedef struct EabPosterior EabPosterior;

// Opaque trajectory handle.
typedef struct EabTrajectory EabTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null if none failed.
// The pointer stays valid until the next failing call on this thread.
const char *eab_last_error(void);

// Library version as a static NUL-terminated string.
const char *eab_version(void);

// Builds a trajectory sampled every `dt` seconds from `t0`. `v` may be null,
// in which case speeds are finite differences of `x`.
//
// # Safety
// `id` must be a NUL-terminated string; `x` (and `v` unless null) must point
// to `n` readable doubles; `out` must be writable.
enum EabStatus eab_trajectory_new(const char *id,
                                  double t0,
                                  double dt,
                                  const double *x,
                                  const double *v,
                                  size_t n,
                                  struct EabTrajectory **out);

// Number of samples, or 0 for a null handle.
//
// # Safety
// `traj` must be null or a live handle.
size_t eab_trajectory_len(const struct EabTrajectory *traj);

// Copies up to `cap` positions into `buf` and stores the sample count in
// `len`.
//
// # Safety
// `traj` must be a live handle, `buf` must have room for `cap` doubles and
// `len` must be writable.
enum EabStatus eab_trajectory_positions(const struct EabTrajectory *traj,
                                        double *buf,
                                        size_t cap,
                                        size_t *len);

// # Safety
// `traj` must be null or a handle not freed before.
void eab_trajectory_free(struct EabTrajectory *traj);

// Deviation curve value at `t` seconds after the leader's first sample.
// `theta` holds `eta0..eta3, eps0..eps2, t1`.
//
// # Safety
// `theta` must point to 8 doubles and `out` must be writable.
enum EabStatus eab_eta_eval(const double *theta, double t, double *out);

// Newell follower of `leader`.
//
// # Safety
// `leader` must be a live handle and `out` writable.
enum EabStatus eab_newell_shift(const struct EabTrajectory *leader,
                                double tau,
                                double delta,
                                struct EabTrajectory **out);

// EAB follower of `leader` under `theta` (8 doubles).
//
// # Safety
// `leader` must be a live handle, `theta` must point to 8 doubles and `out`
// must be writable.
enum EabStatus eab_simulate_follower(const struct EabTrajectory *leader,
                                     double tau,
                                     double delta,
                                     const double *theta,
                                     struct EabTrajectory **out);

// Reads a posterior CSV written by the `eab` tool.
//
// # Safety
// `path` must be a NUL-terminated string and `out` writable.
enum EabStatus eab_posterior_read(const char *path, struct EabPosterior **out);

// Particle count, or 0 for a null handle.
//
// # Safety
// `post` must be null or a live handle.
size_t eab_posterior_len(const struct EabPosterior *post);

// Particle with the lowest goodness of fit.
//
// # Safety
// `post` must be a live handle, `theta` must have room for 8 doubles and
// `gof` must be writable.
enum EabStatus eab_posterior_best(const struct EabPosterior *post, double *theta, double *gof);

// Jensen–Shannon distance between two posteriors, in `[0, 1]`.
//
// # Safety
// `a` and `b` must be live handles and `out` writable.
enum EabStatus eab_jsd(const struct EabPosterior *a, const struct EabPosterior *b, double *out);

// # Safety
// `post` must be null or a handle not freed before.
void eab_posterior_free(struct EabPosterior *post);

// Flow–density loop of a platoon, leader first, with wave speed `w` (m/s,
// negative) and zones `zone_dt` seconds wide.
//
// # Safety
// `trajs` must point to `n` live trajectory handles and `out` must be
// writable.
enum EabStatus eab_loop_new(const struct EabTrajectory *const *trajs,
                            size_t n,
                            double w,
                            double zone_dt,
                            struct EabLoop **out);

// Number of loop points, or 0 for a null handle.
//
// # Safety
// `lp` must be null or a live handle.
size_t eab_loop_len(const struct EabLoop *lp);

// Copies up to `cap` loop points (veh/m, veh/s) into `k` and `q`.
//
// # Safety
// `lp` must be a live handle and `k`, `q` must have room for `cap` doubles.
enum EabStatus eab_loop_points(const struct EabLoop *lp, double *k, double *q, size_t cap);

// Classifies a loop against thresholds given in (veh/km)·(veh/h).
//
// # Safety
// `lp` must be a live handle and `out` writable.
enum EabStatus eab_loop_classify(struct EabLoop *lp,
                                 double h_t,
                                 double h_t0,
                                 double h_t1,
                                 enum EabHysteresis *out);

// # Safety
// `lp` must be null or a handle not freed before.
void eab_loop_free(struct EabLoop *lp);

// Runs the full pipeline described by a TOML config file.
//
// # Safety
// `config_path` must be a NUL-terminated string.
enum EabStatus eab_pipeline_run(const char *config_path);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EAB_FFI_H */
