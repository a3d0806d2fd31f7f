#ifndef DRILLSIM_H
#define DRILLSIM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DsClassification {
  DS_CLASSIFICATION_SUCCESS = 0,
  DS_CLASSIFICATION_UNDER_DRILL = 1,
  DS_CLASSIFICATION_OVER_DRILL_MODEL = 2,
  DS_CLASSIFICATION_OVER_DRILL_INTERVENED = 3,
} DsClassification;

typedef enum DsStatus {
  DS_STATUS_OK = 0,
  DS_STATUS_NULL_POINTER = 1,
  DS_STATUS_INVALID_INPUT = 2,
  DS_STATUS_CONFIG = 3,
  DS_STATUS_IO = 4,
  DS_STATUS_PANIC = 5,
} DsStatus;

typedef enum DsTermination {
  DS_TERMINATION_CRITERION = 0,
  DS_TERMINATION_RUPTURE = 1,
  DS_TERMINATION_TIMEOUT = 2,
} DsTermination;

/**
 * Closed constrained spline.
 */
typedef struct DsSpline DsSpline;

/**
 * Plane `z = alpha·x + beta·y + gamma`.
 */
typedef struct DsPlaneFit {
  double alpha;
  double beta;
  double gamma;
  bool valid;
  size_t point_count;
} DsPlaneFit;

typedef struct DsTrialResult {
  enum DsClassification classification;
  enum DsTermination termination;
  double drilling_time_min;
  /**
   * Negative when the criterion was never met.
   */
  double criterion_time_s;
  bool criterion_met;
  bool ruptured;
  bool removable;
  uint64_t cycles;
} DsTrialResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the most recent call on this thread if it failed, else null.
 * The pointer stays valid until the next call into this library from the
 * same thread.
 */
const char *ds_last_error(void);

/**
 * Build a spline through `n` nodes with strictly increasing angles in
 * `(-π, π]`. Release it with [`ds_spline_free`].
 *
 * # Safety
 * `phi` and `z` must point to `n` readable doubles; `out` must be writable.
 */
enum DsStatus ds_spline_new(const double *phi, const double *z, size_t n, struct DsSpline **out);

/**
 * # Safety
 * `spline` must come from [`ds_spline_new`]; `out` must be writable.
 */
enum DsStatus ds_spline_eval(const struct DsSpline *spline, double phi, double *out);

/**
 * Free a spline. Null is ignored.
 *
 * # Safety
 * `spline` must come from [`ds_spline_new`] and not be used afterwards.
 */
void ds_spline_free(struct DsSpline *spline);

/**
 * Least-squares plane through `count` points stored as `x, y, z` triples.
 *
 * # Safety
 * `xyz` must point to `3·count` readable doubles; `out` must be writable.
 */
enum DsStatus ds_fit_plane(const double *xyz, size_t count, struct DsPlaneFit *out);

/**
 * `out = (1 − w2)·image + w2·force`, clamped to `[0, 1]`, over `n` nodes.
 *
 * # Safety
 * All four pointers must reference `n` doubles; `out` must be writable.
 */
enum DsStatus ds_fuse(const double *image,
                      const double *force,
                      const double *w2,
                      size_t n,
                      double *out);

/**
 * Run one trial. `config_json` is an experiment document (null for the
 * defaults); its `arm` and `profile` select the setup and `seed` here
 * replaces the per-trial seed.
 *
 * # Safety
 * `config_json` must be null or a nul-terminated string; `out` must be
 * writable.
 */
enum DsStatus ds_run_trial(const char *config_json, uint64_t seed, struct DsTrialResult *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DRILLSIM_H */
