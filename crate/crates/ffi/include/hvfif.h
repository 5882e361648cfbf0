#ifndef HVFIF_H
#define HVFIF_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Result codes. `HVFIF_STATUS_OK` is zero.
typedef enum HvfifStatus {
  HVFIF_STATUS_OK = 0,
  HVFIF_STATUS_NULL_POINTER = 1,
  HVFIF_STATUS_INVALID_UTF8 = 2,
  HVFIF_STATUS_PARSE = 3,
  HVFIF_STATUS_CONFIG = 4,
  HVFIF_STATUS_NOT_CONTRACTIVE = 5,
  HVFIF_STATUS_INVALID_INPUT = 6,
  HVFIF_STATUS_PANIC = 7,
} HvfifStatus;

// A built curve system.
typedef struct HvfifCurve HvfifCurve;

// Curve samples `(x, f1, f2)`.
typedef struct HvfifSamples HvfifSamples;

// A built surface system.
typedef struct HvfifSurface HvfifSurface;

// Gridded surface samples.
typedef struct HvfifSurfaceSamples HvfifSurfaceSamples;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer
// stays valid until the next failing call on the same thread.
const char *hvfif_last_error(void);

// Builds a curve from a JSON configuration document (curve mode).
//
// # Safety
// `json` must be a NUL-terminated string and `out` a valid pointer.
enum HvfifStatus hvfif_curve_from_config_json(const char *json, struct HvfifCurve **out);

// Builds a curve from `len` nodes and `4·(len − 1)` factor expressions,
// ordered `s, s', s̃, s̃'` per interval.
//
// # Safety
// `x`, `y`, `z` must point to `len` doubles; `factors` to `4·(len − 1)`
// NUL-terminated strings; `out` must be valid.
enum HvfifStatus hvfif_curve_new(const double *x,
                                 const double *y,
                                 const double *z,
                                 size_t len,
                                 const char *const *factors,
                                 struct HvfifCurve **out);

// # Safety
// `curve` must come from this library or be null.
void hvfif_curve_free(struct HvfifCurve *curve);

// Number of subintervals `n`.
//
// # Safety
// Pointers must be valid.
enum HvfifStatus hvfif_curve_intervals(const struct HvfifCurve *curve, size_t *out);

// Contraction constant `S` and whether the system is contractive.
//
// # Safety
// `curve` must be valid; `contractive` may be null.
enum HvfifStatus hvfif_curve_contraction(const struct HvfifCurve *curve,
                                         double *s,
                                         bool *contractive);

// Dimension bounds; both are NaN when the case is inconclusive. `case` is
// 0 for `λ̲ > 1`, 1 for `λ̄ < 1` and 2 otherwise.
//
// # Safety
// `curve` must be valid; outputs may be null.
enum HvfifStatus hvfif_curve_dimension_bounds(const struct HvfifCurve *curve,
                                              double *low,
                                              double *up,
                                              int32_t *case_);

// Value of the interpolant at `x` with an a priori error bound.
//
// # Safety
// `curve` must be valid; outputs may be null.
enum HvfifStatus hvfif_curve_evaluate_at(const struct HvfifCurve *curve,
                                         double x,
                                         size_t depth,
                                         double *f1,
                                         double *f2,
                                         double *err_bound);

// Exact attractor samples after `depth` subdivision levels.
//
// # Safety
// Pointers must be valid.
enum HvfifStatus hvfif_curve_subdivide(const struct HvfifCurve *curve,
                                       size_t depth,
                                       struct HvfifSamples **out);

// Fixed-point iteration of the discretized operator on a uniform grid.
//
// # Safety
// Pointers must be valid.
enum HvfifStatus hvfif_curve_rb_iterate(const struct HvfifCurve *curve,
                                        size_t grid_size,
                                        size_t max_iters,
                                        double tol,
                                        struct HvfifSamples **out);

// Number of samples, or 0 for a null handle.
//
// # Safety
// `samples` must be valid or null.
size_t hvfif_samples_len(const struct HvfifSamples *samples);

// Copies the samples into caller buffers of `len` doubles each; any of
// the buffers may be null. `len` must equal [`hvfif_samples_len`].
//
// # Safety
// Non-null buffers must hold `len` doubles.
enum HvfifStatus hvfif_samples_copy(const struct HvfifSamples *samples,
                                    double *x,
                                    double *f1,
                                    double *f2,
                                    size_t len);

// # Safety
// `samples` must come from this library or be null.
void hvfif_samples_free(struct HvfifSamples *samples);

// Rigorous upper bounds on `sup |e|` and the Lipschitz constant of a
// univariate factor expression over `[lo, hi]`.
//
// # Safety
// `expr` must be NUL-terminated; outputs may be null.
enum HvfifStatus hvfif_factor_bounds(const char *expr,
                                     double lo,
                                     double hi,
                                     double *sup_abs,
                                     double *lipschitz);

// Builds a surface from a JSON configuration document (surface mode).
//
// # Safety
// `json` must be NUL-terminated and `out` valid.
enum HvfifStatus hvfif_surface_from_config_json(const char *json, struct HvfifSurface **out);

// # Safety
// `surface` must come from this library or be null.
void hvfif_surface_free(struct HvfifSurface *surface);

// `S̄` and the surface dimension bounds (NaN when inconclusive or when
// the grid is not square).
//
// # Safety
// `surface` must be valid; outputs may be null.
enum HvfifStatus hvfif_surface_summary(const struct HvfifSurface *surface,
                                       double *s_bar,
                                       double *low,
                                       double *up);

// # Safety
// Pointers must be valid.
enum HvfifStatus hvfif_surface_subdivide(const struct HvfifSurface *surface,
                                         size_t depth,
                                         struct HvfifSurfaceSamples **out);

// Grid shape: `nx` abscissae along x, `ny` along y.
//
// # Safety
// Pointers must be valid.
enum HvfifStatus hvfif_surface_samples_shape(const struct HvfifSurfaceSamples *samples,
                                             size_t *nx,
                                             size_t *ny);

// Copies axes (`nx` and `ny` doubles) and values (`nx·ny` doubles, row
// `i` holding `x_i`). Any buffer may be null.
//
// # Safety
// Non-null buffers must have the sizes above.
enum HvfifStatus hvfif_surface_samples_copy(const struct HvfifSurfaceSamples *samples,
                                            double *x,
                                            double *y,
                                            double *f1,
                                            double *f2);

// # Safety
// `samples` must come from this library or be null.
void hvfif_surface_samples_free(struct HvfifSurfaceSamples *samples);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HVFIF_H */
