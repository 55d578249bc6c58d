#ifndef VORTEXDYN_H
#define VORTEXDYN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Status codes. Values are stable.
 */
typedef enum VdnStatus {
  VDN_STATUS_OK = 0,
  VDN_STATUS_NULL_POINTER = 1,
  VDN_STATUS_INVALID_GRID = 2,
  VDN_STATUS_DEGENERATE = 3,
  VDN_STATUS_INVALID_PARAMETER = 4,
  VDN_STATUS_UNKNOWN_FAMILY = 5,
  VDN_STATUS_UNSUPPORTED = 6,
  VDN_STATUS_OUTSIDE_DISC = 7,
  VDN_STATUS_NON_FINITE = 8,
  VDN_STATUS_NOT_CONVERGED = 9,
  VDN_STATUS_WINDING_LOST = 10,
  VDN_STATUS_GRID_TOO_COARSE = 11,
  VDN_STATUS_EMPTY_WINDOW = 12,
  VDN_STATUS_FRAME_MISMATCH = 13,
  VDN_STATUS_FORMAT = 14,
  VDN_STATUS_IO = 15,
  VDN_STATUS_BUFFER_TOO_SMALL = 16,
  VDN_STATUS_PANIC = 99,
} VdnStatus;

/*
 Ground state and vortex core profile for one (beta, grid).
 */
typedef struct VdnBackground VdnBackground;

/*
 Wave function sampled on a square grid.
 */
typedef struct VdnField VdnField;

/*
 Coefficients in the broadened oscillator basis.
 */
typedef struct VdnSpectral VdnSpectral;

/*
 One detected vortex.
 */
typedef struct VdnVortex {
  double x;
  double y;
  int32_t charge;
} VdnVortex;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Copies the last error message of this thread into `buf` (NUL-terminated,
 truncated to `len`). Returns the full message length in bytes.

 # Safety
 `buf` must be null or point to `len` writable bytes.
 */
size_t vdn_last_error(char *buf, size_t len);

/*
 Builds a field from `2 * points * points` interleaved (re, im) values,
 x-major.

 # Safety
 `values` must point to `2 * points * points` doubles; `out` must be valid.
 */
enum VdnStatus vdn_field_from_values(double extent,
                                     size_t points,
                                     const double *values,
                                     double time,
                                     struct VdnField **out);

/*
 Samples a closed-form solution (`single`, `pair`, `dipole` or `tripole`).

 # Safety
 `family` must be a NUL-terminated string; `out` must be valid.
 */
enum VdnStatus vdn_field_closed_form(const char *family,
                                     double x0,
                                     double beta,
                                     double t,
                                     double extent,
                                     size_t points,
                                     struct VdnField **out);

/*
 Computes the ground state and vortex core profile for `beta`.

 # Safety
 `out` must be valid.
 */
enum VdnStatus vdn_background_compute(double beta,
                                      double extent,
                                      size_t points,
                                      struct VdnBackground **out);

/*
 Copies the ground state out of a background.

 # Safety
 `bg` must come from [`vdn_background_compute`]; `out` must be valid.
 */
enum VdnStatus vdn_background_ground_state(const struct VdnBackground *bg, struct VdnField **out);

/*
 Symmetric vortex initial state of `family` at half separation `x0`.

 # Safety
 `bg` must come from [`vdn_background_compute`]; `family` must be a
 NUL-terminated string; `out` must be valid.
 */
enum VdnStatus vdn_initial_state(const struct VdnBackground *bg,
                                 const char *family,
                                 double x0,
                                 struct VdnField **out);

/*
 # Safety
 `bg` must be null or come from [`vdn_background_compute`].
 */
void vdn_background_free(struct VdnBackground *bg);

/*
 Advances `f` in place by `steps` split-step steps of size `dt`.

 # Safety
 `f` must be a valid field handle.
 */
enum VdnStatus vdn_field_evolve(struct VdnField *f, double beta, double dt, size_t steps);

/*
 Points per axis, or 0 for a null handle.

 # Safety
 `f` must be null or a valid field handle.
 */
size_t vdn_field_points(const struct VdnField *f);

/*
 Field time, or NaN for a null handle.

 # Safety
 `f` must be null or a valid field handle.
 */
double vdn_field_time(const struct VdnField *f);

/*
 Writes interleaved (re, im) values, x-major, into `out`.

 # Safety
 `f` must be a valid handle; `out` must point to `len` writable doubles.
 */
enum VdnStatus vdn_field_values(const struct VdnField *f, double *out, size_t len);

/*
 # Safety
 `f` must be a valid handle; `out` must be valid.
 */
enum VdnStatus vdn_field_norm(const struct VdnField *f, double *out);

/*
 # Safety
 `f` must be a valid handle; `out` must be valid.
 */
enum VdnStatus vdn_field_energy(const struct VdnField *f, double beta, double *out);

/*
 # Safety
 `f` must be null or a valid field handle.
 */
void vdn_field_free(struct VdnField *f);

/*
 Detects vortices within `r_edge`. Stores the number found in `count` and
 writes up to `capacity` of them; returns `BufferTooSmall` when truncated.

 # Safety
 `f` must be a valid handle; `out` must point to `capacity` entries (or be
 null when `capacity` is 0); `count` must be valid.
 */
enum VdnStatus vdn_detect(const struct VdnField *f,
                          double r_edge,
                          struct VdnVortex *out,
                          size_t capacity,
                          size_t *count);

/*
 Projects `f` onto the broadened oscillator basis up to total degree
 `max_degree`.

 # Safety
 `f` must be a valid handle; `out` must be valid.
 */
enum VdnStatus vdn_spectral_project(const struct VdnField *f,
                                    double beta,
                                    size_t max_degree,
                                    struct VdnSpectral **out);

/*
 Evolves the spectral state to absolute time `t` and samples it.

 # Safety
 `s` must be a valid handle; `out` must be valid.
 */
enum VdnStatus vdn_spectral_synthesize(const struct VdnSpectral *s,
                                       double t,
                                       double extent,
                                       size_t points,
                                       struct VdnField **out);

/*
 # Safety
 `s` must be null or a valid spectral handle.
 */
void vdn_spectral_free(struct VdnSpectral *s);

/*
 Analytic precession frequency of an off-center vortex; NaN for beta < 0.
 */
double vdn_precession_frequency(double beta);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VORTEXDYN_H */
