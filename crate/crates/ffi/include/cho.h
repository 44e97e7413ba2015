#ifndef CHO_H
#define CHO_H

#include <stddef.h>
#include <stdbool.h>
#include <stdint.h>

typedef enum ChoRegularization {
  CHO_REGULARIZATION_EXACT = 0,
  CHO_REGULARIZATION_YOSIDA = 1,
  CHO_REGULARIZATION_PIECEWISE_LOG = 2,
} ChoRegularization;

typedef enum ChoStatus {
  CHO_STATUS_OK = 0,
  CHO_STATUS_NULL_POINTER = 1,
  CHO_STATUS_INVALID_ARGUMENT = 2,
  CHO_STATUS_SHAPE_MISMATCH = 3,
  CHO_STATUS_DOMAIN_VIOLATION = 4,
  CHO_STATUS_INCOMPATIBLE = 5,
  CHO_STATUS_NON_FINITE = 6,
  CHO_STATUS_CONVERGENCE_FAILURE = 7,
  CHO_STATUS_IO = 8,
  CHO_STATUS_PANIC = 9,
} ChoStatus;

typedef enum ChoVariant {
  CHO_VARIANT_REGULAR = 0,
  CHO_VARIANT_LOGARITHMIC = 1,
  CHO_VARIANT_DOUBLE_OBSTACLE = 2,
} ChoVariant;

// Opaque computational grid.
typedef struct ChoGrid ChoGrid;

// Opaque double-well potential.
typedef struct ChoPotential ChoPotential;

// Opaque state trajectory (φ and μ at every time level).
typedef struct ChoTrajectory ChoTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the message of the last failed call on this thread into `buf`
// (NUL-terminated, truncated to `len - 1` bytes) and returns the full
// message length in bytes, excluding the terminator.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t cho_last_error_message(char *buf, size_t len);

// Short stable name of a status code; the string is static.
const char *cho_status_name(enum ChoStatus status);

// Creates a cell-centred `nx × ny` grid on `[0, lx] × [0, ly]`; `ny = 1`
// gives a one-dimensional grid.
//
// # Safety
// `out` must be a valid pointer to writable storage for one handle.
enum ChoStatus cho_grid_new(size_t nx, size_t ny, double lx, double ly, struct ChoGrid **out);

// Number of cells, `nx * ny`; zero for a null handle.
//
// # Safety
// `grid` must be null or a live handle from [`cho_grid_new`].
size_t cho_grid_len(const struct ChoGrid *grid);

// # Safety
// `grid` must be null or a handle from [`cho_grid_new`] not yet freed.
void cho_grid_free(struct ChoGrid *grid);

// Creates a potential. `coupling` is c₁ for the logarithmic variant and c₂
// for the double obstacle and is ignored for the regular one. A negative
// `stabilization` selects the default.
//
// # Safety
// `out` must be a valid pointer to writable storage for one handle.
enum ChoStatus cho_potential_new(enum ChoVariant variant,
                                 double coupling,
                                 double eps,
                                 enum ChoRegularization regularization,
                                 double stabilization,
                                 struct ChoPotential **out);

// # Safety
// `potential` must be null or a handle from [`cho_potential_new`] not yet freed.
void cho_potential_free(struct ChoPotential *potential);

// Solves the state equation with `steps` uniform steps on `[0, final_time]`.
// `u` holds `steps + 1` control slices, which must satisfy `|u| ≤ m` and the
// time-derivative bound `mprime` (pass `INFINITY` to disable either).
// Incompatible data are refused unless `override_compatibility` is set.
//
// # Safety
// `phi0` must point to `nx*ny` doubles, `u` to `(steps+1)*nx*ny` doubles,
// the handles must be live, and `out` must be writable.
enum ChoStatus cho_simulate(const struct ChoGrid *grid,
                            const struct ChoPotential *potential,
                            const double *phi0,
                            const double *u,
                            double final_time,
                            size_t steps,
                            double m,
                            double mprime,
                            bool override_compatibility,
                            struct ChoTrajectory **out);

// Number of stored time levels (`steps + 1`); zero for a null handle.
//
// # Safety
// `traj` must be null or a live trajectory handle.
size_t cho_trajectory_len(const struct ChoTrajectory *traj);

// Copies φ at time level `n` into `out` (exactly `len = nx*ny` doubles).
//
// # Safety
// `traj` must be live and `out` must point to `len` writable doubles.
enum ChoStatus cho_trajectory_phi(const struct ChoTrajectory *traj,
                                  size_t n,
                                  double *out,
                                  size_t len);

// Copies μ at time level `n` into `out` (exactly `len = nx*ny` doubles).
//
// # Safety
// `traj` must be live and `out` must point to `len` writable doubles.
enum ChoStatus cho_trajectory_mu(const struct ChoTrajectory *traj,
                                 size_t n,
                                 double *out,
                                 size_t len);

// # Safety
// `traj` must be null or a trajectory handle not yet freed.
void cho_trajectory_free(struct ChoTrajectory *traj);

// Evaluates the tracking cost and its reduced gradient at control `u`.
//
// `alpha` holds the four weights; `phi_q` and `mu_q` are `(steps+1)`-slice
// targets and `phi_omega` a single final-time target. The gradient is
// written to `grad_out` with the layout of `u`.
//
// # Safety
// All array pointers must cover the lengths described above, the handles
// must be live, and `j_out` must be writable.
enum ChoStatus cho_gradient(const struct ChoGrid *grid,
                            const struct ChoPotential *potential,
                            const double *phi0,
                            const double *u,
                            double final_time,
                            size_t steps,
                            const double *alpha,
                            const double *phi_q,
                            const double *phi_omega,
                            const double *mu_q,
                            double *j_out,
                            double *grad_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CHO_H */
