#ifndef PXFLOW_H
#define PXFLOW_H

/* Generated by cbindgen from crates/ffi/src. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every entry point.
 */
typedef enum PxStatus {
  PX_STATUS_OK = 0,
  PX_STATUS_NULL_POINTER = 1,
  PX_STATUS_INVALID_ARGUMENT = 2,
  PX_STATUS_PARSE = 3,
  PX_STATUS_INVALID_MESH = 4,
  /**
   * Singular system or a Newton iteration that did not converge.
   */
  PX_STATUS_NUMERICAL = 5,
  PX_STATUS_IO = 6,
  PX_STATUS_PANIC = 7,
} PxStatus;

/**
 * Opaque triangulation.
 */
typedef struct PxMesh PxMesh;

/**
 * Opaque convergence study result.
 */
typedef struct PxStudy PxStudy;

typedef struct PxMeshInfo {
  size_t n_vertices;
  size_t n_triangles;
  double max_h;
  double min_angle_degrees;
  double total_area;
  /**
   * 1 when the mesh is conforming.
   */
  uint8_t conforming;
} PxMeshInfo;

/**
 * Parameters of one convergence study.
 */
typedef struct PxStudyConfig {
  /**
   * 0 for MINI, 1 for Taylor-Hood.
   */
  uint32_t element;
  /**
   * 1 or 2.
   */
  uint32_t regularity_case;
  double alpha;
  double beta;
  double gamma;
  double p_minus;
  /**
   * Finest refinement level, at most 9.
   */
  uint32_t levels;
  /**
   * Nonzero to include the convective term.
   */
  uint8_t convection;
} PxStudyConfig;

/**
 * One level of a study. EOCs are NaN on the coarsest level.
 */
typedef struct PxErrorRecord {
  uint32_t level;
  double h;
  double e_v;
  double e_q;
  double eoc_v;
  double eoc_q;
  double theory_v;
  double theory_q;
  uint32_t newton_iterations;
  double stability;
} PxErrorRecord;

/**
 * Outcome of one electro-rheological run.
 */
typedef struct PxErRun {
  uint8_t converged;
  uint32_t iterations;
  double final_residual;
  double max_speed;
  double p_min;
  double p_max;
} PxErRun;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * NUL-terminated library version.
 */
const char *px_version(void);

/**
 * Copies the last error message of this thread into `buf`, truncated and
 * NUL-terminated. Returns the full message length in bytes, excluding the
 * terminator.
 */
size_t px_last_error(char *buf, size_t len);

/**
 * Uniform red refinement of the four-triangle unit square.
 */
enum PxStatus px_mesh_unit_square(uint32_t level, struct PxMesh **out);

/**
 * Reads a mesh in the text format of `pxflow mesh-info`.
 */
enum PxStatus px_mesh_load(const char *path, struct PxMesh **out);

/**
 * The built-in two-electrode mesh.
 */
enum PxStatus px_mesh_er(struct PxMesh **out);

enum PxStatus px_mesh_info(const struct PxMesh *mesh, struct PxMeshInfo *out);

/**
 * Releases a mesh. Null is ignored.
 */
void px_mesh_free(struct PxMesh *mesh);

/**
 * Predicted convergence rate. `quantity` is 0 for velocity, 1 for pressure.
 */
enum PxStatus px_theory_rate(uint32_t regularity_case,
                             uint32_t quantity,
                             double alpha,
                             double beta,
                             double gamma,
                             double p_minus,
                             double p_plus,
                             double *out);

/**
 * Runs a convergence study on levels `0..=levels`. A Newton failure is
 * not an error here: the completed levels are kept and
 * [`px_study_failed_level`] reports where the run stopped.
 */
enum PxStatus px_study_run(const struct PxStudyConfig *config, struct PxStudy **out);

/**
 * Number of completed levels.
 */
enum PxStatus px_study_len(const struct PxStudy *study, size_t *out);

/**
 * Level whose Newton iteration failed, or -1 for a complete study.
 */
enum PxStatus px_study_failed_level(const struct PxStudy *study, int32_t *out);

enum PxStatus px_study_record(const struct PxStudy *study, size_t index, struct PxErrorRecord *out);

/**
 * Releases a study. Null is ignored.
 */
void px_study_free(struct PxStudy *study);

/**
 * Solves the electro-rheological flow on `mesh` with (`with_field` != 0)
 * or without the electric field.
 */
enum PxStatus px_er_solve(const struct PxMesh *mesh, uint8_t with_field, struct PxErRun *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PXFLOW_H */
