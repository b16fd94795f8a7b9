#ifndef PARTSKETCH_H
#define PARTSKETCH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PsStatus {
  PS_STATUS_OK = 0,
  PS_STATUS_NULL_POINTER = 1,
  PS_STATUS_INVALID_ARGUMENT = 2,
  PS_STATUS_CONFIG = 3,
  PS_STATUS_NUMERIC = 4,
  PS_STATUS_EMPTY_SKETCH = 5,
  PS_STATUS_EMPTY_SHAPE = 6,
  PS_STATUS_STATE = 7,
  PS_STATUS_PARSE = 8,
  PS_STATUS_FORMAT = 9,
  PS_STATUS_IO = 10,
  PS_STATUS_PANIC = 11,
} PsStatus;

/**
 * Triangle mesh with a part label per face.
 */
typedef struct PsMesh PsMesh;

/**
 * Loaded sketch-to-shape network.
 */
typedef struct PsModel PsModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length without the NUL.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t ps_last_error(char *buf, size_t len);

/**
 * Static, NUL-terminated version string.
 */
const char *ps_version(void);

/**
 * Loads a sketch-network checkpoint. Meshes are extracted at `grid_res`
 * (0 selects the default of 48).
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum PsStatus ps_model_load(const char *path, size_t grid_res, struct PsModel **out);

/**
 * Creates an untrained desk-size model from `seed`.
 *
 * # Safety
 * `out` must be writable.
 */
enum PsStatus ps_model_new_desk(uint64_t seed, size_t grid_res, struct PsModel **out);

/**
 * # Safety
 * `model` must be null or a handle from `ps_model_load`/`ps_model_new_desk`
 * not yet freed.
 */
void ps_model_free(struct PsModel *model);

/**
 * Number of part slots; 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t ps_model_slots(const struct PsModel *model);

/**
 * Generates a mesh from a row-major 8-bit grayscale sketch (255 = paper).
 *
 * # Safety
 * `pixels` must be valid for `width * height` bytes; `out` must be
 * writable.
 */
enum PsStatus ps_generate(const struct PsModel *model,
                          const uint8_t *pixels,
                          size_t width,
                          size_t height,
                          struct PsMesh **out);

/**
 * # Safety
 * `mesh` must be null or a live mesh handle.
 */
void ps_mesh_free(struct PsMesh *mesh);

/**
 * # Safety
 * `mesh` must be null or a live mesh handle.
 */
size_t ps_mesh_vertex_count(const struct PsMesh *mesh);

/**
 * # Safety
 * `mesh` must be null or a live mesh handle.
 */
size_t ps_mesh_face_count(const struct PsMesh *mesh);

/**
 * `3 * vertex_count` coordinates, valid until the mesh is freed.
 *
 * # Safety
 * `mesh` must be null or a live mesh handle.
 */
const double *ps_mesh_vertices(const struct PsMesh *mesh);

/**
 * `3 * face_count` vertex indices, valid until the mesh is freed.
 *
 * # Safety
 * `mesh` must be null or a live mesh handle.
 */
const uint32_t *ps_mesh_faces(const struct PsMesh *mesh);

/**
 * Part slot of each face, valid until the mesh is freed.
 *
 * # Safety
 * `mesh` must be null or a live mesh handle.
 */
const uint32_t *ps_mesh_face_parts(const struct PsMesh *mesh);

/**
 * Copies per-slot presence probabilities into `out` (at most `len`).
 * Returns the slot count.
 *
 * # Safety
 * `mesh` must be null or a live handle; `out` null or valid for `len`.
 */
size_t ps_mesh_presence(const struct PsMesh *mesh, double *out, size_t len);

/**
 * Writes the mesh as OBJ, or JSON when `path` ends in `.json`.
 *
 * # Safety
 * `mesh` must be a live handle; `path` a NUL-terminated string.
 */
enum PsStatus ps_mesh_write(const struct PsMesh *mesh, const char *path);

/**
 * Chamfer distance between two point sets given as packed xyz triples.
 *
 * # Safety
 * `a` must be valid for `3 * na` doubles and `b` for `3 * nb`.
 */
enum PsStatus ps_chamfer(const double *a, size_t na, const double *b, size_t nb, double *out);

/**
 * Chamfer distance between two meshes on `n_points` seeded surface samples
 * each (mesh `a` with `seed`, mesh `b` with `seed + 1`).
 *
 * # Safety
 * `a` and `b` must be live mesh handles; `out` writable.
 */
enum PsStatus ps_mesh_chamfer(const struct PsMesh *a,
                              const struct PsMesh *b,
                              size_t n_points,
                              uint64_t seed,
                              double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PARTSKETCH_H */
