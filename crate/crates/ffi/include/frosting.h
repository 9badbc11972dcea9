/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef FROSTING_H
#define FROSTING_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FrostingStatus {
  FROSTING_STATUS_OK = 0,
  FROSTING_STATUS_NULL_POINTER = 1,
  FROSTING_STATUS_INVALID_ARGUMENT = 2,
  FROSTING_STATUS_IO = 3,
  FROSTING_STATUS_PARSE = 4,
  FROSTING_STATUS_TOPOLOGY = 5,
  FROSTING_STATUS_VERSION = 6,
  FROSTING_STATUS_BUFFER_TOO_SMALL = 7,
  FROSTING_STATUS_INTERNAL = 8,
  FROSTING_STATUS_PANIC = 9,
} FrostingStatus;

/*
 Opaque Gaussian cloud handle.
 */
typedef struct FrostingCloud FrostingCloud;

/*
 Opaque scene handle.
 */
typedef struct FrostingScene FrostingScene;

/*
 Pinhole camera: world-to-camera rotation (row-major) and translation,
 +z forward, +y down, pixel units.
 */
typedef struct FrostingCamera {
  double rotation[9];
  double translation[3];
  double fx;
  double fy;
  double cx;
  double cy;
  uint32_t width;
  uint32_t height;
  double near;
} FrostingCamera;

typedef struct FrostingDepthAdvice {
  double cs;
  double l_box;
  int32_t depth;
} FrostingDepthAdvice;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Library version as a static NUL-terminated string.
 */
const char *frosting_version(void);

/*
 Message of the last failed call on this thread (empty after a success).
 The pointer stays valid until the next library call on the same thread.
 */
const char *frosting_last_error(void);

/*
 Loads a package directory into a new scene handle.

 # Safety
 `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum FrostingStatus frosting_scene_load(const char *path, struct FrostingScene **out);

/*
 Writes the scene as a package directory.

 # Safety
 `scene` must come from this library; `path` must be NUL-terminated.
 */
enum FrostingStatus frosting_scene_save(const struct FrostingScene *scene, const char *path);

/*
 # Safety
 `scene` must be null or a handle from this library not yet freed.
 */
void frosting_scene_free(struct FrostingScene *scene);

/*
 # Safety
 `scene` must come from this library and `out` must be valid.
 */
enum FrostingStatus frosting_scene_gaussian_count(const struct FrostingScene *scene, size_t *out);

/*
 Renders into `rgb`, which must hold `3 * width * height` floats (row-major RGB).

 # Safety
 `rgb` must point to `len` writable floats.
 */
enum FrostingStatus frosting_scene_render(const struct FrostingScene *scene,
                                          const struct FrostingCamera *camera,
                                          float *rgb,
                                          size_t len);

/*
 New scene whose base mesh takes the given vertex positions (xyz triples).

 # Safety
 `xyz` must point to `3 * vertex_count` doubles; `out` must be valid.
 */
enum FrostingStatus frosting_scene_deform(const struct FrostingScene *scene,
                                          const double *xyz,
                                          size_t vertex_count,
                                          struct FrostingScene **out);

/*
 Like [`frosting_scene_deform`] with positions read from an OBJ file.

 # Safety
 `path` must be NUL-terminated; `out` must be valid.
 */
enum FrostingStatus frosting_scene_deform_obj(const struct FrostingScene *scene,
                                              const char *path,
                                              struct FrostingScene **out);

/*
 Reads a 3DGS PLY cloud.

 # Safety
 `path` must be NUL-terminated; `out` must be valid.
 */
enum FrostingStatus frosting_cloud_read_ply(const char *path, struct FrostingCloud **out);

/*
 # Safety
 `cloud` must come from this library; `out` must be valid.
 */
enum FrostingStatus frosting_cloud_len(const struct FrostingCloud *cloud, size_t *out);

/*
 Complexity score and recommended octree depth for the cloud.

 # Safety
 `cloud` must come from this library; `out` must be valid.
 */
enum FrostingStatus frosting_cloud_depth_advice(const struct FrostingCloud *cloud,
                                                double gamma,
                                                struct FrostingDepthAdvice *out);

/*
 # Safety
 `cloud` must be null or a handle from this library not yet freed.
 */
void frosting_cloud_free(struct FrostingCloud *cloud);

/*
 Contraction map about `center` with radius `radius`.

 # Safety
 `point`, `center` and `out` must each point to 3 doubles.
 */
enum FrostingStatus frosting_contract_point(const double *point,
                                            const double *center,
                                            double radius,
                                            double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FROSTING_H */
