#ifndef HPRN_H
#define HPRN_H

/* Generated by cbindgen from the hprn-ffi crate. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Rows and columns of a signature.
 */
#define HPRN_SIGNATURE_SIDE 32

#define HPRN_DESCRIPTOR_ROWS 40

#define HPRN_DESCRIPTOR_COLS 120

#define HPRN_MODALITY_LIDAR 0

#define HPRN_MODALITY_RADAR 1

typedef enum HprnStatus {
  HPRN_STATUS_OK = 0,
  HPRN_STATUS_NULL_POINTER = 1,
  HPRN_STATUS_INVALID_ARGUMENT = 2,
  HPRN_STATUS_IO = 3,
  HPRN_STATUS_FORMAT = 4,
  HPRN_STATUS_DATA = 5,
  HPRN_STATUS_PANIC = 6,
} HprnStatus;

/**
 * Opaque signature database.
 */
typedef struct HprnDatabase HprnDatabase;

/**
 * Opaque trained model.
 */
typedef struct HprnModel HprnModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *hprn_version(void);

/**
 * Copies the calling thread's last error message into `buf` (truncated and
 * always NUL-terminated when `len > 0`). Returns the full message length
 * including the terminator, or 0 when there is no error.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t hprn_last_error_message(char *buf, size_t len);

/**
 * Loads a checkpoint file.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum HprnStatus hprn_model_load(const char *path, struct HprnModel **out);

/**
 * Creates an untrained shared model; `reduced` selects the narrow network.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum HprnStatus hprn_model_init(uint64_t seed, bool reduced, struct HprnModel **out);

/**
 * # Safety
 * `model` must be null or a handle from this library not yet freed.
 */
void hprn_model_free(struct HprnModel *model);

/**
 * Computes the signature of one row-major descriptor of
 * `HPRN_DESCRIPTOR_ROWS x HPRN_DESCRIPTOR_COLS` values, writing
 * `HPRN_SIGNATURE_SIDE^2` values to `out`.
 *
 * # Safety
 * `model` must be a live handle, `descriptor` must point to `descriptor_len`
 * readable doubles and `out` to `out_len` writable doubles.
 */
enum HprnStatus hprn_model_signature(const struct HprnModel *model,
                                     uint8_t modality,
                                     const double *descriptor,
                                     size_t descriptor_len,
                                     double *out,
                                     size_t out_len);

/**
 * # Safety
 * `out` must be a valid pointer.
 */
enum HprnStatus hprn_database_new(struct HprnDatabase **out);

/**
 * # Safety
 * `db` must be null or a handle from this library not yet freed.
 */
void hprn_database_free(struct HprnDatabase *db);

/**
 * Number of entries, or 0 for a null handle.
 *
 * # Safety
 * `db` must be null or a live handle.
 */
size_t hprn_database_len(const struct HprnDatabase *db);

/**
 * Adds a signature with its pose under a unique `id`.
 *
 * # Safety
 * `db` must be a live handle and `signature` must point to `len` doubles.
 */
enum HprnStatus hprn_database_add(struct HprnDatabase *db,
                                  uint64_t id,
                                  const double *signature,
                                  size_t len,
                                  double x,
                                  double y,
                                  double yaw);

/**
 * Writes up to `k` nearest entries, closest first, into `ids` and
 * `distances`; `found` receives how many were written.
 *
 * # Safety
 * `db` must be a live handle, `signature` must point to `len` doubles, and
 * `ids`/`distances` to `k` writable slots each.
 */
enum HprnStatus hprn_database_query(const struct HprnDatabase *db,
                                    const double *signature,
                                    size_t len,
                                    size_t k,
                                    uint64_t *ids,
                                    double *distances,
                                    size_t *found);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HPRN_H */
