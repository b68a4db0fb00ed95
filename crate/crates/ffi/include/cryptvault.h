#ifndef CRYPTVAULT_H
#define CRYPTVAULT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. Zero is success.
 */
typedef enum CvStatus {
  CV_STATUS_OK = 0,
  CV_STATUS_INVALID_ARGUMENT = 1,
  CV_STATUS_NOT_FOUND = 2,
  CV_STATUS_DUPLICATE = 3,
  CV_STATUS_KEY_NOT_FOUND = 4,
  CV_STATUS_INTEGRITY_FAILURE = 5,
  CV_STATUS_SEPARATION_VIOLATION = 6,
  CV_STATUS_NOT_INITIALIZED = 7,
  CV_STATUS_ALREADY_INITIALIZED = 8,
  CV_STATUS_IO = 9,
  CV_STATUS_DEGENERATE_INPUT = 10,
  CV_STATUS_BUFFER_TOO_SMALL = 11,
  CV_STATUS_PANIC = 99,
} CvStatus;

/**
 * Opaque vault handle.
 */
typedef struct CvVault CvVault;

typedef struct CvEntry {
  uint64_t original_size;
  uint64_t encrypted_size;
  uint64_t created_at;
  uint8_t plaintext_checksum[32];
} CvEntry;

/**
 * Library-owned byte buffer.
 */
typedef struct CvBuffer {
  uint8_t *data;
  size_t len;
} CvBuffer;

typedef struct CvFit {
  double a;
  double b;
  double r;
  double r_squared;
  size_t n;
} CvFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates a new vault. `*out` receives a handle to free with
 * [`cv_vault_free`].
 */
enum CvStatus cv_vault_init(const char *data_root, const char *key_root, struct CvVault **out);

/**
 * Opens an existing vault.
 */
enum CvStatus cv_vault_open(const char *data_root, const char *key_root, struct CvVault **out);

/**
 * Releases a vault handle. Null is ignored.
 */
void cv_vault_free(struct CvVault *vault);

/**
 * Encrypts `len` bytes at `data` under `name`. With `overwrite` false an
 * existing name yields `Duplicate`. `out_entry` may be null.
 */
enum CvStatus cv_vault_put(const struct CvVault *vault,
                           const char *name,
                           const uint8_t *data,
                           size_t len,
                           bool overwrite,
                           struct CvEntry *out_entry);

/**
 * Decrypts `name` into a new buffer owned by the caller.
 */
enum CvStatus cv_vault_get(const struct CvVault *vault, const char *name, struct CvBuffer *out);

/**
 * Releases a buffer from [`cv_vault_get`]. Empty buffers are ignored.
 */
void cv_buffer_free(struct CvBuffer buf);

enum CvStatus cv_vault_stat(const struct CvVault *vault, const char *name, struct CvEntry *out);

enum CvStatus cv_vault_remove(const struct CvVault *vault, const char *name);

/**
 * Number of entries; 0 for a null handle.
 */
size_t cv_vault_len(const struct CvVault *vault);

/**
 * Copies the name of the `index`-th entry (sorted by name) into `buf` as a
 * NUL-terminated string. `*out_len` receives the name length without the
 * terminator, also when the buffer is too small.
 */
enum CvStatus cv_vault_name_at(const struct CvVault *vault,
                               size_t index,
                               char *buf,
                               size_t cap,
                               size_t *out_len);

/**
 * Ciphertext size for a plaintext of `len` bytes.
 */
uint64_t cv_padded_size(uint64_t len);

/**
 * Size of every stored key envelope.
 */
size_t cv_envelope_len(void);

/**
 * Least-squares line through `n` points.
 */
enum CvStatus cv_linear_fit(const double *xs, const double *ys, size_t n, struct CvFit *out);

/**
 * Message for the last failed call on this thread. Valid until the next
 * failing call on the same thread; empty if none.
 */
const char *cv_last_error_message(void);

/**
 * Static name of a status code.
 */
const char *cv_status_str(enum CvStatus status);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CRYPTVAULT_H */
