#ifndef UWACOMM_H
#define UWACOMM_H

/* Generated by cbindgen from crates/ffi; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum UwaStatus {
  UWA_STATUS_OK = 0,
  UWA_STATUS_NULL_POINTER = 1,
  UWA_STATUS_INVALID_ARGUMENT = 2,
  UWA_STATUS_UNKNOWN_NAME = 3,
  UWA_STATUS_BUFFER_TOO_SMALL = 4,
  UWA_STATUS_DECODE_FAILURE = 5,
  UWA_STATUS_PANIC = 6,
} UwaStatus;

/**
 * Opaque RS or BCH code.
 */
typedef struct UwaCode UwaCode;

/**
 * Opaque interleaver.
 */
typedef struct UwaInterleaver UwaInterleaver;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Static description of a status code. Never null.
 */
const char *uwa_status_str(enum UwaStatus status);

/**
 * Creates a code from a name such as `"rs-15-11"` or `"bch-15-7"`.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum UwaStatus uwa_code_new(const char *name, struct UwaCode **out);

/**
 * Releases a code. Null is ignored.
 *
 * # Safety
 * `code` must come from [`uwa_code_new`] and not be used afterwards.
 */
void uwa_code_free(struct UwaCode *code);

/**
 * Writes the codeword length, data length and designed correction
 * capability.
 *
 * # Safety
 * All pointers must be valid.
 */
enum UwaStatus uwa_code_params(const struct UwaCode *code, size_t *n, size_t *k, size_t *t);

/**
 * Systematic encoding of `k` symbols into `n`.
 *
 * # Safety
 * `data` must hold `data_len` symbols and `out` room for `out_len`.
 */
enum UwaStatus uwa_code_encode(const struct UwaCode *code,
                               const uint16_t *data,
                               size_t data_len,
                               uint16_t *out,
                               size_t out_len);

/**
 * Errors-and-erasures decoding of one `n`-symbol word into `k` data
 * symbols. `corrected` may be null.
 *
 * # Safety
 * Buffers must hold the stated lengths.
 */
enum UwaStatus uwa_code_decode(const struct UwaCode *code,
                               const uint16_t *received,
                               size_t received_len,
                               const size_t *erasures,
                               size_t erasures_len,
                               uint16_t *out,
                               size_t out_len,
                               size_t *corrected);

/**
 * Binary BCH(15, k) generator polynomial for correction capability `t`,
 * bit `i` holding the coefficient of `x^i`.
 *
 * # Safety
 * `out` must be valid.
 */
enum UwaStatus uwa_bch_generator(size_t t, uint64_t *out);

/**
 * Creates an interleaver from `"none"`, `"block:RxC"`, `"matrix:RxC"` or
 * `"conv:B,M"`.
 *
 * # Safety
 * `spec` must be a NUL-terminated string and `out` a valid pointer.
 */
enum UwaStatus uwa_interleaver_new(const char *spec, struct UwaInterleaver **out);

/**
 * Releases an interleaver. Null is ignored.
 *
 * # Safety
 * `il` must come from [`uwa_interleaver_new`] and not be used afterwards.
 */
void uwa_interleaver_free(struct UwaInterleaver *il);

/**
 * Block length in symbols, or 0 for streaming interleavers.
 *
 * # Safety
 * `il` must be a valid handle or null.
 */
size_t uwa_interleaver_block_len(const struct UwaInterleaver *il);

/**
 * Symbols added by interleaving (convolutional padding).
 *
 * # Safety
 * `il` must be a valid handle or null.
 */
size_t uwa_interleaver_delay(const struct UwaInterleaver *il);

/**
 * Interleaves `len` symbols; the output holds `len + delay` symbols.
 *
 * # Safety
 * Buffers must hold the stated lengths.
 */
enum UwaStatus uwa_interleave(const struct UwaInterleaver *il,
                              const uint16_t *input,
                              size_t len,
                              uint16_t *out,
                              size_t out_len);

/**
 * Inverse of [`uwa_interleave`]; the output holds `len - delay` symbols.
 *
 * # Safety
 * Buffers must hold the stated lengths.
 */
enum UwaStatus uwa_deinterleave(const struct UwaInterleaver *il,
                                const uint16_t *input,
                                size_t len,
                                uint16_t *out,
                                size_t out_len);

/**
 * Thorp absorption in dB/km at `f_khz`.
 *
 * # Safety
 * `out` must be valid.
 */
enum UwaStatus uwa_absorption_db_per_km(double f_khz, double *out);

/**
 * Path loss in dB over `distance_m` at `f_khz` with spreading exponent
 * `k` and a 1 m reference distance.
 *
 * # Safety
 * `out` must be valid.
 */
enum UwaStatus uwa_path_loss_db(double distance_m, double f_khz, double k, double *out);

/**
 * Writes the `2^m - 1` chips (+1/-1) of an m-sequence. `taps == 0`
 * selects the default primitive polynomial of degree `m`.
 *
 * # Safety
 * `out` must have room for `out_len` chips.
 */
enum UwaStatus uwa_msequence(uint32_t m, uint32_t taps, uint32_t seed, int8_t *out, size_t out_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* UWACOMM_H */
