#ifndef BEOL_THERM_H
#define BEOL_THERM_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Homogenization boundary condition.
 */
typedef enum BtBoundaryCondition {
  BT_BOUNDARY_CONDITION_KUBC = 0,
  BT_BOUNDARY_CONDITION_PBC = 1,
} BtBoundaryCondition;

/**
 * Result codes.
 */
typedef enum BtStatus {
  BT_STATUS_OK = 0,
  BT_STATUS_NULL_POINTER = 1,
  BT_STATUS_INVALID_ARGUMENT = 2,
  BT_STATUS_IO = 3,
  BT_STATUS_LAYOUT = 4,
  BT_STATUS_STACK = 5,
  BT_STATUS_RVE = 6,
  BT_STATUS_HOMOGENIZE = 7,
  BT_STATUS_PANIC = 8,
} BtStatus;

/**
 * Parsed layout (opaque).
 */
typedef struct BtLayout BtLayout;

/**
 * Validated process stack (opaque).
 */
typedef struct BtStack BtStack;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *bt_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *bt_version(void);

/**
 * Parse a GDSII file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum BtStatus bt_layout_open(const char *path, struct BtLayout **out);

/**
 * Parse a GDSII stream held in memory.
 *
 * # Safety
 * `data` must point to `len` readable bytes and `out` must be valid.
 */
enum BtStatus bt_layout_from_bytes(const uint8_t *data, size_t len, struct BtLayout **out);

/**
 * Number of cells in a layout, or 0 for NULL.
 *
 * # Safety
 * `layout` must be NULL or a live handle.
 */
size_t bt_layout_cell_count(const struct BtLayout *layout);

/**
 * Release a layout; NULL is ignored.
 *
 * # Safety
 * `layout` must be NULL or a handle not yet freed.
 */
void bt_layout_free(struct BtLayout *layout);

/**
 * The bundled 12-layer demonstration stack.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum BtStatus bt_stack_demo(struct BtStack **out);

/**
 * Load a stack from its JSON document.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum BtStatus bt_stack_from_json(const char *json, struct BtStack **out);

/**
 * Total stack thickness in µm, or 0 for NULL.
 *
 * # Safety
 * `stack` must be NULL or a live handle.
 */
double bt_stack_thickness_um(const struct BtStack *stack);

/**
 * Release a stack; NULL is ignored.
 *
 * # Safety
 * `stack` must be NULL or a handle not yet freed.
 */
void bt_stack_free(struct BtStack *stack);

/**
 * Homogenize the window centred at `(cx, cy)` with half-size `half` (µm)
 * and write κ_xx, κ_yy, κ_zz, κ_xy, κ_xz, κ_yz in W/(m·K) to `out`.
 *
 * # Safety
 * `layout` and `stack` must be live handles and `out` must point to six
 * writable doubles.
 */
enum BtStatus bt_homogenize_window(const struct BtLayout *layout,
                                   const struct BtStack *stack,
                                   double cx,
                                   double cy,
                                   double half,
                                   uint32_t voxels_xy,
                                   uint32_t voxels_z,
                                   enum BtBoundaryCondition bc,
                                   double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BEOL_THERM_H */
