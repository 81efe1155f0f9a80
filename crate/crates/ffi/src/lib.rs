//! C ABI over `beol_therm`.
//!
//! Layouts and stacks are opaque handles created by `bt_*_open`/`bt_*_from_*`
//! and released with the matching `*_free`. Every fallible call returns a
//! [`BtStatus`]; on failure a message is available from
//! [`bt_last_error`] on the same thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use beol_therm::gds::{parse_gdsii, LayoutDatabase, LayoutIndex};
use beol_therm::homogenize::{homogenize, BoundaryCondition, HomogenizationOptions};
use beol_therm::rve::{build_rve_indexed, RveSpec};
use beol_therm::stack::{load_stack, LayerStack};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BtStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Layout = 4,
    Stack = 5,
    Rve = 6,
    Homogenize = 7,
    Panic = 8,
}

/// Homogenization boundary condition.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BtBoundaryCondition {
    Kubc = 0,
    Pbc = 1,
}

/// Parsed layout (opaque).
pub struct BtLayout {
    db: LayoutDatabase,
}

/// Validated process stack (opaque).
pub struct BtStack {
    stack: LayerStack,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).ok());
}

fn fail(status: BtStatus, msg: impl Into<String>) -> BtStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> BtStatus) -> BtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(BtStatus::Panic, format!("internal panic: {msg}"))
        }
    }
}

unsafe fn c_str<'a>(p: *const c_char) -> Result<&'a str, BtStatus> {
    if p.is_null() {
        return Err(fail(BtStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(BtStatus::InvalidArgument, "string argument is not UTF-8"))
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn bt_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn bt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

fn layout_from_bytes(bytes: &[u8], out: *mut *mut BtLayout) -> BtStatus {
    match parse_gdsii(bytes) {
        Ok(db) => {
            unsafe { *out = Box::into_raw(Box::new(BtLayout { db })) };
            BtStatus::Ok
        }
        Err(e) => fail(BtStatus::Layout, e.to_string()),
    }
}

/// Parse a GDSII file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bt_layout_open(path: *const c_char, out: *mut *mut BtLayout) -> BtStatus {
    guard(|| {
        if out.is_null() {
            return fail(BtStatus::NullPointer, "null output pointer");
        }
        let path = match c_str(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match std::fs::read(path) {
            Ok(bytes) => layout_from_bytes(&bytes, out),
            Err(e) => fail(BtStatus::Io, format!("{path}: {e}")),
        }
    })
}

/// Parse a GDSII stream held in memory.
///
/// # Safety
/// `data` must point to `len` readable bytes and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn bt_layout_from_bytes(data: *const u8, len: usize, out: *mut *mut BtLayout) -> BtStatus {
    guard(|| {
        if out.is_null() || (data.is_null() && len > 0) {
            return fail(BtStatus::NullPointer, "null pointer argument");
        }
        let bytes = if len == 0 { &[][..] } else { std::slice::from_raw_parts(data, len) };
        layout_from_bytes(bytes, out)
    })
}

/// Number of cells in a layout, or 0 for NULL.
///
/// # Safety
/// `layout` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bt_layout_cell_count(layout: *const BtLayout) -> usize {
    layout.as_ref().map_or(0, |l| l.db.cells.len())
}

/// Release a layout; NULL is ignored.
///
/// # Safety
/// `layout` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bt_layout_free(layout: *mut BtLayout) {
    if !layout.is_null() {
        drop(Box::from_raw(layout));
    }
}

/// The bundled 12-layer demonstration stack.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bt_stack_demo(out: *mut *mut BtStack) -> BtStatus {
    guard(|| {
        if out.is_null() {
            return fail(BtStatus::NullPointer, "null output pointer");
        }
        *out = Box::into_raw(Box::new(BtStack {
            stack: LayerStack::demo(),
        }));
        BtStatus::Ok
    })
}

/// Load a stack from its JSON document.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bt_stack_from_json(json: *const c_char, out: *mut *mut BtStack) -> BtStatus {
    guard(|| {
        if out.is_null() {
            return fail(BtStatus::NullPointer, "null output pointer");
        }
        let text = match c_str(json) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match load_stack(text) {
            Ok(stack) => {
                *out = Box::into_raw(Box::new(BtStack { stack }));
                BtStatus::Ok
            }
            Err(e) => fail(BtStatus::Stack, e.to_string()),
        }
    })
}

/// Total stack thickness in µm, or 0 for NULL.
///
/// # Safety
/// `stack` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bt_stack_thickness_um(stack: *const BtStack) -> f64 {
    stack.as_ref().map_or(0.0, |s| s.stack.total_thickness)
}

/// Release a stack; NULL is ignored.
///
/// # Safety
/// `stack` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bt_stack_free(stack: *mut BtStack) {
    if !stack.is_null() {
        drop(Box::from_raw(stack));
    }
}

/// Homogenize the window centred at `(cx, cy)` with half-size `half` (µm)
/// and write κ_xx, κ_yy, κ_zz, κ_xy, κ_xz, κ_yz in W/(m·K) to `out`.
///
/// # Safety
/// `layout` and `stack` must be live handles and `out` must point to six
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn bt_homogenize_window(
    layout: *const BtLayout,
    stack: *const BtStack,
    cx: f64,
    cy: f64,
    half: f64,
    voxels_xy: u32,
    voxels_z: u32,
    bc: BtBoundaryCondition,
    out: *mut f64,
) -> BtStatus {
    guard(|| {
        let (Some(layout), Some(stack)) = (layout.as_ref(), stack.as_ref()) else {
            return fail(BtStatus::NullPointer, "null handle");
        };
        if out.is_null() {
            return fail(BtStatus::NullPointer, "null output pointer");
        }
        if !(cx.is_finite() && cy.is_finite() && half > 0.0) || voxels_xy == 0 || voxels_z == 0 {
            return fail(BtStatus::InvalidArgument, "window needs finite centre, positive half size and voxel counts");
        }
        let index = match LayoutIndex::new(&layout.db) {
            Ok(i) => i,
            Err(e) => return fail(BtStatus::Layout, e.to_string()),
        };
        let spec = RveSpec {
            center: (cx, cy),
            half_size: half,
            voxels_per_edge_xy: voxels_xy as usize,
            voxels_per_layer_z: voxels_z as usize,
        };
        let grid = match build_rve_indexed(&index, &stack.stack, &spec) {
            Ok(g) => g,
            Err(e) => return fail(BtStatus::Rve, e.to_string()),
        };
        let bc = match bc {
            BtBoundaryCondition::Kubc => BoundaryCondition::Kubc,
            BtBoundaryCondition::Pbc => BoundaryCondition::Pbc,
        };
        match homogenize(&grid, &HomogenizationOptions::with_bc(bc)) {
            Ok(h) => {
                let dst = std::slice::from_raw_parts_mut(out, 6);
                dst.copy_from_slice(&h.tensor.components());
                BtStatus::Ok
            }
            Err(e) => fail(BtStatus::Homogenize, e.to_string()),
        }
    })
}
