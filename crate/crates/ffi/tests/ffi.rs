use std::ffi::{CStr, CString};
use std::ptr;

use beol_therm::gds::write_gdsii;
use beol_therm::synthetic::{generate_synthetic_layout, SyntheticLayoutSpec};
use beol_therm_ffi::*;

fn last_error() -> String {
    let p = bt_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn synthetic_bytes() -> Vec<u8> {
    let spec = SyntheticLayoutSpec {
        extent_um: 6.0,
        ..Default::default()
    };
    write_gdsii(&generate_synthetic_layout(&spec).unwrap()).unwrap()
}

#[test]
fn homogenize_through_handles() {
    let bytes = synthetic_bytes();
    let mut layout = ptr::null_mut();
    let mut stack = ptr::null_mut();
    unsafe {
        assert_eq!(bt_layout_from_bytes(bytes.as_ptr(), bytes.len(), &mut layout), BtStatus::Ok);
        assert!(bt_layout_cell_count(layout) > 1);
        assert_eq!(bt_stack_demo(&mut stack), BtStatus::Ok);
        assert!((bt_stack_thickness_um(stack) - 4.3).abs() < 1e-12);
        let mut k = [0.0f64; 6];
        let status = bt_homogenize_window(layout, stack, 3.0, 3.0, 1.0, 20, 1, BtBoundaryCondition::Pbc, k.as_mut_ptr());
        assert_eq!(status, BtStatus::Ok);
        assert!(k[2] < k[0].min(k[1]));
        assert!(k[4..].iter().all(|c| c.abs() < 1e-8 * k[0]), "{k:?}");

        let db = beol_therm::gds::parse_gdsii(&bytes).unwrap();
        let index = beol_therm::gds::LayoutIndex::new(&db).unwrap();
        let spec = beol_therm::rve::RveSpec {
            center: (3.0, 3.0),
            half_size: 1.0,
            voxels_per_edge_xy: 20,
            voxels_per_layer_z: 1,
        };
        let grid = beol_therm::rve::build_rve_indexed(&index, &beol_therm::stack::LayerStack::demo(), &spec).unwrap();
        let opts = beol_therm::homogenize::HomogenizationOptions::with_bc(beol_therm::homogenize::BoundaryCondition::Pbc);
        let direct = beol_therm::homogenize::homogenize(&grid, &opts).unwrap().tensor.components();
        assert_eq!(k, direct);
        bt_layout_free(layout);
        bt_stack_free(stack);
    }
}

#[test]
fn layout_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("chip.gds");
    std::fs::write(&path, synthetic_bytes()).unwrap();
    let c = CString::new(path.to_str().unwrap()).unwrap();
    let mut layout = ptr::null_mut();
    unsafe {
        assert_eq!(bt_layout_open(c.as_ptr(), &mut layout), BtStatus::Ok);
        bt_layout_free(layout);
        let missing = CString::new(dir.path().join("none.gds").to_str().unwrap()).unwrap();
        assert_eq!(bt_layout_open(missing.as_ptr(), &mut layout), BtStatus::Io);
    }
    assert!(last_error().contains("none.gds"));
}

#[test]
fn errors_are_reported() {
    let mut stack = ptr::null_mut();
    let bad = CString::new(r#"{"materials": {}, "layers": []}"#).unwrap();
    unsafe {
        assert_eq!(bt_stack_from_json(bad.as_ptr(), &mut stack), BtStatus::Stack);
        assert!(last_error().contains("no layers"), "{}", last_error());
        assert_eq!(bt_stack_from_json(ptr::null(), &mut stack), BtStatus::NullPointer);

        let mut layout = ptr::null_mut();
        let garbage = [0u8, 4, 0, 2];
        assert_eq!(bt_layout_from_bytes(garbage.as_ptr(), garbage.len(), &mut layout), BtStatus::Layout);

        let mut k = [0.0; 6];
        assert_eq!(
            bt_homogenize_window(ptr::null(), ptr::null(), 0.0, 0.0, 1.0, 4, 1, BtBoundaryCondition::Kubc, k.as_mut_ptr()),
            BtStatus::NullPointer
        );
        bt_layout_free(ptr::null_mut());
        bt_stack_free(ptr::null_mut());
    }
}

#[test]
fn version_is_set() {
    let v = unsafe { CStr::from_ptr(bt_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_api_and_compiles() {
    let header = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("include/beol_therm.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in ["bt_layout_open", "bt_homogenize_window", "bt_last_error", "BT_STATUS_OK", "BtLayout"] {
        assert!(text.contains(name), "{name} missing from header");
    }
    if let Ok(status) = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-x", "c"])
        .arg(&header)
        .status()
    {
        assert!(status.success());
    }
}
