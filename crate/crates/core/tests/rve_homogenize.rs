mod common;

use beol_therm::gds::LayoutIndex;
use beol_therm::homogenize::{
    homogenize, solve_loadcase, verify_hill_mandel, BoundaryCondition, ConductivityTensor, HomogenizationOptions,
};
use beol_therm::rve::{build_rve_indexed, metal_fraction, RveSpec, VoxelGrid};
use beol_therm::stack::{LayerKind, LayerStack};
use beol_therm::synthetic::{generate_synthetic_layout, SyntheticLayoutSpec};
use common::{random_grid, rel};
use proptest::prelude::*;

const KUBC: BoundaryCondition = BoundaryCondition::Kubc;
const PBC: BoundaryCondition = BoundaryCondition::Pbc;

fn small_layout(spec: SyntheticLayoutSpec) -> beol_therm::gds::LayoutDatabase {
    generate_synthetic_layout(&SyntheticLayoutSpec {
        extent_um: 12.0,
        ..spec
    })
    .unwrap()
}

fn window(index: &LayoutIndex<'_>, stack: &LayerStack, c: (f64, f64), half: f64, xy: usize, z: usize) -> VoxelGrid {
    let spec = RveSpec {
        center: c,
        half_size: half,
        voxels_per_edge_xy: xy,
        voxels_per_layer_z: z,
    };
    build_rve_indexed(index, stack, &spec).unwrap()
}

fn tensor(grid: &VoxelGrid, bc: BoundaryCondition) -> ConductivityTensor {
    homogenize(grid, &HomogenizationOptions::with_bc(bc)).unwrap().tensor
}

fn max_diff(a: &ConductivityTensor, b: &ConductivityTensor) -> f64 {
    a.sub(b).max_abs()
}

#[test]
fn pitch_shifted_windows_give_identical_grids_and_tensors() {
    let db = small_layout(SyntheticLayoutSpec::default());
    let index = LayoutIndex::new(&db).unwrap();
    let stack = LayerStack::demo();
    let a = window(&index, &stack, (6.0, 6.0), 0.5, 20, 1);
    let b = window(&index, &stack, (6.4, 5.2), 0.5, 20, 1);
    assert_eq!(a.material_id, b.material_id);
    assert_eq!(a.dz, b.dz);
    let (ka, kb) = (tensor(&a, PBC), tensor(&b, PBC));
    assert!(max_diff(&ka, &kb) <= 1e-12 * ka.max_abs(), "{ka:?} {kb:?}");
}

#[test]
fn repeated_extraction_is_bitwise_identical() {
    let g = random_grid(7, [5, 4, 6], 50.0);
    for bc in [KUBC, PBC] {
        let first = homogenize(&g, &HomogenizationOptions::with_bc(bc)).unwrap();
        let second = homogenize(&g, &HomogenizationOptions::with_bc(bc)).unwrap();
        assert_eq!(first, second);
    }
}

#[test]
fn in_plane_refinement_converges() {
    let db = small_layout(SyntheticLayoutSpec::default());
    let index = LayoutIndex::new(&db).unwrap();
    let stack = LayerStack::demo();
    let k: Vec<ConductivityTensor> = [10, 20, 40]
        .iter()
        .map(|&n| tensor(&window(&index, &stack, (6.0, 6.0), 0.5, n, 1), PBC))
        .collect();
    let (d1, d2) = (max_diff(&k[1], &k[0]), max_diff(&k[2], &k[1]));
    assert!(d2 < 0.5 * d1, "{d1} {d2}");
}

#[test]
fn vertical_refinement_converges() {
    let db = small_layout(SyntheticLayoutSpec::default());
    let index = LayoutIndex::new(&db).unwrap();
    let stack = LayerStack::demo();
    let k: Vec<ConductivityTensor> = [1, 2, 4]
        .iter()
        .map(|&n| tensor(&window(&index, &stack, (6.0, 6.0), 0.5, 20, n), PBC))
        .collect();
    let (d1, d2) = (max_diff(&k[1], &k[0]), max_diff(&k[2], &k[1]));
    assert!(d2 < 0.5 * d1, "{d1} {d2}");
}

#[test]
fn fifty_percent_lines_fill_half_the_line_layers() {
    let db = small_layout(SyntheticLayoutSpec::default());
    let index = LayoutIndex::new(&db).unwrap();
    let stack = LayerStack::demo();
    let g = window(&index, &stack, (6.0, 6.0), 1.0, 40, 2);
    for (li, layer) in stack.layers.iter().enumerate() {
        if layer.kind == LayerKind::Line {
            assert!((metal_fraction(&g, li) - 0.5).abs() <= 0.01, "{}", layer.name);
        }
    }
}

#[test]
fn via_free_stack_conducts_like_a_series_of_layers() {
    let db = small_layout(SyntheticLayoutSpec {
        via_pitch_lines: 0,
        ..Default::default()
    });
    let index = LayoutIndex::new(&db).unwrap();
    let stack = LayerStack::demo();
    let g = window(&index, &stack, (6.0, 6.0), 1.0, 40, 2);
    let k = tensor(&g, PBC);

    // Series of per-layer arithmetic means (upper) and of per-layer harmonic
    // means (lower).
    let (mut r_voigt, mut r_reuss) = (0.0, 0.0);
    for (li, layer) in stack.layers.iter().enumerate() {
        let f = metal_fraction(&g, li);
        let km = layer.metal.as_ref().map_or(0.0, |m| m.conductivity);
        let kb = layer.background.conductivity;
        let voigt = f * km + (1.0 - f) * kb;
        let reuss = if f > 0.0 { 1.0 / (f / km + (1.0 - f) / kb) } else { kb };
        r_voigt += layer.thickness / voigt;
        r_reuss += layer.thickness / reuss;
    }
    let upper = stack.total_thickness / r_voigt;
    let lower = stack.total_thickness / r_reuss;
    assert!(lower <= k.zz && k.zz <= upper, "{lower} {} {upper}", k.zz);
    assert!(rel(k.zz, upper) < 0.05, "{} vs {upper}", k.zz);
    assert!(k.zz < k.min_diagonal() + 1e-12);
}

#[test]
fn rotating_the_layout_rotates_the_tensor() {
    let g = random_grid(3, [4, 6, 3], 30.0);
    for bc in [KUBC, PBC] {
        let k = tensor(&g, bc);
        let r = tensor(&g.rotated_90_z(), bc);
        assert!(max_diff(&r, &k.rotated_90_z()) <= 1e-8 * k.max_abs(), "{bc:?}");
    }
}

#[test]
fn line_direction_sets_principal_axes() {
    let db = small_layout(SyntheticLayoutSpec {
        alternate: false,
        via_pitch_lines: 0,
        ..Default::default()
    });
    let index = LayoutIndex::new(&db).unwrap();
    let stack = LayerStack::demo();
    let k = tensor(&window(&index, &stack, (6.0, 6.0), 0.5, 20, 1), PBC);
    assert!(k.xx > 10.0 * k.yy, "{k:?}");
    assert!(k.max_abs_off_diagonal() <= 1e-8 * k.xx);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn kubc_bounds_pbc_from_above(seed in any::<u64>(), contrast in 2.0f64..300.0) {
        let g = random_grid(seed, [4, 4, 4], contrast);
        let d = tensor(&g, KUBC).sub(&tensor(&g, PBC));
        let ev = d.eigenvalues();
        prop_assert!(ev[0] >= -1e-9 * contrast, "{:?}", ev);
    }

    #[test]
    fn hill_mandel_holds_per_load_case(seed in any::<u64>(), contrast in 1.5f64..1000.0, kubc in any::<bool>()) {
        let g = random_grid(seed, [3, 4, 5], contrast);
        let opts = HomogenizationOptions::with_bc(if kubc { KUBC } else { PBC });
        for axis in 0..3 {
            let mut gradient = [0.0; 3];
            gradient[axis] = 1.0;
            let field = solve_loadcase(&g, gradient, &opts).unwrap();
            prop_assert!(verify_hill_mandel(&g, &field) <= 1e-8);
        }
    }

    #[test]
    fn tensor_lies_between_phase_bounds(seed in any::<u64>(), contrast in 1.5f64..500.0) {
        let g = random_grid(seed, [4, 3, 4], contrast);
        for bc in [KUBC, PBC] {
            let ev = tensor(&g, bc).eigenvalues();
            prop_assert!(ev[0] >= 1.0 - 1e-9 && ev[2] <= contrast * (1.0 + 1e-9), "{:?}", ev);
        }
    }
}
