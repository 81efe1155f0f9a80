mod common;

use beol_therm::geometry::Rect;
use beol_therm::homogenize::ConductivityTensor;
use beol_therm::macro_fem::{
    build_macro_mesh, sample_plane, solve_macro, BottomFlux, BoundarySpec, Circle, Convection, ConvectionPreset,
    DirichletPatch, Face, MacroMeshSpec, MacroModel, TemperatureField, DEFAULT_AMBIENT_C,
};

fn mesh_spec(n: usize) -> MacroMeshSpec {
    MacroMeshSpec {
        elements_xy: [n, n],
        ..Default::default()
    }
}

fn model(n: usize, beol: ConductivityTensor) -> MacroModel {
    MacroModel::uniform(build_macro_mesh(&mesh_spec(n)).unwrap(), beol)
}

fn patches(phi: f64) -> BottomFlux {
    BottomFlux::patch_array(&Rect::new(0.0, 0.0, 100.0, 100.0), 2, 40.0, 20.0, phi)
}

fn spec(flux: BottomFlux, preset: ConvectionPreset) -> BoundarySpec {
    BoundarySpec {
        bottom_flux: flux,
        top_convection: Convection::preset(preset),
        dirichlet: Vec::new(),
    }
}

fn rise(field: &TemperatureField) -> Vec<f64> {
    field.values.iter().map(|t| t - field.t_amb_c).collect()
}

#[test]
fn response_is_linear_in_the_flux() {
    let m = model(16, ConductivityTensor::isotropic(139.4));
    let half = |i: usize| {
        let all = match patches(1.0) {
            BottomFlux::Patches { circles, .. } => circles,
            _ => unreachable!(),
        };
        BottomFlux::Patches {
            circles: all.into_iter().skip(i).step_by(2).collect::<Vec<Circle>>(),
            phi_w_per_mm2: 1.0,
        }
    };
    let a = solve_macro(&m, &spec(half(0), ConvectionPreset::HeatSink)).unwrap();
    let b = solve_macro(&m, &spec(half(1), ConvectionPreset::HeatSink)).unwrap();
    let both = solve_macro(&m, &spec(patches(1.0), ConvectionPreset::HeatSink)).unwrap();
    let tripled = solve_macro(&m, &spec(patches(1.0), ConvectionPreset::HeatSink).with_scaled_flux(3.0)).unwrap();
    let (ra, rb, rab, r3) = (rise(&a), rise(&b), rise(&both), rise(&tripled));
    let scale = rab.iter().copied().fold(0.0, f64::max);
    for n in 0..ra.len() {
        assert!((ra[n] + rb[n] - rab[n]).abs() <= 1e-7 * scale);
        assert!((3.0 * rab[n] - r3[n]).abs() <= 1e-7 * scale);
    }
}

#[test]
fn hottest_point_is_on_the_heated_face_and_nothing_is_below_ambient() {
    let m = model(20, ConductivityTensor::from_components([30.0, 20.0, 3.0, 1.0, 0.5, -0.4]));
    let f = solve_macro(&m, &spec(patches(1.0), ConvectionPreset::Weak)).unwrap();
    let layer = (m.mesh.nx() + 1) * (m.mesh.ny() + 1);
    let bottom_max = f.values[..layer].iter().copied().fold(f64::MIN, f64::max);
    assert_eq!(bottom_max, f.max());
    assert!(f.min() >= DEFAULT_AMBIENT_C);
    let top_min = f.values[f.values.len() - layer..].iter().copied().fold(f64::MAX, f64::min);
    assert_eq!(top_min, f.min());
}

#[test]
fn patch_solution_converges_under_mesh_refinement() {
    let peak = |n: usize| {
        let f = solve_macro(&model(n, ConductivityTensor::isotropic(139.4)), &spec(patches(1.0), ConvectionPreset::HeatSink))
            .unwrap();
        (f.max() - DEFAULT_AMBIENT_C, f.power_in_w)
    };
    let (t10, p10) = peak(10);
    let (t20, p20) = peak(20);
    let (t40, p40) = peak(40);
    assert!((t40 - t20).abs() < (t20 - t10).abs(), "{t10} {t20} {t40}");
    let exact = 4.0 * std::f64::consts::PI * 100.0 * 1e-6;
    assert!((p40 - exact).abs() < (p10 - exact).abs() && (p20 - exact).abs() < (p10 - exact).abs(), "{p10} {p20} {p40}");
}

#[test]
fn weaker_vertical_conduction_heats_the_bottom_plane() {
    let base = ConductivityTensor::from_components([30.0, 20.0, 2.8, 0.0, 0.0, 0.0]);
    let weak = ConductivityTensor::from_components([30.0, 20.0, 0.28, 0.0, 0.0, 0.0]);
    let bc = spec(patches(1.0), ConvectionPreset::HeatSink);
    let fa = solve_macro(&model(20, base), &bc).unwrap();
    let fb = solve_macro(&model(20, weak), &bc).unwrap();
    let m = model(20, base);
    let pa = sample_plane(&m.mesh, &fa, m.mesh.zs[0], [41, 41]).unwrap();
    let pb = sample_plane(&m.mesh, &fb, m.mesh.zs[0], [41, 41]).unwrap();
    assert!(pa.values.iter().zip(&pb.values).all(|(a, b)| b >= a));
    assert!(pb.values.iter().copied().fold(f64::MIN, f64::max) > pa.values.iter().copied().fold(f64::MIN, f64::max));
}

#[test]
fn fixed_temperature_patch_absorbs_the_balance() {
    let m = model(16, ConductivityTensor::isotropic(139.4));
    let bc = BoundarySpec {
        bottom_flux: BottomFlux::Uniform { phi_w_per_mm2: 0.1256 },
        top_convection: Convection::preset(ConvectionPreset::Weak),
        dirichlet: vec![DirichletPatch {
            face: Face::Top,
            region: Rect::new(25.0, 25.0, 75.0, 75.0),
            temperature_c: 45.0,
        }],
    };
    let f = solve_macro(&m, &bc).unwrap();
    assert!(f.energy_imbalance() <= 1e-6, "{}", f.energy_imbalance());
    assert!(f.power_dirichlet_w > 0.75 * f.power_in_w);
    let corner = m.mesh.node(8, 8, m.mesh.nz());
    assert_eq!(f.values[corner], 45.0);
}
