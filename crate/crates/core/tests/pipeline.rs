use std::collections::BTreeMap;
use std::path::Path;

use beol_therm::macro_fem::{ConvectionPreset, MacroMeshSpec};
use beol_therm::pipeline::{
    run_config, run_pipeline, FluxPreset, PipelineConfig, PipelineError, RveOptions, ARTIFACTS, MANIFEST_JSON,
};
use beol_therm::synthetic::SyntheticLayoutSpec;

/// Coarse, quick configuration; via dropout makes most windows distinct.
fn small_config(flux: FluxPreset, elements: usize) -> PipelineConfig {
    let mut c = PipelineConfig::demo(
        SyntheticLayoutSpec {
            via_dropout: 0.3,
            seed: 11,
            ..SyntheticLayoutSpec::with_band()
        },
        flux,
        ConvectionPreset::HeatSink,
    );
    c.rve = RveOptions {
        half_size_um: 1.0,
        voxels_per_edge_xy: 20,
        voxels_per_layer_z: 1,
    };
    c.mesh = MacroMeshSpec {
        elements_xy: [elements, elements],
        ..Default::default()
    };
    c.plane_resolution = [41, 41];
    c
}

fn read_dir(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect()
}

/// Manifest with the per-run section removed.
fn stable_manifest(bytes: &[u8]) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_slice(bytes).unwrap();
    v.as_object_mut().unwrap().remove("run");
    v
}

fn assert_same_artifacts(a: &Path, b: &Path) {
    let (fa, fb) = (read_dir(a), read_dir(b));
    assert_eq!(fa.keys().collect::<Vec<_>>(), fb.keys().collect::<Vec<_>>());
    for (name, bytes) in &fa {
        if name == MANIFEST_JSON {
            assert_eq!(stable_manifest(bytes), stable_manifest(&fb[name]));
        } else {
            assert!(bytes == &fb[name], "{name} differs");
        }
    }
}

#[test]
fn worker_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = small_config(FluxPreset::Uniform, 6);
    config.jobs = 1;
    let serial = run_config(&config, dir.path(), Some(&dir.path().join("j1"))).unwrap();
    config.jobs = 8;
    let parallel = run_config(&config, dir.path(), Some(&dir.path().join("j8"))).unwrap();
    assert!(serial.map.stats.unique_solves > 20);
    assert_eq!(serial.map.tensors, parallel.map.tensors);
    assert_eq!(serial.field.values, parallel.field.values);
    assert_same_artifacts(&dir.path().join("j1"), &dir.path().join("j8"));
}

#[test]
fn cached_rerun_hits_every_window_and_reproduces_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = small_config(FluxPreset::Uniform, 5);
    config.cache_dir = Some("cache".into());
    let path = dir.path().join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(&config).unwrap()).unwrap();

    let first = run_pipeline(&path, &dir.path().join("a"), Some(4)).unwrap();
    assert_eq!(first.manifest.run.cache_hits, 0);
    let second = run_pipeline(&path, &dir.path().join("b"), Some(2)).unwrap();
    assert_eq!(second.manifest.run.cache_hits, 25);
    assert_eq!(second.manifest.run.unique_rve_solves, 0);
    for (x, y) in first.map.tensors.iter().zip(&second.map.tensors) {
        assert_eq!(x.components().map(f64::to_bits), y.components().map(f64::to_bits));
    }
    assert_same_artifacts(&dir.path().join("a"), &dir.path().join("b"));

    let written = read_dir(&dir.path().join("a"));
    assert_eq!(written.len(), ARTIFACTS.len());
    for name in ARTIFACTS {
        assert!(written.contains_key(name), "{name}");
    }
}

#[test]
fn changed_options_miss_the_cache() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = small_config(FluxPreset::Uniform, 3);
    config.cache_dir = Some("cache".into());
    run_config(&config, dir.path(), None).unwrap();
    config.rve.voxels_per_layer_z = 2;
    let again = run_config(&config, dir.path(), None).unwrap();
    assert_eq!(again.map.stats.cache_hits, 0);
}

#[test]
fn patch_preset_produces_four_hot_spots() {
    let mut config = small_config(FluxPreset::Patches, 20);
    config.layout = beol_therm::pipeline::LayoutSource::Synthetic(SyntheticLayoutSpec::default());
    config.plane_resolution = [101, 101];
    config.jobs = 4;
    let out = run_config(&config, Path::new("."), None).unwrap();
    let p = &out.plane_bb;
    let (nx, ny) = (p.xs.len(), p.ys.len());
    let mut peaks = Vec::new();
    for j in 1..ny - 1 {
        for i in 1..nx - 1 {
            let v = p.at(i, j);
            let neighbours = [(0, 1), (2, 1), (1, 0), (1, 2), (0, 0), (2, 2), (0, 2), (2, 0)];
            if neighbours.iter().all(|&(a, b)| v > p.at(i + a - 1, j + b - 1)) {
                peaks.push((p.xs[i], p.ys[j]));
            }
        }
    }
    assert_eq!(peaks.len(), 4, "{peaks:?}");
    for (x, y) in peaks {
        assert!(((x - 30.0).abs() < 2.0 || (x - 70.0).abs() < 2.0) && ((y - 30.0).abs() < 2.0 || (y - 70.0).abs() < 2.0));
    }
}

#[test]
fn errors_name_their_stage() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = small_config(FluxPreset::Uniform, 2);
    config.layout = beol_therm::pipeline::LayoutSource::Gds("missing.gds".into());
    let err = run_config(&config, dir.path(), None).unwrap_err();
    assert_eq!(err.stage(), "io");
    assert!(err.to_string().starts_with("[io]") && err.to_string().contains("missing.gds"));

    std::fs::write(dir.path().join("bad.gds"), [0u8, 6, 0, 2, 0, 5]).unwrap();
    config.layout = beol_therm::pipeline::LayoutSource::Gds("bad.gds".into());
    let err = run_config(&config, dir.path(), None).unwrap_err();
    assert!(matches!(err, PipelineError::Layout(_)), "{err}");

    let mut config = small_config(FluxPreset::Uniform, 2);
    config.boundary.convection.preset = None;
    assert_eq!(run_config(&config, dir.path(), None).unwrap_err().stage(), "config");
}

#[test]
fn bundled_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/configs");
    for name in ["demo_uniform.json", "demo_patches.json"] {
        let c = PipelineConfig::load(&dir.join(name)).unwrap();
        assert_eq!(c.mesh.elements_xy, [50, 50]);
        assert!(c.cache_dir.is_some());
    }
}
