//! End-to-end workflow: layout and stack in, conductivity map, chip-scale
//! temperature field and plane samples out.

mod config;
mod map;

use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use serde::Serialize;
use thiserror::Error;

pub use config::{
    BoundaryConfig, ConvectionConfig, FluxConfig, FluxPreset, LayoutSource, PipelineConfig, RveOptions,
    DEMO_PATCH_DIAMETER_UM, DEMO_PATCH_FLUX, DEMO_PATCH_PITCH_UM, DEMO_UNIFORM_FLUX,
};
pub use map::{build_conductivity_map, sha256_hex, ConductivityMap, MapStats, Provenance, TensorCache};

use crate::gds::{parse_gdsii, write_gdsii, GdsError, LayoutDatabase, LayoutIndex};
use crate::homogenize::HomogenizationError;
use crate::macro_fem::{
    build_macro_mesh, field_to_vtk, sample_plane, solve_macro, MacroError, MacroMesh, MacroModel, PlaneSample,
    Region, TemperatureField,
};
use crate::numerics::SolveReport;
use crate::rve::RveError;
use crate::stack::{load_stack, LayerStack, StackError};
use crate::synthetic::SyntheticError;

pub const CONDUCTIVITY_CSV: &str = "conductivity_map.csv";
pub const CONDUCTIVITY_VTK: &str = "conductivity_map.vtk";
pub const TEMPERATURE_VTK: &str = "temperature.vtk";
pub const PLANE_TT_CSV: &str = "plane_tt.csv";
pub const PLANE_BB_CSV: &str = "plane_bb.csv";
pub const MANIFEST_JSON: &str = "manifest.json";
pub const ARTIFACTS: [&str; 6] = [
    CONDUCTIVITY_CSV,
    CONDUCTIVITY_VTK,
    TEMPERATURE_VTK,
    PLANE_TT_CSV,
    PLANE_BB_CSV,
    MANIFEST_JSON,
];

/// Errors tagged with the stage that produced them.
#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("[config] {0}")]
    Config(String),
    #[error("[layout] {0}")]
    Layout(#[from] GdsError),
    #[error("[layout] {0}")]
    Synthetic(#[from] SyntheticError),
    #[error("[stack] {0}")]
    Stack(#[from] StackError),
    #[error("[rve] window at ({x}, {y}) µm: {source}")]
    Rve { x: f64, y: f64, source: RveError },
    #[error("[homogenize] window at ({x}, {y}) µm: {source}")]
    Homogenize {
        x: f64,
        y: f64,
        source: HomogenizationError,
    },
    #[error("[macro] {0}")]
    Macro(#[from] MacroError),
    #[error("[io] {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl PipelineError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        PipelineError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn stage(&self) -> &'static str {
        match self {
            PipelineError::Config(_) => "config",
            PipelineError::Layout(_) | PipelineError::Synthetic(_) => "layout",
            PipelineError::Stack(_) => "stack",
            PipelineError::Rve { .. } => "rve",
            PipelineError::Homogenize { .. } => "homogenize",
            PipelineError::Macro(_) => "macro",
            PipelineError::Io { .. } => "io",
        }
    }
}

/// Layout loaded from a config, with the hash of its GDSII bytes.
pub struct LoadedLayout {
    pub db: LayoutDatabase,
    pub hash: String,
}

pub fn load_layout(source: &LayoutSource, base: &Path) -> Result<LoadedLayout, PipelineError> {
    let bytes = match source {
        LayoutSource::Gds(p) => {
            let path = base.join(p);
            std::fs::read(&path).map_err(|e| PipelineError::io(&path, e))?
        }
        LayoutSource::Synthetic(spec) => write_gdsii(&crate::synthetic::generate_synthetic_layout(spec)?)?,
    };
    Ok(LoadedLayout {
        hash: sha256_hex(&bytes),
        db: parse_gdsii(&bytes)?,
    })
}

pub fn load_stack_for(config: &PipelineConfig, base: &Path) -> Result<LayerStack, PipelineError> {
    match &config.stack {
        Some(p) => {
            let path = base.join(p);
            let text = std::fs::read_to_string(&path).map_err(|e| PipelineError::io(&path, e))?;
            Ok(load_stack(&text)?)
        }
        None => Ok(LayerStack::demo()),
    }
}

/// Chip-scale model with the map's tensors, mirrored in z, in the BEOL.
pub fn macro_model_from_map(mesh: MacroMesh, map: &ConductivityMap) -> MacroModel {
    MacroModel::with_beol_map(mesh, |i, j| map.at(i, j).z_flipped())
}

#[derive(Debug, Clone, Serialize)]
pub struct Timings {
    pub layout_s: f64,
    pub map_s: f64,
    pub macro_s: f64,
    pub output_s: f64,
}

/// Fields of the manifest that legitimately differ between identical runs.
#[derive(Debug, Clone, Serialize)]
pub struct RunStats {
    pub timings: Timings,
    pub cache_hits: usize,
    pub unique_rve_solves: usize,
    pub jobs: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub config: PipelineConfig,
    pub layout_hash: String,
    pub stack_hash: String,
    pub map_samples: usize,
    pub macro_elements: usize,
    pub macro_nodes: usize,
    pub macro_report: SolveReport,
    pub power_in_w: f64,
    pub power_out_w: f64,
    pub energy_imbalance: f64,
    pub temperature_min_c: f64,
    pub temperature_max_c: f64,
    pub plane_tt_z_um: f64,
    pub plane_bb_z_um: f64,
    pub artifacts: Vec<String>,
    pub run: RunStats,
}

/// Everything a run produces, kept in memory for callers and tests.
#[derive(Debug)]
pub struct PipelineOutput {
    pub map: ConductivityMap,
    pub model: MacroModel,
    pub field: TemperatureField,
    pub plane_tt: PlaneSample,
    pub plane_bb: PlaneSample,
    pub manifest: Manifest,
}

/// Run the workflow described by `config`; relative paths resolve against
/// `base`. Artifacts are written to `out` when given.
pub fn run_config(
    config: &PipelineConfig,
    base: &Path,
    out: Option<&Path>,
) -> Result<PipelineOutput, PipelineError> {
    let t0 = Instant::now();
    let layout = load_layout(&config.layout, base)?;
    let stack = load_stack_for(config, base)?;
    let index = LayoutIndex::new(&layout.db)?;
    let mesh = build_macro_mesh(&config.mesh)?;
    let bc = config.boundary_spec(&mesh.footprint())?;
    let t_layout = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let provenance = Provenance {
        layout_hash: layout.hash.clone(),
        stack_hash: sha256_hex(stack.to_json().as_bytes()),
        rve: config.rve,
        homogenization: config.homogenization,
    };
    let cache = match &config.cache_dir {
        Some(dir) => Some(TensorCache::open(base.join(dir))?),
        None => None,
    };
    let map = build_conductivity_map(
        &index,
        &stack,
        &mesh,
        config.layout_origin_um,
        &provenance,
        config.jobs,
        cache.as_ref(),
    )?;
    info!(
        "conductivity map: {} samples, {} cache hits, {} distinct RVE solves",
        map.stats.samples, map.stats.cache_hits, map.stats.unique_solves
    );
    let t_map = t1.elapsed().as_secs_f64();

    let t2 = Instant::now();
    let beol_top = mesh.region_top(Region::Beol).expect("mesh has a BEOL region");
    let model = macro_model_from_map(mesh, &map);
    let field = solve_macro(&model, &bc)?;
    let plane_tt = sample_plane(&model.mesh, &field, beol_top, config.plane_resolution)?;
    let plane_bb = sample_plane(&model.mesh, &field, model.mesh.zs[0], config.plane_resolution)?;
    let t_macro = t2.elapsed().as_secs_f64();

    let t3 = Instant::now();
    let mut manifest = Manifest {
        config: config.clone(),
        layout_hash: provenance.layout_hash.clone(),
        stack_hash: provenance.stack_hash.clone(),
        map_samples: map.tensors.len(),
        macro_elements: model.mesh.element_count(),
        macro_nodes: model.mesh.node_count(),
        macro_report: field.report,
        power_in_w: field.power_in_w,
        power_out_w: field.power_convected_w + field.power_dirichlet_w,
        energy_imbalance: field.energy_imbalance(),
        temperature_min_c: field.min(),
        temperature_max_c: field.max(),
        plane_tt_z_um: plane_tt.z,
        plane_bb_z_um: plane_bb.z,
        artifacts: ARTIFACTS.iter().map(|s| s.to_string()).collect(),
        run: RunStats {
            timings: Timings {
                layout_s: t_layout,
                map_s: t_map,
                macro_s: t_macro,
                output_s: 0.0,
            },
            cache_hits: map.stats.cache_hits,
            unique_rve_solves: map.stats.unique_solves,
            jobs: config.jobs,
        },
    };
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
        let write = |name: &str, text: &str| {
            let p = dir.join(name);
            std::fs::write(&p, text).map_err(|e| PipelineError::io(&p, e))
        };
        write(CONDUCTIVITY_CSV, &map.to_csv())?;
        write(CONDUCTIVITY_VTK, &map.to_vtk(&model.mesh, 0.0, beol_top))?;
        write(TEMPERATURE_VTK, &field_to_vtk(&model, &field))?;
        write(PLANE_TT_CSV, &plane_tt.to_csv())?;
        write(PLANE_BB_CSV, &plane_bb.to_csv())?;
        manifest.run.timings.output_s = t3.elapsed().as_secs_f64();
        write(
            MANIFEST_JSON,
            &serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
        )?;
    }
    Ok(PipelineOutput {
        map,
        model,
        field,
        plane_tt,
        plane_bb,
        manifest,
    })
}

/// Load a config file and run it, writing artifacts to `out`. `jobs`
/// overrides the config's worker count.
pub fn run_pipeline(config_path: &Path, out: &Path, jobs: Option<usize>) -> Result<PipelineOutput, PipelineError> {
    let mut config = PipelineConfig::load(config_path)?;
    if let Some(j) = jobs {
        config.jobs = j;
    }
    let base = config_path.parent().unwrap_or_else(|| Path::new("."));
    run_config(&config, base, Some(out))
}
