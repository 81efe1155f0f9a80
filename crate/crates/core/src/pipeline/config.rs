use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::homogenize::HomogenizationOptions;
use crate::macro_fem::{
    BottomFlux, BoundarySpec, Convection, ConvectionPreset, DirichletPatch, MacroMeshSpec, DEFAULT_AMBIENT_C,
};
use crate::rve::{DEFAULT_HALF_SIZE_UM, DEFAULT_VOXELS_PER_EDGE_XY, DEFAULT_VOXELS_PER_LAYER_Z};
use crate::synthetic::SyntheticLayoutSpec;

/// Uniform bottom flux of the reference configuration, W/mm².
pub const DEMO_UNIFORM_FLUX: f64 = 0.1256;
/// Patch flux of the reference configuration, W/mm².
pub const DEMO_PATCH_FLUX: f64 = 1.0;
pub const DEMO_PATCH_DIAMETER_UM: f64 = 20.0;
pub const DEMO_PATCH_PITCH_UM: f64 = 40.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayoutSource {
    /// GDSII file, relative to the config file.
    Gds(PathBuf),
    Synthetic(SyntheticLayoutSpec),
}

/// RVE options shared by every window of a map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RveOptions {
    pub half_size_um: f64,
    pub voxels_per_edge_xy: usize,
    pub voxels_per_layer_z: usize,
}

impl Default for RveOptions {
    fn default() -> Self {
        Self {
            half_size_um: DEFAULT_HALF_SIZE_UM,
            voxels_per_edge_xy: DEFAULT_VOXELS_PER_EDGE_XY,
            voxels_per_layer_z: DEFAULT_VOXELS_PER_LAYER_Z,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FluxPreset {
    /// 0.1256 W/mm² over the whole bottom face.
    Uniform,
    /// Four 20 µm circles at 40 µm pitch, 1.0 W/mm².
    Patches,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FluxConfig {
    Preset { preset: FluxPreset },
    Explicit(BottomFlux),
}

/// Film coefficient given either by preset name or explicit value; one of
/// the two is required.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvectionConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<ConvectionPreset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_w_per_k_mm2: Option<f64>,
    #[serde(default = "default_ambient")]
    pub t_amb_c: f64,
}

fn default_ambient() -> f64 {
    DEFAULT_AMBIENT_C
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryConfig {
    pub flux: FluxConfig,
    pub convection: ConvectionConfig,
    #[serde(default)]
    pub dirichlet: Vec<DirichletPatch>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub layout: LayoutSource,
    /// Stack JSON relative to the config file; the bundled demo stack when
    /// absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stack: Option<PathBuf>,
    /// Chip coordinates of the footprint's minimum corner, µm.
    #[serde(default)]
    pub layout_origin_um: [f64; 2],
    #[serde(default)]
    pub rve: RveOptions,
    #[serde(default)]
    pub homogenization: HomogenizationOptions,
    #[serde(default)]
    pub mesh: MacroMeshSpec,
    pub boundary: BoundaryConfig,
    #[serde(default = "default_plane_resolution")]
    pub plane_resolution: [usize; 2],
    /// Tensor cache directory relative to the config file; disabled when
    /// absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
    /// Worker threads; not serialized.
    #[serde(default = "default_jobs", skip_serializing)]
    pub jobs: usize,
}

fn default_plane_resolution() -> [usize; 2] {
    [101, 101]
}

fn default_jobs() -> usize {
    1
}

impl PipelineConfig {
    /// Synthetic 11-level layout on the demo stack with the given flux
    /// preset and film coefficient.
    pub fn demo(layout: SyntheticLayoutSpec, flux: FluxPreset, convection: ConvectionPreset) -> Self {
        Self {
            layout: LayoutSource::Synthetic(layout),
            stack: None,
            layout_origin_um: [0.0, 0.0],
            rve: RveOptions::default(),
            homogenization: HomogenizationOptions::default(),
            mesh: MacroMeshSpec::default(),
            boundary: BoundaryConfig {
                flux: FluxConfig::Preset { preset: flux },
                convection: ConvectionConfig {
                    preset: Some(convection),
                    h_w_per_k_mm2: None,
                    t_amb_c: DEFAULT_AMBIENT_C,
                },
                dirichlet: Vec::new(),
            },
            plane_resolution: default_plane_resolution(),
            cache_dir: None,
            jobs: 1,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        serde_json::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn boundary_spec(&self, footprint: &crate::geometry::Rect) -> Result<BoundarySpec, PipelineError> {
        let c = &self.boundary.convection;
        let h = match (c.preset, c.h_w_per_k_mm2) {
            (Some(p), None) => p.h_w_per_k_mm2(),
            (None, Some(h)) => h,
            (Some(_), Some(_)) => {
                return Err(PipelineError::Config("give either a convection preset or h_w_per_k_mm2, not both".into()))
            }
            (None, None) => {
                return Err(PipelineError::Config("convection needs a preset or h_w_per_k_mm2".into()));
            }
        };
        let bottom_flux = match &self.boundary.flux {
            FluxConfig::Preset { preset: FluxPreset::Uniform } => BottomFlux::Uniform {
                phi_w_per_mm2: DEMO_UNIFORM_FLUX,
            },
            FluxConfig::Preset { preset: FluxPreset::Patches } => BottomFlux::patch_array(
                footprint,
                2,
                DEMO_PATCH_PITCH_UM,
                DEMO_PATCH_DIAMETER_UM,
                DEMO_PATCH_FLUX,
            ),
            FluxConfig::Explicit(f) => f.clone(),
        };
        Ok(BoundarySpec {
            bottom_flux,
            top_convection: Convection {
                h_w_per_k_mm2: h,
                t_amb_c: c.t_amb_c,
            },
            dirichlet: self.boundary.dirichlet.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let c = PipelineConfig::from_json(
            r#"{"layout": {"gds": "chip.gds"},
                "boundary": {"flux": {"preset": "patches"}, "convection": {"preset": "heat_sink"}}}"#,
        )
        .unwrap();
        assert_eq!(c.layout, LayoutSource::Gds("chip.gds".into()));
        assert_eq!(c.rve, RveOptions::default());
        assert_eq!(c.mesh.elements_xy, [50, 50]);
        assert_eq!(c.boundary.convection.t_amb_c, 40.0);
        let bc = c.boundary_spec(&crate::geometry::Rect::new(0.0, 0.0, 100.0, 100.0)).unwrap();
        match bc.bottom_flux {
            BottomFlux::Patches { circles, phi_w_per_mm2 } => {
                assert_eq!(circles.len(), 4);
                assert_eq!(circles[0].center, [30.0, 30.0]);
                assert_eq!(phi_w_per_mm2, 1.0);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(bc.top_convection.h_w_per_k_mm2, 4.0);
    }

    #[test]
    fn convection_coefficient_is_required() {
        let c = PipelineConfig::from_json(
            r#"{"layout": {"synthetic": {}},
                "boundary": {"flux": {"kind": "uniform", "phi_w_per_mm2": 0.5}, "convection": {}}}"#,
        )
        .unwrap();
        assert!(matches!(c.boundary.flux, FluxConfig::Explicit(BottomFlux::Uniform { .. })));
        let err = c.boundary_spec(&crate::geometry::Rect::new(0.0, 0.0, 1.0, 1.0)).unwrap_err();
        assert!(err.to_string().contains("convection"));
    }

    #[test]
    fn demo_round_trips_through_json() {
        let c = PipelineConfig::demo(SyntheticLayoutSpec::with_band(), FluxPreset::Uniform, ConvectionPreset::Weak);
        let text = serde_json::to_string_pretty(&c).unwrap();
        assert_eq!(PipelineConfig::from_json(&text).unwrap(), c);
    }
}
