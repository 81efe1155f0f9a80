//! Process stack: ordered layers with z-extents, layout layer numbers and
//! materials, loaded from a JSON document.
//!
//! ```json
//! { "materials": { "copper": {"k_w_per_m_k": 400.0} },
//!   "layers": [ {"name": "M1", "kind": "line", "thickness_um": 0.22,
//!                "gds_layer": 2, "gds_datatype": 0,
//!                "metal": "copper", "background": "oxide"} ] }
//! ```
//!
//! Layers are listed bottom-up. `z_bottom_um` may be given per layer; when
//! omitted it is accumulated from the thicknesses below.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Contiguity tolerance between adjacent layers, µm.
pub const Z_TOLERANCE_UM: f64 = 1e-9;

const DEMO_STACK: &str = include_str!("../data/demo_stack.json");

#[derive(Debug, Error)]
pub enum StackError {
    #[error("stack document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("stack has no layers")]
    Empty,
    #[error("gap between layers '{lower}' (top at {lower_top} µm) and '{upper}' (bottom at {upper_bottom} µm)")]
    Gap {
        lower: String,
        upper: String,
        lower_top: f64,
        upper_bottom: f64,
    },
    #[error("overlap between layers '{lower}' (top at {lower_top} µm) and '{upper}' (bottom at {upper_bottom} µm)")]
    Overlap {
        lower: String,
        upper: String,
        lower_top: f64,
        upper_bottom: f64,
    },
    #[error("layer '{layer}' references unknown material '{material}'")]
    UnknownMaterial { layer: String, material: String },
    #[error("layer '{0}' has non-positive thickness")]
    NonPositiveThickness(String),
    #[error("material '{0}' has non-positive conductivity")]
    NonPositiveConductivity(String),
    #[error("layer '{0}': {1}")]
    InvalidLayer(String, String),
    #[error("z = {z} µm outside stack [0, {total})")]
    OutOfRange { z: f64, total: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub name: String,
    /// Isotropic conductivity, W/(m·K).
    pub conductivity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Line,
    Via,
    Dielectric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessLayer {
    pub name: String,
    pub kind: LayerKind,
    pub z_bottom: f64,
    pub thickness: f64,
    pub gds_layer: Option<i16>,
    pub gds_datatype: i16,
    pub metal: Option<Material>,
    pub background: Material,
}

impl ProcessLayer {
    pub fn z_top(&self) -> f64 {
        self.z_bottom + self.thickness
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerStack {
    pub layers: Vec<ProcessLayer>,
    pub total_thickness: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct MaterialDoc {
    k_w_per_m_k: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct LayerDoc {
    name: String,
    kind: LayerKind,
    thickness_um: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    z_bottom_um: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gds_layer: Option<i16>,
    #[serde(default)]
    gds_datatype: i16,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    metal: Option<String>,
    background: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct StackDoc {
    materials: BTreeMap<String, MaterialDoc>,
    layers: Vec<LayerDoc>,
}

/// Parse and validate a stack document.
pub fn load_stack(document: &str) -> Result<LayerStack, StackError> {
    let doc: StackDoc = serde_json::from_str(document)?;
    for (name, m) in &doc.materials {
        if !(m.k_w_per_m_k > 0.0) {
            return Err(StackError::NonPositiveConductivity(name.clone()));
        }
    }
    let material = |layer: &str, name: &str| {
        doc.materials
            .get(name)
            .map(|m| Material {
                name: name.to_owned(),
                conductivity: m.k_w_per_m_k,
            })
            .ok_or_else(|| StackError::UnknownMaterial {
                layer: layer.to_owned(),
                material: name.to_owned(),
            })
    };

    let mut layers = Vec::with_capacity(doc.layers.len());
    let mut z = 0.0;
    for l in &doc.layers {
        if !(l.thickness_um > 0.0) {
            return Err(StackError::NonPositiveThickness(l.name.clone()));
        }
        let metal = l.metal.as_deref().map(|m| material(&l.name, m)).transpose()?;
        let background = material(&l.name, &l.background)?;
        match (l.kind, &metal, l.gds_layer) {
            (LayerKind::Dielectric, Some(_), _) => {
                return Err(StackError::InvalidLayer(
                    l.name.clone(),
                    "dielectric layer must not name a metal".into(),
                ))
            }
            (LayerKind::Line | LayerKind::Via, None, _) => {
                return Err(StackError::InvalidLayer(l.name.clone(), "metal material required".into()))
            }
            (LayerKind::Line | LayerKind::Via, Some(_), None) => {
                return Err(StackError::InvalidLayer(l.name.clone(), "gds_layer required".into()))
            }
            _ => {}
        }
        let z_bottom = l.z_bottom_um.unwrap_or(z);
        layers.push(ProcessLayer {
            name: l.name.clone(),
            kind: l.kind,
            z_bottom,
            thickness: l.thickness_um,
            gds_layer: if l.kind == LayerKind::Dielectric { None } else { l.gds_layer },
            gds_datatype: l.gds_datatype,
            metal,
            background,
        });
        z = z_bottom + l.thickness_um;
    }
    LayerStack::new(layers)
}

impl LayerStack {
    /// Validate contiguity (starting at z = 0) and compute the total.
    pub fn new(layers: Vec<ProcessLayer>) -> Result<Self, StackError> {
        let first = layers.first().ok_or(StackError::Empty)?;
        if first.z_bottom.abs() > Z_TOLERANCE_UM {
            return Err(StackError::Gap {
                lower: "<substrate>".into(),
                upper: first.name.clone(),
                lower_top: 0.0,
                upper_bottom: first.z_bottom,
            });
        }
        for w in layers.windows(2) {
            let (lo, hi) = (&w[0], &w[1]);
            let d = hi.z_bottom - lo.z_top();
            if d.abs() > Z_TOLERANCE_UM {
                let (lower, upper) = (lo.name.clone(), hi.name.clone());
                let (lower_top, upper_bottom) = (lo.z_top(), hi.z_bottom);
                return Err(if d > 0.0 {
                    StackError::Gap {
                        lower,
                        upper,
                        lower_top,
                        upper_bottom,
                    }
                } else {
                    StackError::Overlap {
                        lower,
                        upper,
                        lower_top,
                        upper_bottom,
                    }
                });
            }
        }
        let total_thickness = layers.iter().map(|l| l.thickness).sum();
        Ok(Self {
            layers,
            total_thickness,
        })
    }

    /// The 12-level demonstration stack: six via and five line levels of
    /// copper (400 W/(m·K)) in dielectric (1.4 W/(m·K)) under a 2 µm field
    /// oxide cap, 4.3 µm in total.
    pub fn demo() -> Self {
        load_stack(DEMO_STACK).expect("bundled demo stack is valid")
    }

    pub fn demo_document() -> &'static str {
        DEMO_STACK
    }

    /// Index of the layer whose half-open interval `[z_bottom, z_top)`
    /// contains `z`.
    pub fn layer_index_at(&self, z: f64) -> Result<usize, StackError> {
        if !(z >= 0.0 && z < self.total_thickness) {
            return Err(StackError::OutOfRange {
                z,
                total: self.total_thickness,
            });
        }
        let i = self.layers.partition_point(|l| l.z_bottom <= z);
        Ok(i.saturating_sub(1))
    }

    pub fn layer_at(&self, z: f64) -> Result<&ProcessLayer, StackError> {
        self.layer_index_at(z).map(|i| &self.layers[i])
    }

    /// Distinct materials in first-use order (background before metal per layer).
    pub fn materials(&self) -> Vec<Material> {
        let mut out: Vec<Material> = Vec::new();
        for l in &self.layers {
            for m in std::iter::once(&l.background).chain(l.metal.as_ref()) {
                if !out.iter().any(|o| o.name == m.name) {
                    out.push(m.clone());
                }
            }
        }
        out
    }

    /// Serialize back to the JSON schema, with explicit z-bottoms.
    pub fn to_json(&self) -> String {
        let mut materials = BTreeMap::new();
        for m in self.materials() {
            materials.insert(
                m.name.clone(),
                MaterialDoc {
                    k_w_per_m_k: m.conductivity,
                },
            );
        }
        let layers = self
            .layers
            .iter()
            .map(|l| LayerDoc {
                name: l.name.clone(),
                kind: l.kind,
                thickness_um: l.thickness,
                z_bottom_um: Some(l.z_bottom),
                gds_layer: l.gds_layer,
                gds_datatype: l.gds_datatype,
                metal: l.metal.as_ref().map(|m| m.name.clone()),
                background: l.background.name.clone(),
            })
            .collect();
        serde_json::to_string_pretty(&StackDoc { materials, layers }).expect("stack serializes")
    }
}
