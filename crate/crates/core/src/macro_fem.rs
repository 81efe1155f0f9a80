//! Chip-scale steady heat conduction on a three-region prism.
//!
//! Regions bottom-up: BEOL, FEOL, bulk silicon. Heat enters through the
//! bottom face (uniformly or through circular patches), leaves by
//! convection from the top face, and the sides are adiabatic. Lengths are
//! µm, conductivities W/(m·K), fluxes W/mm², film coefficients W/(K·mm²)
//! and temperatures °C. The system is solved for θ = T − T_amb.

use std::fmt::Write as _;

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Rect;
use crate::hex8::{BoxElement, NODE_OFFSETS};
use crate::homogenize::ConductivityTensor;
use crate::numerics::{apply_dirichlet, cg_solve, NumericsError, SolveReport, TripletBuilder};
use crate::vtk;

pub const BEOL_THICKNESS_UM: f64 = 4.3;
pub const FEOL_THICKNESS_UM: f64 = 1.5;
pub const SILICON_THICKNESS_UM: f64 = 773.5;
pub const SILICON_CONDUCTIVITY: f64 = 139.4;
pub const FEOL_CONDUCTIVITY: f64 = 139.4;
pub const DEFAULT_AMBIENT_C: f64 = 40.0;
/// Relative residual target for the chip-scale solve. Rounding in `b − Aθ`
/// floors the attainable residual near 1e-10 for weak convection, where
/// `|A||θ|` exceeds `|b|` by about six orders of magnitude.
pub const MACRO_TOLERANCE: f64 = 1e-9;

/// W/(m·K) times µm → W/K.
const KAPPA_SCALE: f64 = 1e-6;
/// Per-mm² quantities times µm² → per-element totals.
const AREA_SCALE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum MacroError {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("invalid boundary specification: {0}")]
    InvalidBoundary(String),
    #[error("no temperature anchor: convection coefficient is zero and no Dirichlet patch is given")]
    Singular,
    #[error("macro solve did not converge: {0:?}")]
    NotConverged(SolveReport),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("z = {z} µm outside the domain [0, {height}]")]
    OutOfDomain { z: f64, height: f64 },
    #[error("conductivity of element {0} is not positive definite")]
    NotPositiveDefinite(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    Beol,
    Feol,
    Silicon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MacroMeshSpec {
    pub footprint_um: [f64; 2],
    pub elements_xy: [usize; 2],
    pub beol_um: f64,
    pub feol_um: f64,
    pub silicon_um: f64,
    pub beol_layers: usize,
    pub feol_layers: usize,
    /// Ratio between consecutive silicon layer thicknesses, ≥ 1.
    pub grading_ratio: f64,
    /// First silicon layer thickness; defaults to the FEOL layer thickness.
    pub silicon_first_layer_um: Option<f64>,
}

impl Default for MacroMeshSpec {
    fn default() -> Self {
        Self {
            footprint_um: [100.0, 100.0],
            elements_xy: [50, 50],
            beol_um: BEOL_THICKNESS_UM,
            feol_um: FEOL_THICKNESS_UM,
            silicon_um: SILICON_THICKNESS_UM,
            beol_layers: 2,
            feol_layers: 2,
            grading_ratio: 1.5,
            silicon_first_layer_um: None,
        }
    }
}

/// Structured hex mesh. Node `(i, j, k)` is `i + (nx + 1) * (j + (ny + 1) * k)`
/// and element `(i, j, k)` is `i + nx * (j + ny * k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroMesh {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub zs: Vec<f64>,
    /// Region of every element layer.
    pub layer_regions: Vec<Region>,
}

impl MacroMesh {
    pub fn nx(&self) -> usize {
        self.xs.len() - 1
    }
    pub fn ny(&self) -> usize {
        self.ys.len() - 1
    }
    pub fn nz(&self) -> usize {
        self.zs.len() - 1
    }
    pub fn node_count(&self) -> usize {
        self.xs.len() * self.ys.len() * self.zs.len()
    }
    pub fn element_count(&self) -> usize {
        self.nx() * self.ny() * self.nz()
    }
    #[inline]
    pub fn node(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.xs.len() * (j + self.ys.len() * k)
    }
    #[inline]
    pub fn element(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.nx() * (j + self.ny() * k)
    }
    pub fn element_ijk(&self, e: usize) -> (usize, usize, usize) {
        let (nx, ny) = (self.nx(), self.ny());
        (e % nx, (e / nx) % ny, e / (nx * ny))
    }
    pub fn element_nodes(&self, i: usize, j: usize, k: usize) -> [usize; 8] {
        NODE_OFFSETS.map(|o| self.node(i + o[0], j + o[1], k + o[2]))
    }
    pub fn element_centroid(&self, e: usize) -> [f64; 3] {
        let (i, j, k) = self.element_ijk(e);
        [
            0.5 * (self.xs[i] + self.xs[i + 1]),
            0.5 * (self.ys[j] + self.ys[j + 1]),
            0.5 * (self.zs[k] + self.zs[k + 1]),
        ]
    }
    pub fn element_region(&self, e: usize) -> Region {
        self.layer_regions[self.element_ijk(e).2]
    }
    pub fn node_position(&self, n: usize) -> [f64; 3] {
        let nxp = self.xs.len();
        let nyp = self.ys.len();
        [self.xs[n % nxp], self.ys[(n / nxp) % nyp], self.zs[n / (nxp * nyp)]]
    }
    pub fn footprint(&self) -> Rect {
        Rect::new(self.xs[0], self.ys[0], *self.xs.last().unwrap(), *self.ys.last().unwrap())
    }
    pub fn height(&self) -> f64 {
        self.zs.last().unwrap() - self.zs[0]
    }
    pub fn layers_in(&self, region: Region) -> usize {
        self.layer_regions.iter().filter(|&&r| r == region).count()
    }
    /// Top z of a region.
    pub fn region_top(&self, region: Region) -> Option<f64> {
        self.layer_regions.iter().rposition(|&r| r == region).map(|k| self.zs[k + 1])
    }
    pub fn region_bottom(&self, region: Region) -> Option<f64> {
        self.layer_regions.iter().position(|&r| r == region).map(|k| self.zs[k])
    }
}

fn uniform_ticks(length: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| length * i as f64 / n as f64).collect()
}

fn graded_layers(length: f64, first: f64, ratio: f64) -> Vec<f64> {
    const MAX_LAYERS: usize = 10_000;
    let tol = 1e-9 * length;
    let mut layers = Vec::new();
    let mut h = first;
    let mut acc = 0.0;
    while acc + h < length - tol && layers.len() < MAX_LAYERS {
        layers.push(h);
        acc += h;
        h *= ratio;
    }
    let rest = length - acc;
    if (rest - h).abs() > tol {
        match layers.last_mut() {
            Some(prev) if rest < 0.5 * *prev => {
                warn!("silicon grading overshoots; last layer widened from {prev} to {} µm", *prev + rest);
                *prev += rest;
                return layers;
            }
            _ => warn!("silicon grading overshoots; last layer shrunk from {h} to {rest} µm"),
        }
    }
    layers.push(rest);
    layers
}

pub fn build_macro_mesh(spec: &MacroMeshSpec) -> Result<MacroMesh, MacroError> {
    let bad = |m: &str| Err(MacroError::InvalidMesh(m.into()));
    if !(spec.footprint_um[0] > 0.0 && spec.footprint_um[1] > 0.0) {
        return bad("footprint must be positive");
    }
    if spec.elements_xy.contains(&0) || spec.beol_layers == 0 || spec.feol_layers == 0 {
        return bad("element counts must be at least 1");
    }
    if !(spec.beol_um > 0.0 && spec.feol_um > 0.0 && spec.silicon_um > 0.0) {
        return bad("region thicknesses must be positive");
    }
    if !(spec.grading_ratio >= 1.0) {
        return bad("grading ratio must be at least 1");
    }
    let first = spec
        .silicon_first_layer_um
        .unwrap_or(spec.feol_um / spec.feol_layers as f64);
    if !(first > 0.0) {
        return bad("first silicon layer must be positive");
    }

    let mut zs = uniform_ticks(spec.beol_um, spec.beol_layers);
    let mut regions = vec![Region::Beol; spec.beol_layers];
    for k in 1..=spec.feol_layers {
        zs.push(spec.beol_um + spec.feol_um * k as f64 / spec.feol_layers as f64);
        regions.push(Region::Feol);
    }
    let base = spec.beol_um + spec.feol_um;
    let mut acc = 0.0;
    let si = graded_layers(spec.silicon_um, first, spec.grading_ratio);
    let n_si = si.len();
    for (idx, h) in si.into_iter().enumerate() {
        acc += h;
        zs.push(if idx + 1 == n_si { base + spec.silicon_um } else { base + acc });
        regions.push(Region::Silicon);
    }
    Ok(MacroMesh {
        xs: uniform_ticks(spec.footprint_um[0], spec.elements_xy[0]),
        ys: uniform_ticks(spec.footprint_um[1], spec.elements_xy[1]),
        zs,
        layer_regions: regions,
    })
}

/// Mesh plus one conductivity tensor per element (at its centroid).
#[derive(Debug, Clone, PartialEq)]
pub struct MacroModel {
    pub mesh: MacroMesh,
    pub conductivity: Vec<ConductivityTensor>,
    /// Volumetric heat source, W/µm³.
    pub body_load: f64,
}

impl MacroModel {
    /// Isotropic FEOL and silicon with the given BEOL tensor everywhere.
    pub fn uniform(mesh: MacroMesh, beol: ConductivityTensor) -> Self {
        Self::with_beol_map(mesh, |_, _| beol)
    }

    /// BEOL tensor chosen per in-plane element column `(i, j)`.
    pub fn with_beol_map(mesh: MacroMesh, beol: impl Fn(usize, usize) -> ConductivityTensor) -> Self {
        let conductivity = (0..mesh.element_count())
            .map(|e| {
                let (i, j, _) = mesh.element_ijk(e);
                match mesh.element_region(e) {
                    Region::Beol => beol(i, j),
                    Region::Feol => ConductivityTensor::isotropic(FEOL_CONDUCTIVITY),
                    Region::Silicon => ConductivityTensor::isotropic(SILICON_CONDUCTIVITY),
                }
            })
            .collect();
        Self {
            mesh,
            conductivity,
            body_load: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), MacroError> {
        if self.conductivity.len() != self.mesh.element_count() {
            return Err(MacroError::InvalidMesh("one tensor per element required".into()));
        }
        if let Some(e) = self.conductivity.iter().position(|t| !t.is_positive_definite()) {
            return Err(MacroError::NotPositiveDefinite(e));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Circle {
    pub center: [f64; 2],
    pub diameter: f64,
}

impl Circle {
    fn contains(&self, x: f64, y: f64) -> bool {
        let r = 0.5 * self.diameter;
        let (dx, dy) = (x - self.center[0], y - self.center[1]);
        dx * dx + dy * dy <= r * r
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BottomFlux {
    Uniform { phi_w_per_mm2: f64 },
    Patches { circles: Vec<Circle>, phi_w_per_mm2: f64 },
}

impl BottomFlux {
    /// Square array of `n × n` circles centred on the footprint.
    pub fn patch_array(footprint: &Rect, n: usize, pitch: f64, diameter: f64, phi_w_per_mm2: f64) -> Self {
        let cx = 0.5 * (footprint.x_min + footprint.x_max);
        let cy = 0.5 * (footprint.y_min + footprint.y_max);
        let off = 0.5 * (n as f64 - 1.0) * pitch;
        let mut circles = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                circles.push(Circle {
                    center: [cx - off + i as f64 * pitch, cy - off + j as f64 * pitch],
                    diameter,
                });
            }
        }
        BottomFlux::Patches { circles, phi_w_per_mm2 }
    }

    fn phi(&self) -> f64 {
        match self {
            BottomFlux::Uniform { phi_w_per_mm2 } | BottomFlux::Patches { phi_w_per_mm2, .. } => *phi_w_per_mm2,
        }
    }

    fn scaled(&self, s: f64) -> Self {
        match self {
            BottomFlux::Uniform { phi_w_per_mm2 } => BottomFlux::Uniform {
                phi_w_per_mm2: phi_w_per_mm2 * s,
            },
            BottomFlux::Patches { circles, phi_w_per_mm2 } => BottomFlux::Patches {
                circles: circles.clone(),
                phi_w_per_mm2: phi_w_per_mm2 * s,
            },
        }
    }
}

/// Named film coefficients. The two readings of the reference value differ
/// by a factor of 1000.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvectionPreset {
    /// 4.0 W/(K·mm²)
    HeatSink,
    /// 4.0 mW/(K·mm²)
    Weak,
}

impl ConvectionPreset {
    pub fn h_w_per_k_mm2(self) -> f64 {
        match self {
            ConvectionPreset::HeatSink => 4.0,
            ConvectionPreset::Weak => 4.0e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Convection {
    pub h_w_per_k_mm2: f64,
    pub t_amb_c: f64,
}

impl Convection {
    pub fn preset(p: ConvectionPreset) -> Self {
        Self {
            h_w_per_k_mm2: p.h_w_per_k_mm2(),
            t_amb_c: DEFAULT_AMBIENT_C,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Face {
    Bottom,
    Top,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirichletPatch {
    pub face: Face,
    /// Closed in-plane region; nodes of `face` inside it are fixed.
    pub region: Rect,
    pub temperature_c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundarySpec {
    pub bottom_flux: BottomFlux,
    pub top_convection: Convection,
    #[serde(default)]
    pub dirichlet: Vec<DirichletPatch>,
}

impl BoundarySpec {
    pub fn validate(&self, footprint: &Rect) -> Result<(), MacroError> {
        let bad = |m: String| Err(MacroError::InvalidBoundary(m));
        if !(self.top_convection.h_w_per_k_mm2 >= 0.0) {
            return bad("convection coefficient must be non-negative".into());
        }
        if !self.bottom_flux.phi().is_finite() || !self.top_convection.t_amb_c.is_finite() {
            return bad("flux and ambient temperature must be finite".into());
        }
        if let BottomFlux::Patches { circles, .. } = &self.bottom_flux {
            for c in circles {
                let r = 0.5 * c.diameter;
                let inside = c.center[0] - r >= footprint.x_min
                    && c.center[0] + r <= footprint.x_max
                    && c.center[1] - r >= footprint.y_min
                    && c.center[1] + r <= footprint.y_max;
                if !(c.diameter > 0.0) || !inside {
                    return bad(format!("patch {c:?} must have positive diameter and lie within the footprint"));
                }
            }
        }
        Ok(())
    }

    /// Same boundary data with the flux multiplied by `s`.
    pub fn with_scaled_flux(&self, s: f64) -> Self {
        Self {
            bottom_flux: self.bottom_flux.scaled(s),
            ..self.clone()
        }
    }
}

const G4: [(f64, f64); 4] = [
    (-0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
    (-0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
];

/// Assembled system in θ = T − T_amb, before Dirichlet elimination.
pub struct MacroSystem {
    pub matrix: crate::numerics::CsrMatrix,
    pub rhs: Vec<f64>,
    /// `∫ h N_a dΓ` on the top face, W/K.
    pub robin_weights: Vec<f64>,
    /// Applied flux power, W.
    pub flux_power_w: f64,
    /// Body-load power, W.
    pub body_power_w: f64,
    /// Fixed nodes and their θ values.
    pub fixed: Vec<(usize, f64)>,
}

pub fn assemble_macro(model: &MacroModel, bc: &BoundarySpec) -> Result<MacroSystem, MacroError> {
    model.validate()?;
    let mesh = &model.mesh;
    let fp = mesh.footprint();
    bc.validate(&fp)?;
    let h = bc.top_convection.h_w_per_k_mm2 * AREA_SCALE;
    if h == 0.0 && bc.dirichlet.is_empty() {
        return Err(MacroError::Singular);
    }
    let (nx, ny, nz) = (mesh.nx(), mesh.ny(), mesh.nz());
    let n = mesh.node_count();
    let mut b = TripletBuilder::with_capacity(n, mesh.element_count() * 64 + nx * ny * 16);
    let mut rhs = vec![0.0; n];
    let mut body_power = 0.0;

    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let hs = [
                    mesh.xs[i + 1] - mesh.xs[i],
                    mesh.ys[j + 1] - mesh.ys[j],
                    mesh.zs[k + 1] - mesh.zs[k],
                ];
                let elem = BoxElement::new(hs);
                let kappa = model.conductivity[mesh.element(i, j, k)].matrix();
                let ke = elem.conductance(&kappa);
                let nodes = mesh.element_nodes(i, j, k);
                for a in 0..8 {
                    for c in 0..8 {
                        b.add(nodes[a], nodes[c], KAPPA_SCALE * ke[a][c]);
                    }
                }
                if model.body_load != 0.0 {
                    for a in 0..8 {
                        let f: f64 = (0..8).map(|q| elem.weight * elem.values[q][a]).sum();
                        rhs[nodes[a]] += model.body_load * f;
                    }
                    body_power += model.body_load * elem.volume();
                }
            }
        }
    }

    // Face terms: bilinear shape functions on each in-plane cell.
    let phi = bc.bottom_flux.phi() * AREA_SCALE;
    let mut robin_weights = vec![0.0; n];
    let mut flux_power = 0.0;
    for j in 0..ny {
        for i in 0..nx {
            let (x0, x1, y0, y1) = (mesh.xs[i], mesh.xs[i + 1], mesh.ys[j], mesh.ys[j + 1]);
            let (hx, hy) = (x1 - x0, y1 - y0);
            let quad = [(0usize, 0usize), (1, 0), (1, 1), (0, 1)];
            let bottom = quad.map(|(a, c)| mesh.node(i + a, j + c, 0));
            let top = quad.map(|(a, c)| mesh.node(i + a, j + c, nz));

            if h > 0.0 {
                // Exact bilinear face mass: (hx hy / 36) [4 2 1 2; ...].
                for a in 0..4 {
                    for c in 0..4 {
                        let same_x = quad[a].0 == quad[c].0;
                        let same_y = quad[a].1 == quad[c].1;
                        let m = hx * hy / 36.0 * if same_x { 2.0 } else { 1.0 } * if same_y { 2.0 } else { 1.0 };
                        b.add(top[a], top[c], h * m);
                        robin_weights[top[a]] += h * m;
                    }
                }
            }

            if phi != 0.0 {
                let mut loads = [0.0; 4];
                for &(u, wu) in &G4 {
                    for &(v, wv) in &G4 {
                        let x = x0 + 0.5 * (u + 1.0) * hx;
                        let y = y0 + 0.5 * (v + 1.0) * hy;
                        let inside = match &bc.bottom_flux {
                            BottomFlux::Uniform { .. } => true,
                            BottomFlux::Patches { circles, .. } => circles.iter().any(|c| c.contains(x, y)),
                        };
                        if !inside {
                            continue;
                        }
                        let w = wu * wv * 0.25 * hx * hy;
                        let s = [0.5 * (1.0 - u), 0.5 * (1.0 + u)];
                        let t = [0.5 * (1.0 - v), 0.5 * (1.0 + v)];
                        for (a, &(qa, qc)) in quad.iter().enumerate() {
                            loads[a] += w * s[qa] * t[qc];
                        }
                    }
                }
                for a in 0..4 {
                    rhs[bottom[a]] += phi * loads[a];
                    flux_power += phi * loads[a];
                }
            }
        }
    }

    let t_amb = bc.top_convection.t_amb_c;
    let mut fixed = Vec::new();
    for patch in &bc.dirichlet {
        let k = match patch.face {
            Face::Bottom => 0,
            Face::Top => nz,
        };
        for j in 0..=ny {
            for i in 0..=nx {
                let (x, y) = (mesh.xs[i], mesh.ys[j]);
                if x >= patch.region.x_min && x <= patch.region.x_max && y >= patch.region.y_min && y <= patch.region.y_max {
                    fixed.push((mesh.node(i, j, k), patch.temperature_c - t_amb));
                }
            }
        }
    }
    if h == 0.0 && fixed.is_empty() {
        return Err(MacroError::Singular);
    }

    Ok(MacroSystem {
        matrix: b.build(),
        rhs,
        robin_weights,
        flux_power_w: flux_power,
        body_power_w: body_power,
        fixed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemperatureField {
    /// Nodal temperatures, °C.
    pub values: Vec<f64>,
    pub t_amb_c: f64,
    pub report: SolveReport,
    pub power_in_w: f64,
    pub power_convected_w: f64,
    pub power_dirichlet_w: f64,
}

impl TemperatureField {
    /// |in − out| / in; zero when nothing is applied.
    pub fn energy_imbalance(&self) -> f64 {
        let out = self.power_convected_w + self.power_dirichlet_w;
        if self.power_in_w == 0.0 {
            out.abs()
        } else {
            ((self.power_in_w - out) / self.power_in_w).abs()
        }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacroSolveOptions {
    pub tolerance: f64,
    pub max_iter: Option<usize>,
}

impl Default for MacroSolveOptions {
    fn default() -> Self {
        Self {
            tolerance: MACRO_TOLERANCE,
            max_iter: None,
        }
    }
}

pub fn solve_macro(model: &MacroModel, bc: &BoundarySpec) -> Result<TemperatureField, MacroError> {
    solve_macro_with(model, bc, &MacroSolveOptions::default())
}

pub fn solve_macro_with(
    model: &MacroModel,
    bc: &BoundarySpec,
    opts: &MacroSolveOptions,
) -> Result<TemperatureField, MacroError> {
    let sys = assemble_macro(model, bc)?;
    let (a, b) = apply_dirichlet(&sys.matrix, &sys.rhs, &sys.fixed)?;
    let max_iter = opts.max_iter.unwrap_or(10 * a.dim());
    let (mut theta, report) = cg_solve(&a, &b, opts.tolerance, max_iter)?;
    if !report.converged {
        return Err(MacroError::NotConverged(report));
    }
    for &(n, v) in &sys.fixed {
        theta[n] = v;
    }
    let convected: f64 = sys.robin_weights.iter().zip(&theta).map(|(w, t)| w * t).sum();
    let dirichlet = if sys.fixed.is_empty() {
        0.0
    } else {
        // Heat removed at fixed nodes: minus the reactions of the unreduced
        // system, each node counted once.
        let kt = sys.matrix.mul_vec(&theta);
        let mut seen = vec![false; theta.len()];
        let mut total = 0.0;
        for &(n, _) in &sys.fixed {
            if !seen[n] {
                seen[n] = true;
                total += sys.rhs[n] - kt[n];
            }
        }
        total
    };
    let t_amb = bc.top_convection.t_amb_c;
    Ok(TemperatureField {
        values: theta.iter().map(|t| t + t_amb).collect(),
        t_amb_c: t_amb,
        report,
        power_in_w: sys.flux_power_w + sys.body_power_w,
        power_convected_w: convected,
        power_dirichlet_w: dirichlet,
    })
}

/// Regular in-plane sample of the temperature at height `z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneSample {
    pub z: f64,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Row-major in y: `values[i + xs.len() * j]`.
    pub values: Vec<f64>,
}

impl PlaneSample {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i + self.xs.len() * j]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x_um,y_um,temperature_c\n");
        for (j, y) in self.ys.iter().enumerate() {
            for (i, x) in self.xs.iter().enumerate() {
                writeln!(out, "{x},{y},{}", self.at(i, j)).unwrap();
            }
        }
        out
    }
}

fn locate(ticks: &[f64], v: f64) -> (usize, f64) {
    let last = ticks.len() - 2;
    let idx = match ticks.binary_search_by(|t| t.total_cmp(&v)) {
        Ok(i) => i.min(last),
        Err(i) => i.saturating_sub(1).min(last),
    };
    let t = ((v - ticks[idx]) / (ticks[idx + 1] - ticks[idx])).clamp(0.0, 1.0);
    (idx, t)
}

/// Interpolate the trilinear field on a grid of `resolution` points per
/// axis spanning the footprint edge to edge.
pub fn sample_plane(
    mesh: &MacroMesh,
    field: &TemperatureField,
    z: f64,
    resolution: [usize; 2],
) -> Result<PlaneSample, MacroError> {
    let (z0, z1) = (mesh.zs[0], *mesh.zs.last().unwrap());
    if !(z >= z0 && z <= z1) {
        return Err(MacroError::OutOfDomain { z, height: z1 - z0 });
    }
    if resolution.iter().any(|&r| r < 2) {
        return Err(MacroError::InvalidMesh("plane resolution needs at least 2 points per axis".into()));
    }
    let fp = mesh.footprint();
    let axis = |lo: f64, hi: f64, n: usize| -> Vec<f64> {
        (0..n)
            .map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
            .collect()
    };
    let xs = axis(fp.x_min, fp.x_max, resolution[0]);
    let ys = axis(fp.y_min, fp.y_max, resolution[1]);
    let (k, tz) = locate(&mesh.zs, z);
    let mut values = Vec::with_capacity(xs.len() * ys.len());
    for &y in &ys {
        let (j, ty) = locate(&mesh.ys, y);
        for &x in &xs {
            let (i, tx) = locate(&mesh.xs, x);
            let mut v = 0.0;
            for o in NODE_OFFSETS {
                let w = (if o[0] == 1 { tx } else { 1.0 - tx })
                    * (if o[1] == 1 { ty } else { 1.0 - ty })
                    * (if o[2] == 1 { tz } else { 1.0 - tz });
                if w != 0.0 {
                    v += w * field.values[mesh.node(i + o[0], j + o[1], k + o[2])];
                }
            }
            values.push(v);
        }
    }
    Ok(PlaneSample { z, xs, ys, values })
}

/// Legacy VTK unstructured grid with nodal temperature, element tensors and
/// region ids.
pub fn field_to_vtk(model: &MacroModel, field: &TemperatureField) -> String {
    let mesh = &model.mesh;
    let points: Vec<[f64; 3]> = (0..mesh.node_count()).map(|n| mesh.node_position(n)).collect();
    let cells: Vec<[usize; 8]> = (0..mesh.element_count())
        .map(|e| {
            let (i, j, k) = mesh.element_ijk(e);
            mesh.element_nodes(i, j, k)
        })
        .collect();
    let region: Vec<u8> = (0..mesh.element_count())
        .map(|e| match mesh.element_region(e) {
            Region::Beol => 0,
            Region::Feol => 1,
            Region::Silicon => 2,
        })
        .collect();
    let comps: Vec<Vec<f64>> = (0..6)
        .map(|c| model.conductivity.iter().map(|t| t.components()[c]).collect())
        .collect();
    let mut cell_data = vec![vtk::Scalars {
        name: "region",
        values: vtk::ScalarValues::Int(&region),
    }];
    for (c, name) in ConductivityTensor::COMPONENT_NAMES.iter().enumerate() {
        cell_data.push(vtk::Scalars {
            name,
            values: vtk::ScalarValues::Float(&comps[c]),
        });
    }
    vtk::hexahedral_grid(
        "temperature",
        &points,
        &cells,
        &[vtk::Scalars {
            name: "temperature_c",
            values: vtk::ScalarValues::Float(&field.values),
        }],
        &cell_data,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coarse_spec() -> MacroMeshSpec {
        MacroMeshSpec {
            elements_xy: [4, 4],
            ..Default::default()
        }
    }

    fn uniform_bc(phi: f64, preset: ConvectionPreset) -> BoundarySpec {
        BoundarySpec {
            bottom_flux: BottomFlux::Uniform { phi_w_per_mm2: phi },
            top_convection: Convection::preset(preset),
            dirichlet: vec![],
        }
    }

    #[test]
    fn default_mesh_layer_counts() {
        let m = build_macro_mesh(&MacroMeshSpec::default()).unwrap();
        assert!(m.layers_in(Region::Beol) >= 2);
        assert!(m.layers_in(Region::Feol) >= 2);
        assert!(m.layers_in(Region::Silicon) <= 25);
        assert!((m.region_top(Region::Beol).unwrap() - 4.3).abs() < 1e-12);
        assert!((m.region_top(Region::Feol).unwrap() - 5.8).abs() < 1e-12);
        assert_eq!(*m.zs.last().unwrap(), 779.3);
        assert!(m.zs.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn ratio_one_gives_uniform_silicon() {
        let m = build_macro_mesh(&MacroMeshSpec {
            grading_ratio: 1.0,
            silicon_first_layer_um: Some(773.5 / 7.0),
            ..coarse_spec()
        })
        .unwrap();
        let si: Vec<f64> = m
            .zs
            .windows(2)
            .zip(&m.layer_regions)
            .filter(|(_, r)| **r == Region::Silicon)
            .map(|(w, _)| w[1] - w[0])
            .collect();
        assert_eq!(si.len(), 7);
        assert!(si.iter().all(|h| (h - 773.5 / 7.0).abs() < 1e-9));
    }

    #[test]
    fn smoke_three_element_mesh() {
        let m = build_macro_mesh(&MacroMeshSpec {
            elements_xy: [1, 1],
            beol_layers: 1,
            feol_layers: 1,
            silicon_first_layer_um: Some(773.5),
            ..Default::default()
        })
        .unwrap();
        assert_eq!(m.element_count(), 3);
        assert_eq!(m.layer_regions, vec![Region::Beol, Region::Feol, Region::Silicon]);
    }

    #[test]
    fn zero_flux_gives_ambient() {
        let m = build_macro_mesh(&coarse_spec()).unwrap();
        let model = MacroModel::uniform(m, ConductivityTensor::isotropic(139.4));
        let f = solve_macro(&model, &uniform_bc(0.0, ConvectionPreset::HeatSink)).unwrap();
        assert!(f.values.iter().all(|&t| t == 40.0));
    }

    #[test]
    fn uniform_isotropic_matches_1d_solution() {
        let m = build_macro_mesh(&coarse_spec()).unwrap();
        let model = MacroModel::uniform(m.clone(), ConductivityTensor::isotropic(139.4));
        for preset in [ConvectionPreset::HeatSink, ConvectionPreset::Weak] {
            let bc = uniform_bc(0.1256, preset);
            let f = solve_macro(&model, &bc).unwrap();
            let top = sample_plane(&m, &f, m.height(), [3, 3]).unwrap();
            let expect_top = 0.1256 / preset.h_w_per_k_mm2();
            for v in &top.values {
                assert!(((v - 40.0) - expect_top).abs() < 1e-6 * expect_top);
            }
            let si_bottom = sample_plane(&m, &f, m.region_bottom(Region::Silicon).unwrap(), [3, 3]).unwrap();
            let dt = si_bottom.values[4] - top.values[4];
            assert!((dt - 0.1256e6 * 773.5e-6 / 139.4).abs() < 1e-6);
            assert!(f.energy_imbalance() < 1e-6);
        }
    }

    #[test]
    fn uniform_flux_power() {
        let m = build_macro_mesh(&coarse_spec()).unwrap();
        let model = MacroModel::uniform(m, ConductivityTensor::isotropic(139.4));
        let sys = assemble_macro(&model, &uniform_bc(0.1256, ConvectionPreset::HeatSink)).unwrap();
        assert!((sys.flux_power_w - 1.256e-3).abs() < 1e-15);
        let total: f64 = sys.rhs.iter().sum();
        assert!((total - 1.256e-3).abs() < 1e-15);
    }

    #[test]
    fn singular_without_anchor() {
        let m = build_macro_mesh(&coarse_spec()).unwrap();
        let model = MacroModel::uniform(m, ConductivityTensor::isotropic(1.0));
        let mut bc = uniform_bc(0.1, ConvectionPreset::HeatSink);
        bc.top_convection.h_w_per_k_mm2 = 0.0;
        assert!(matches!(assemble_macro(&model, &bc), Err(MacroError::Singular)));
        bc.dirichlet.push(DirichletPatch {
            face: Face::Top,
            region: Rect::new(0.0, 0.0, 100.0, 100.0),
            temperature_c: 40.0,
        });
        let f = solve_macro(&model, &bc).unwrap();
        assert!(f.energy_imbalance() < 1e-6);
        assert!(f.power_dirichlet_w > 0.0);
    }

    #[test]
    fn sample_reproduces_nodes() {
        let m = build_macro_mesh(&coarse_spec()).unwrap();
        let values: Vec<f64> = (0..m.node_count()).map(|n| {
            let p = m.node_position(n);
            p[0] * 0.1 + p[1] * p[1] * 0.01 + p[2]
        }).collect();
        let f = TemperatureField {
            values,
            t_amb_c: 0.0,
            report: SolveReport { iterations: 0, relative_residual: 0.0, converged: true },
            power_in_w: 0.0,
            power_convected_w: 0.0,
            power_dirichlet_w: 0.0,
        };
        let z = m.zs[3];
        let s = sample_plane(&m, &f, z, [5, 5]).unwrap();
        for j in 0..5 {
            for i in 0..5 {
                assert!((s.at(i, j) - f.values[m.node(i, j, 3)]).abs() < 1e-12);
            }
        }
        assert!(sample_plane(&m, &f, -1.0, [5, 5]).is_err());
        assert!(s.to_csv().starts_with("x_um,y_um,temperature_c\n0,0,"));
    }
}
