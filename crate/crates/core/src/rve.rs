//! Voxelized representative volume elements.
//!
//! An RVE is a square window of the layout, extruded through the whole
//! process stack. Each line or via layer is rasterized by sampling voxel
//! centres against the clipped layout polygons; z-slabs coincide with the
//! process-layer interfaces.

use std::ops::Range;

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gds::{GdsError, LayoutDatabase, LayoutIndex};
use crate::geometry::{Point2, Polygon, Rect};
use crate::stack::{LayerKind, LayerStack, Material};
use crate::vtk;

pub const DEFAULT_HALF_SIZE_UM: f64 = 1.0;
pub const DEFAULT_VOXELS_PER_EDGE_XY: usize = 40;
pub const DEFAULT_VOXELS_PER_LAYER_Z: usize = 2;

#[derive(Debug, Error)]
pub enum RveError {
    #[error("invalid RVE specification: {0}")]
    InvalidSpec(String),
    #[error("invalid voxel grid: {0}")]
    InvalidGrid(String),
    #[error(transparent)]
    Layout(#[from] GdsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RveSpec {
    /// Window centre in chip coordinates, µm.
    pub center: (f64, f64),
    pub half_size: f64,
    pub voxels_per_edge_xy: usize,
    pub voxels_per_layer_z: usize,
}

impl RveSpec {
    pub fn at(cx: f64, cy: f64) -> Self {
        Self {
            center: (cx, cy),
            ..Default::default()
        }
    }

    pub fn window(&self) -> Rect {
        Rect::centered(self.center.0, self.center.1, self.half_size)
    }

    fn validate(&self) -> Result<(), RveError> {
        if !(self.half_size > 0.0) {
            return Err(RveError::InvalidSpec(format!("half_size {} must be positive", self.half_size)));
        }
        if self.voxels_per_edge_xy == 0 || self.voxels_per_layer_z == 0 {
            return Err(RveError::InvalidSpec("voxel counts must be at least 1".into()));
        }
        Ok(())
    }
}

impl Default for RveSpec {
    fn default() -> Self {
        Self {
            center: (0.0, 0.0),
            half_size: DEFAULT_HALF_SIZE_UM,
            voxels_per_edge_xy: DEFAULT_VOXELS_PER_EDGE_XY,
            voxels_per_layer_z: DEFAULT_VOXELS_PER_LAYER_Z,
        }
    }
}

/// Per-process-layer bookkeeping inside a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSlabs {
    pub name: String,
    pub slabs: Range<usize>,
    pub background_id: u8,
    pub metal_id: Option<u8>,
}

/// Structured material grid. Voxel `(i, j, k)` is stored at
/// `i + nx * (j + ny * k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoxelGrid {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub dx: f64,
    pub dy: f64,
    /// Thickness of every z-slab, µm.
    pub dz: Vec<f64>,
    pub material_id: Vec<u8>,
    pub materials: Vec<Material>,
    /// Minimum corner, µm.
    pub origin: [f64; 3],
    pub layers: Vec<LayerSlabs>,
}

impl VoxelGrid {
    /// Grid from raw parts; `layers` may be empty for synthetic grids.
    pub fn new(
        (nx, ny): (usize, usize),
        (dx, dy): (f64, f64),
        dz: Vec<f64>,
        material_id: Vec<u8>,
        materials: Vec<Material>,
        origin: [f64; 3],
    ) -> Result<Self, RveError> {
        let grid = Self {
            nx,
            ny,
            nz: dz.len(),
            dx,
            dy,
            dz,
            material_id,
            materials,
            origin,
            layers: Vec::new(),
        };
        grid.validate()?;
        Ok(grid)
    }

    /// Single-material box of `n` voxels per edge over `[0, size]^3`.
    pub fn uniform(n: [usize; 3], size: [f64; 3], material: Material) -> Self {
        let dz = vec![size[2] / n[2] as f64; n[2]];
        Self::new(
            (n[0], n[1]),
            (size[0] / n[0] as f64, size[1] / n[1] as f64),
            dz,
            vec![0; n[0] * n[1] * n[2]],
            vec![material],
            [0.0; 3],
        )
        .expect("uniform grid is valid")
    }

    pub fn validate(&self) -> Result<(), RveError> {
        let bad = |m: String| Err(RveError::InvalidGrid(m));
        if self.nx == 0 || self.ny == 0 || self.nz == 0 {
            return bad("empty grid".into());
        }
        if self.nz != self.dz.len() {
            return bad("dz length does not match nz".into());
        }
        if !(self.dx > 0.0 && self.dy > 0.0) || self.dz.iter().any(|&d| !(d > 0.0)) {
            return bad("voxel sizes must be positive".into());
        }
        if self.material_id.len() != self.voxel_count() {
            return bad("material array length mismatch".into());
        }
        if let Some(&id) = self.material_id.iter().find(|&&id| usize::from(id) >= self.materials.len()) {
            return bad(format!("material id {id} has no table entry"));
        }
        if self.materials.iter().any(|m| !(m.conductivity > 0.0)) {
            return bad("non-positive conductivity".into());
        }
        Ok(())
    }

    pub fn voxel_count(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    #[inline]
    pub fn voxel_index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.nx * (j + self.ny * k)
    }

    pub fn size(&self) -> [f64; 3] {
        [
            self.dx * self.nx as f64,
            self.dy * self.ny as f64,
            self.dz.iter().sum(),
        ]
    }

    pub fn volume(&self) -> f64 {
        let s = self.size();
        s[0] * s[1] * s[2]
    }

    pub fn center(&self) -> [f64; 3] {
        let s = self.size();
        [
            self.origin[0] + 0.5 * s[0],
            self.origin[1] + 0.5 * s[1],
            self.origin[2] + 0.5 * s[2],
        ]
    }

    /// Node z-coordinates (nz + 1 values).
    pub fn z_nodes(&self) -> Vec<f64> {
        let mut z = Vec::with_capacity(self.nz + 1);
        let mut acc = self.origin[2];
        z.push(acc);
        for d in &self.dz {
            acc += d;
            z.push(acc);
        }
        z
    }

    pub fn conductivity(&self, voxel: usize) -> f64 {
        self.materials[usize::from(self.material_id[voxel])].conductivity
    }

    pub fn conductivity_range(&self) -> (f64, f64) {
        let mut used = vec![false; self.materials.len()];
        for &id in &self.material_id {
            used[usize::from(id)] = true;
        }
        self.materials
            .iter()
            .zip(used)
            .filter(|(_, u)| *u)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (m, _)| {
                (lo.min(m.conductivity), hi.max(m.conductivity))
            })
    }

    /// The grid rotated by +90° about the z axis through its centre
    /// (x' = -y, y' = x). Layer bookkeeping is preserved.
    pub fn rotated_90_z(&self) -> VoxelGrid {
        let (nx, ny) = (self.ny, self.nx);
        let mut ids = vec![0u8; self.voxel_count()];
        for k in 0..self.nz {
            for j in 0..self.ny {
                for i in 0..self.nx {
                    // (i, j) -> (ny - 1 - j, i)
                    let (i2, j2) = (self.ny - 1 - j, i);
                    ids[i2 + nx * (j2 + ny * k)] = self.material_id[self.voxel_index(i, j, k)];
                }
            }
        }
        let c = self.center();
        let size = self.size();
        VoxelGrid {
            nx,
            ny,
            nz: self.nz,
            dx: self.dy,
            dy: self.dx,
            dz: self.dz.clone(),
            material_id: ids,
            materials: self.materials.clone(),
            origin: [c[0] - 0.5 * size[1], c[1] - 0.5 * size[0], self.origin[2]],
            layers: self.layers.clone(),
        }
    }

    /// Legacy VTK rectilinear grid with material ids as cell data.
    pub fn to_vtk(&self, title: &str) -> String {
        let xs: Vec<f64> = (0..=self.nx).map(|i| self.origin[0] + i as f64 * self.dx).collect();
        let ys: Vec<f64> = (0..=self.ny).map(|j| self.origin[1] + j as f64 * self.dy).collect();
        let zs = self.z_nodes();
        let k: Vec<f64> = self.material_id.iter().map(|&id| self.materials[usize::from(id)].conductivity).collect();
        vtk::rectilinear_grid(
            title,
            &xs,
            &ys,
            &zs,
            &[
                vtk::Scalars {
                    name: "material_id",
                    values: vtk::ScalarValues::Int(&self.material_id),
                },
                vtk::Scalars {
                    name: "conductivity",
                    values: vtk::ScalarValues::Float(&k),
                },
            ],
        )
    }
}

/// Metal voxel count over total voxel count in a process layer's slabs.
pub fn metal_fraction(grid: &VoxelGrid, layer_index: usize) -> f64 {
    let layer = &grid.layers[layer_index];
    let plane = grid.nx * grid.ny;
    let slice = &grid.material_id[layer.slabs.start * plane..layer.slabs.end * plane];
    if slice.is_empty() {
        return 0.0;
    }
    let metal = slice.iter().filter(|&&id| id != layer.background_id).count();
    metal as f64 / slice.len() as f64
}

/// Convenience wrapper building a fresh index for a single RVE.
pub fn build_rve(db: &LayoutDatabase, stack: &LayerStack, spec: &RveSpec) -> Result<VoxelGrid, RveError> {
    let index = LayoutIndex::new(db)?;
    build_rve_indexed(&index, stack, spec)
}

/// Rasterize the window around `spec.center` through every process layer.
pub fn build_rve_indexed(index: &LayoutIndex<'_>, stack: &LayerStack, spec: &RveSpec) -> Result<VoxelGrid, RveError> {
    spec.validate()?;
    let window = spec.window();
    let n = spec.voxels_per_edge_xy;
    let (dx, dy) = (window.width() / n as f64, window.height() / n as f64);

    let materials = stack.materials();
    let id_of = |m: &Material| -> u8 {
        materials
            .iter()
            .position(|x| x.name == m.name)
            .expect("material listed by the stack") as u8
    };

    let inside = index.extent().is_some_and(|e| e.overlaps(&window));
    if !inside {
        warn!(
            "RVE window centred at ({}, {}) lies outside the layout extent; using background only",
            spec.center.0, spec.center.1
        );
    }

    let nz = stack.layers.len() * spec.voxels_per_layer_z;
    let plane = n * n;
    let mut ids = vec![0u8; plane * nz];
    let mut dz = Vec::with_capacity(nz);
    let mut layers = Vec::with_capacity(stack.layers.len());
    let min_area = dx * dy * 1e-6;

    for (li, layer) in stack.layers.iter().enumerate() {
        let slabs = li * spec.voxels_per_layer_z..(li + 1) * spec.voxels_per_layer_z;
        dz.extend(std::iter::repeat_n(layer.thickness / spec.voxels_per_layer_z as f64, spec.voxels_per_layer_z));
        let bg = id_of(&layer.background);
        let metal = layer.metal.as_ref().map(id_of);

        let mut mask = vec![bg; plane];
        if let (true, Some(metal_id), Some(gds_layer), LayerKind::Line | LayerKind::Via) =
            (inside, metal, layer.gds_layer, layer.kind)
        {
            let polys: Vec<Polygon> = index
                .query(gds_layer, layer.gds_datatype, &window)
                .into_iter()
                .filter(|p| p.area() >= min_area)
                .collect();
            rasterize(&polys, &window, n, dx, dy, metal_id, &mut mask);
        }
        for k in slabs.clone() {
            ids[k * plane..(k + 1) * plane].copy_from_slice(&mask);
        }
        layers.push(LayerSlabs {
            name: layer.name.clone(),
            slabs,
            background_id: bg,
            metal_id: metal,
        });
    }

    let grid = VoxelGrid {
        nx: n,
        ny: n,
        nz,
        dx,
        dy,
        dz,
        material_id: ids,
        materials,
        origin: [window.x_min, window.y_min, 0.0],
        layers,
    };
    grid.validate()?;
    Ok(grid)
}

/// Centre-point sampling in window-local coordinates.
fn rasterize(polys: &[Polygon], window: &Rect, n: usize, dx: f64, dy: f64, id: u8, mask: &mut [u8]) {
    for poly in polys {
        let local = poly.translated(-window.x_min, -window.y_min);
        let bb = local.bbox();
        // Candidate index range: centres (i + 0.5) dx within the bbox.
        let i0 = ((bb.x_min / dx - 0.5).floor().max(0.0)) as usize;
        let i1 = ((bb.x_max / dx - 0.5).ceil().max(0.0) as usize).min(n - 1);
        let j0 = ((bb.y_min / dy - 0.5).floor().max(0.0)) as usize;
        let j1 = ((bb.y_max / dy - 0.5).ceil().max(0.0) as usize).min(n - 1);
        for j in j0..=j1 {
            let yc = (j as f64 + 0.5) * dy;
            for i in i0..=i1 {
                let xc = (i as f64 + 0.5) * dx;
                if local.contains(Point2::new(xc, yc)) {
                    mask[i + n * j] = id;
                }
            }
        }
    }
}
