use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::RveOptions;
use super::PipelineError;
use crate::gds::LayoutIndex;
use crate::homogenize::{homogenize, ConductivityTensor, HomogenizationOptions};
use crate::macro_fem::MacroMesh;
use crate::rve::{build_rve_indexed, RveSpec, VoxelGrid};
use crate::stack::LayerStack;
use crate::vtk;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Identifies the inputs a map was computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub layout_hash: String,
    pub stack_hash: String,
    pub rve: RveOptions,
    pub homogenization: HomogenizationOptions,
}

impl Provenance {
    fn options_key(&self) -> String {
        serde_json::to_string(&(&self.rve, &self.homogenization)).expect("options serialize")
    }

    /// Cache key of the window centred at `(cx, cy)`.
    pub fn window_key(&self, cx: f64, cy: f64) -> String {
        let mut h = Sha256::new();
        h.update(self.layout_hash.as_bytes());
        h.update(self.stack_hash.as_bytes());
        h.update(cx.to_bits().to_le_bytes());
        h.update(cy.to_bits().to_le_bytes());
        h.update(self.rve.half_size_um.to_bits().to_le_bytes());
        h.update(self.options_key().as_bytes());
        hex::encode(h.finalize())
    }
}

/// Content hash of a voxel grid; position-independent, since the extracted
/// tensor does not depend on where the window sits.
fn grid_key(grid: &VoxelGrid, opts: &HomogenizationOptions) -> [u8; 32] {
    let mut h = Sha256::new();
    for n in [grid.nx, grid.ny, grid.nz] {
        h.update((n as u64).to_le_bytes());
    }
    h.update(grid.dx.to_bits().to_le_bytes());
    h.update(grid.dy.to_bits().to_le_bytes());
    for d in &grid.dz {
        h.update(d.to_bits().to_le_bytes());
    }
    for m in &grid.materials {
        h.update(m.conductivity.to_bits().to_le_bytes());
    }
    h.update(&grid.material_id);
    h.update(serde_json::to_string(opts).expect("options serialize").as_bytes());
    h.finalize().into()
}

/// On-disk tensor cache: one small JSON file per window key holding the
/// raw bits of the six components.
#[derive(Debug, Clone)]
pub struct TensorCache {
    dir: PathBuf,
}

#[derive(Serialize, Deserialize)]
struct CacheEntry {
    bits: [u64; 6],
}

impl TensorCache {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, PipelineError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| PipelineError::io(&dir, e))?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    pub fn get(&self, key: &str) -> Option<ConductivityTensor> {
        let text = std::fs::read_to_string(self.path(key)).ok()?;
        let entry: CacheEntry = serde_json::from_str(&text).ok()?;
        Some(ConductivityTensor::from_components(entry.bits.map(f64::from_bits)))
    }

    pub fn put(&self, key: &str, t: &ConductivityTensor) -> Result<(), PipelineError> {
        let entry = CacheEntry {
            bits: t.components().map(f64::to_bits),
        };
        let path = self.path(key);
        let tmp = self.dir.join(format!("{key}.tmp"));
        std::fs::write(&tmp, serde_json::to_vec(&entry).expect("entry serializes"))
            .and_then(|_| std::fs::rename(&tmp, &path))
            .map_err(|e| PipelineError::io(&path, e))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapStats {
    pub samples: usize,
    pub cache_hits: usize,
    pub unique_solves: usize,
}

/// One tensor per BEOL element column, sampled at the column centroid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConductivityMap {
    pub nx: usize,
    pub ny: usize,
    /// Sample centres in footprint coordinates, µm.
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Row-major in y: `tensors[i + nx * j]`.
    pub tensors: Vec<ConductivityTensor>,
    pub provenance: Provenance,
    pub stats: MapStats,
}

impl ConductivityMap {
    pub fn at(&self, i: usize, j: usize) -> &ConductivityTensor {
        &self.tensors[i + self.nx * j]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x_um,y_um");
        for n in ConductivityTensor::COMPONENT_NAMES {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for j in 0..self.ny {
            for i in 0..self.nx {
                write!(out, "{},{}", self.xs[i], self.ys[j]).unwrap();
                for c in self.at(i, j).components() {
                    write!(out, ",{c:e}").unwrap();
                }
                out.push('\n');
            }
        }
        out
    }

    /// One cell layer spanning `[z0, z1]` over the element columns.
    pub fn to_vtk(&self, mesh: &MacroMesh, z0: f64, z1: f64) -> String {
        let comps: Vec<Vec<f64>> = (0..6)
            .map(|c| self.tensors.iter().map(|t| t.components()[c]).collect())
            .collect();
        let data: Vec<vtk::Scalars<'_>> = ConductivityTensor::COMPONENT_NAMES
            .iter()
            .zip(&comps)
            .map(|(name, v)| vtk::Scalars {
                name,
                values: vtk::ScalarValues::Float(v),
            })
            .collect();
        vtk::rectilinear_grid("conductivity map", &mesh.xs, &mesh.ys, &[z0, z1], &data)
    }
}

/// Homogenize the RVE under every element column of `mesh`.
///
/// Windows with identical voxel content share one solve; with a cache,
/// previously computed windows are read back bit-exactly. The result does
/// not depend on `jobs` or on completion order.
pub fn build_conductivity_map(
    index: &LayoutIndex<'_>,
    stack: &LayerStack,
    mesh: &MacroMesh,
    origin: [f64; 2],
    provenance: &Provenance,
    jobs: usize,
    cache: Option<&TensorCache>,
) -> Result<ConductivityMap, PipelineError> {
    let (nx, ny) = (mesh.nx(), mesh.ny());
    let xs: Vec<f64> = (0..nx).map(|i| 0.5 * (mesh.xs[i] + mesh.xs[i + 1])).collect();
    let ys: Vec<f64> = (0..ny).map(|j| 0.5 * (mesh.ys[j] + mesh.ys[j + 1])).collect();
    let centers: Vec<(f64, f64)> = (0..nx * ny)
        .map(|s| (origin[0] + xs[s % nx], origin[1] + ys[s / nx]))
        .collect();
    let rve = provenance.rve;
    let opts = provenance.homogenization;
    let spec_at = |(cx, cy): (f64, f64)| RveSpec {
        center: (cx, cy),
        half_size: rve.half_size_um,
        voxels_per_edge_xy: rve.voxels_per_edge_xy,
        voxels_per_layer_z: rve.voxels_per_layer_z,
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| PipelineError::Config(format!("thread pool: {e}")))?;

    pool.install(|| {
        let keys: Vec<String> = centers.iter().map(|&(x, y)| provenance.window_key(x, y)).collect();
        let mut tensors: Vec<Option<ConductivityTensor>> = match cache {
            Some(c) => keys.par_iter().map(|k| c.get(k)).collect(),
            None => vec![None; centers.len()],
        };
        let cache_hits = tensors.iter().filter(|t| t.is_some()).count();

        let missing: Vec<usize> = (0..centers.len()).filter(|&s| tensors[s].is_none()).collect();
        let grids: Vec<(usize, VoxelGrid)> = missing
            .par_iter()
            .map(|&s| {
                build_rve_indexed(index, stack, &spec_at(centers[s]))
                    .map(|g| (s, g))
                    .map_err(|source| PipelineError::Rve {
                        x: centers[s].0,
                        y: centers[s].1,
                        source,
                    })
            })
            .collect::<Result<_, _>>()?;

        // First occurrence (in sample order) represents each distinct grid.
        let mut groups: HashMap<[u8; 32], usize> = HashMap::new();
        let mut representatives: Vec<usize> = Vec::new();
        let mut group_of = Vec::with_capacity(grids.len());
        for (pos, (_, g)) in grids.iter().enumerate() {
            let id = *groups.entry(grid_key(g, &opts)).or_insert_with(|| {
                representatives.push(pos);
                representatives.len() - 1
            });
            group_of.push(id);
        }
        let solved: Vec<ConductivityTensor> = representatives
            .par_iter()
            .map(|&pos| {
                let (s, g) = &grids[pos];
                homogenize(g, &opts)
                    .map(|h| h.tensor)
                    .map_err(|source| PipelineError::Homogenize {
                        x: centers[*s].0,
                        y: centers[*s].1,
                        source,
                    })
            })
            .collect::<Result<_, _>>()?;

        for (pos, (s, _)) in grids.iter().enumerate() {
            let t = solved[group_of[pos]];
            if let Some(c) = cache {
                c.put(&keys[*s], &t)?;
            }
            tensors[*s] = Some(t);
        }

        Ok(ConductivityMap {
            nx,
            ny,
            xs,
            ys,
            tensors: tensors.into_iter().map(|t| t.expect("every sample filled")).collect(),
            provenance: provenance.clone(),
            stats: MapStats {
                samples: centers.len(),
                cache_hits,
                unique_solves: representatives.len(),
            },
        })
    })
}
