//! First-order computational homogenization of a voxel RVE.
//!
//! The subscale temperature is split as `T = T^M + G·(X − X^M) + T̃` with
//! `X^M` the RVE centroid. Three unit-gradient load cases are solved and
//! the effective tensor is read from the energy bilinear form
//! `κ_ij V = ∫ ∇T_i · κ_s ∇T_j dV`, cross-checked against the flux average
//! `κ e_i = ⟨κ_s ∇T_i⟩`.
//!
//! Lengths are in µm and conductivities in W/(m·K). The effective tensor is
//! a ratio of an energy to a volume times a squared gradient, so the length
//! unit cancels and the result is in W/(m·K) without rescaling.

use nalgebra::{Matrix3, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hex8::{BoxElement, NODE_OFFSETS};
use crate::numerics::{apply_dirichlet, cg_solve, CsrMatrix, NumericsError, SolveReport, TripletBuilder, DEFAULT_TOLERANCE};
use crate::rve::{RveError, VoxelGrid};

/// Relative disagreement between the energy and flux routes above which the
/// extraction is rejected.
pub const ROUTE_MISMATCH_LIMIT: f64 = 1e-6;
/// Relative asymmetry of the energy-route matrix above which the
/// extraction is rejected.
pub const ASYMMETRY_LIMIT: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum HomogenizationError {
    #[error(transparent)]
    Grid(#[from] RveError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("load case G = {gradient:?} did not converge: {report:?}")]
    NotConverged { gradient: [f64; 3], report: SolveReport },
    #[error("energy-route tensor asymmetric: |κ_{i}{j} − κ_{j}{i}| = {value:e}")]
    Asymmetric { i: usize, j: usize, value: f64 },
    #[error("homogenized tensor not positive definite (eigenvalues {0:?})")]
    NotPositiveDefinite([f64; 3]),
    #[error("energy and flux routes disagree by {0:e} (relative)")]
    RouteMismatch(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryCondition {
    /// Affine boundary temperature, zero boundary fluctuation.
    #[default]
    Kubc,
    /// Fluctuation periodic across opposite faces.
    Pbc,
}

impl std::str::FromStr for BoundaryCondition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "kubc" => Ok(Self::Kubc),
            "pbc" => Ok(Self::Pbc),
            other => Err(format!("unknown boundary condition '{other}' (expected kubc or pbc)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HomogenizationOptions {
    pub bc: BoundaryCondition,
    pub tolerance: f64,
    /// Iteration cap; `None` means ten times the number of unknowns.
    pub max_iter: Option<usize>,
}

impl Default for HomogenizationOptions {
    fn default() -> Self {
        Self {
            bc: BoundaryCondition::Kubc,
            tolerance: DEFAULT_TOLERANCE,
            max_iter: None,
        }
    }
}

impl HomogenizationOptions {
    pub fn with_bc(bc: BoundaryCondition) -> Self {
        Self { bc, ..Default::default() }
    }
}

/// Symmetric 3x3 conductivity tensor, W/(m·K).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConductivityTensor {
    pub xx: f64,
    pub yy: f64,
    pub zz: f64,
    pub xy: f64,
    pub xz: f64,
    pub yz: f64,
}

impl ConductivityTensor {
    pub const COMPONENT_NAMES: [&'static str; 6] = ["k_xx", "k_yy", "k_zz", "k_xy", "k_xz", "k_yz"];

    pub fn isotropic(k: f64) -> Self {
        Self::from_components([k, k, k, 0.0, 0.0, 0.0])
    }

    /// Components ordered xx, yy, zz, xy, xz, yz.
    pub fn from_components(c: [f64; 6]) -> Self {
        Self {
            xx: c[0],
            yy: c[1],
            zz: c[2],
            xy: c[3],
            xz: c[4],
            yz: c[5],
        }
    }

    pub fn components(&self) -> [f64; 6] {
        [self.xx, self.yy, self.zz, self.xy, self.xz, self.yz]
    }

    /// Symmetric part of a full matrix.
    pub fn from_matrix(m: &[[f64; 3]; 3]) -> Self {
        Self {
            xx: m[0][0],
            yy: m[1][1],
            zz: m[2][2],
            xy: 0.5 * (m[0][1] + m[1][0]),
            xz: 0.5 * (m[0][2] + m[2][0]),
            yz: 0.5 * (m[1][2] + m[2][1]),
        }
    }

    pub fn matrix(&self) -> [[f64; 3]; 3] {
        [
            [self.xx, self.xy, self.xz],
            [self.xy, self.yy, self.yz],
            [self.xz, self.yz, self.zz],
        ]
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> [f64; 3] {
        let m = self.matrix();
        let eig = SymmetricEigen::new(Matrix3::from_fn(|i, j| m[i][j]));
        let mut ev = [eig.eigenvalues[0], eig.eigenvalues[1], eig.eigenvalues[2]];
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn is_positive_definite(&self) -> bool {
        self.eigenvalues()[0] > 0.0
    }

    pub fn max_abs(&self) -> f64 {
        self.components().iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn max_abs_off_diagonal(&self) -> f64 {
        self.xy.abs().max(self.xz.abs()).max(self.yz.abs())
    }

    pub fn min_diagonal(&self) -> f64 {
        self.xx.min(self.yy).min(self.zz)
    }

    pub fn sub(&self, other: &Self) -> Self {
        let (a, b) = (self.components(), other.components());
        Self::from_components(std::array::from_fn(|i| a[i] - b[i]))
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::from_components(self.components().map(|c| c * s))
    }

    /// The tensor seen after rotating the material +90° about z
    /// (x' = −y, y' = x).
    pub fn rotated_90_z(&self) -> Self {
        Self {
            xx: self.yy,
            yy: self.xx,
            zz: self.zz,
            xy: -self.xy,
            xz: -self.yz,
            yz: self.xz,
        }
    }

    /// The tensor seen after mirroring z → −z.
    pub fn z_flipped(&self) -> Self {
        Self {
            xz: -self.xz,
            yz: -self.yz,
            ..*self
        }
    }
}

/// Node numbering of the voxel mesh: node `(i, j, k)` is
/// `i + (nx + 1) * (j + (ny + 1) * k)`.
#[derive(Debug, Clone)]
pub struct NodeLayout {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub zs: Vec<f64>,
}

impl NodeLayout {
    pub fn new(grid: &VoxelGrid) -> Self {
        Self {
            nx: grid.nx,
            ny: grid.ny,
            nz: grid.nz,
            xs: (0..=grid.nx).map(|i| grid.origin[0] + i as f64 * grid.dx).collect(),
            ys: (0..=grid.ny).map(|j| grid.origin[1] + j as f64 * grid.dy).collect(),
            zs: grid.z_nodes(),
        }
    }

    pub fn node_count(&self) -> usize {
        (self.nx + 1) * (self.ny + 1) * (self.nz + 1)
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize, k: usize) -> usize {
        i + (self.nx + 1) * (j + (self.ny + 1) * k)
    }

    pub fn ijk(&self, n: usize) -> (usize, usize, usize) {
        let i = n % (self.nx + 1);
        let r = n / (self.nx + 1);
        (i, r % (self.ny + 1), r / (self.ny + 1))
    }

    pub fn position(&self, n: usize) -> [f64; 3] {
        let (i, j, k) = self.ijk(n);
        [self.xs[i], self.ys[j], self.zs[k]]
    }

    pub fn is_boundary(&self, n: usize) -> bool {
        let (i, j, k) = self.ijk(n);
        i == 0 || j == 0 || k == 0 || i == self.nx || j == self.ny || k == self.nz
    }

    #[inline]
    pub fn element_nodes(&self, i: usize, j: usize, k: usize) -> [usize; 8] {
        NODE_OFFSETS.map(|o| self.node(i + o[0], j + o[1], k + o[2]))
    }

    /// Periodic image of a node on the reduced `nx·ny·nz` numbering.
    #[inline]
    pub fn periodic(&self, n: usize) -> usize {
        let (i, j, k) = self.ijk(n);
        (i % self.nx) + self.nx * ((j % self.ny) + self.ny * (k % self.nz))
    }
}

/// Element matrices for unit conductivity, one per z-slab.
fn unit_elements(grid: &VoxelGrid) -> Vec<(BoxElement, [[f64; 8]; 8])> {
    grid.dz
        .iter()
        .map(|&dz| {
            let e = BoxElement::new([grid.dx, grid.dy, dz]);
            let k = e.isotropic_conductance(1.0);
            (e, k)
        })
        .collect()
}

fn assemble_mapped(grid: &VoxelGrid, layout: &NodeLayout, dim: usize, map: impl Fn(usize) -> usize) -> CsrMatrix {
    let units = unit_elements(grid);
    let mut b = TripletBuilder::with_capacity(dim, grid.voxel_count() * 64);
    for k in 0..grid.nz {
        let ke = &units[k].1;
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let kappa = grid.conductivity(grid.voxel_index(i, j, k));
                let nodes = layout.element_nodes(i, j, k).map(&map);
                for a in 0..8 {
                    for c in 0..8 {
                        b.add(nodes[a], nodes[c], kappa * ke[a][c]);
                    }
                }
            }
        }
    }
    b.build()
}

/// Global conductance matrix on all grid nodes (singular: constants are in
/// its nullspace).
pub fn assemble_subscale(grid: &VoxelGrid) -> CsrMatrix {
    let layout = NodeLayout::new(grid);
    assemble_mapped(grid, &layout, layout.node_count(), |n| n)
}

/// Nodal values of `G·(X − X^M)`.
pub fn affine_field(grid: &VoxelGrid, g: [f64; 3]) -> Vec<f64> {
    let layout = NodeLayout::new(grid);
    let c = grid.center();
    (0..layout.node_count())
        .map(|n| {
            let p = layout.position(n);
            g[0] * (p[0] - c[0]) + g[1] * (p[1] - c[1]) + g[2] * (p[2] - c[2])
        })
        .collect()
}

/// Volume averages of a nodal field computed with the assembly quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldAverages {
    /// ⟨T⟩
    pub value: f64,
    /// ⟨∇T⟩
    pub gradient: [f64; 3],
    /// ⟨κ ∇T⟩ = −⟨q⟩
    pub flux: [f64; 3],
    /// ⟨∇T · κ ∇T⟩ = −⟨q · ∇T⟩
    pub energy: f64,
}

pub fn volume_averages(grid: &VoxelGrid, nodal: &[f64]) -> FieldAverages {
    let layout = NodeLayout::new(grid);
    let units = unit_elements(grid);
    let mut value = 0.0;
    let mut gradient = [0.0; 3];
    let mut flux = [0.0; 3];
    let mut energy = 0.0;
    for k in 0..grid.nz {
        let e = &units[k].0;
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let kappa = grid.conductivity(grid.voxel_index(i, j, k));
                let t = layout.element_nodes(i, j, k).map(|n| nodal[n]);
                for q in 0..8 {
                    let g = e.gradient_at(q, &t);
                    value += e.weight * e.value_at(q, &t);
                    for d in 0..3 {
                        gradient[d] += e.weight * g[d];
                        flux[d] += e.weight * kappa * g[d];
                    }
                    energy += e.weight * kappa * (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]);
                }
            }
        }
    }
    let v = grid.volume();
    FieldAverages {
        value: value / v,
        gradient: gradient.map(|x| x / v),
        flux: flux.map(|x| x / v),
        energy: energy / v,
    }
}

/// Solution of one load case.
#[derive(Debug, Clone, PartialEq)]
pub struct SubscaleField {
    pub gradient: [f64; 3],
    /// Nodal temperatures T^s.
    pub temperature: Vec<f64>,
    /// T^M = ⟨T^s⟩.
    pub mean_temperature: f64,
    /// T̃ = T^s − T^M − G·(X − X^M).
    pub fluctuation: Vec<f64>,
    pub report: SolveReport,
}

/// Reusable solver for the load cases of one grid: the matrix depends only
/// on the grid and boundary-condition kind.
pub struct LoadCaseSolver<'g> {
    grid: &'g VoxelGrid,
    layout: NodeLayout,
    opts: HomogenizationOptions,
    matrix: CsrMatrix,
}

impl<'g> LoadCaseSolver<'g> {
    pub fn new(grid: &'g VoxelGrid, opts: HomogenizationOptions) -> Result<Self, HomogenizationError> {
        grid.validate()?;
        let layout = NodeLayout::new(grid);
        let matrix = match opts.bc {
            BoundaryCondition::Kubc => assemble_mapped(grid, &layout, layout.node_count(), |n| n),
            BoundaryCondition::Pbc => {
                let dim = grid.nx * grid.ny * grid.nz;
                assemble_mapped(grid, &layout, dim, |n| layout.periodic(n))
            }
        };
        Ok(Self {
            grid,
            layout,
            opts,
            matrix,
        })
    }

    pub fn unknowns(&self) -> usize {
        self.matrix.dim()
    }

    pub fn solve(&self, g: [f64; 3]) -> Result<SubscaleField, HomogenizationError> {
        let affine = affine_field(self.grid, g);
        let n_nodes = self.layout.node_count();
        let max_iter = |dim: usize| self.opts.max_iter.unwrap_or(10 * dim.max(1));

        let (temperature, report) = match self.opts.bc {
            BoundaryCondition::Kubc => {
                let fixed: Vec<(usize, f64)> = (0..n_nodes)
                    .filter(|&n| self.layout.is_boundary(n))
                    .map(|n| (n, affine[n]))
                    .collect();
                let (a, b) = apply_dirichlet(&self.matrix, &vec![0.0; n_nodes], &fixed)?;
                cg_solve(&a, &b, self.opts.tolerance, max_iter(a.dim()))?
            }
            BoundaryCondition::Pbc => {
                // Reduced system Pᵀ K P w = −Pᵀ K a for the periodic part.
                let dim = self.matrix.dim();
                let mut rhs = vec![0.0; dim];
                let units = unit_elements(self.grid);
                for k in 0..self.grid.nz {
                    let ke = &units[k].1;
                    for j in 0..self.grid.ny {
                        for i in 0..self.grid.nx {
                            let kappa = self.grid.conductivity(self.grid.voxel_index(i, j, k));
                            let nodes = self.layout.element_nodes(i, j, k);
                            for a in 0..8 {
                                let f: f64 = (0..8).map(|c| ke[a][c] * affine[nodes[c]]).sum();
                                rhs[self.layout.periodic(nodes[a])] -= kappa * f;
                            }
                        }
                    }
                }
                let (a, b) = apply_dirichlet(&self.matrix, &rhs, &[(0, 0.0)])?;
                let (w, report) = cg_solve(&a, &b, self.opts.tolerance, max_iter(a.dim()))?;
                let t: Vec<f64> = (0..n_nodes).map(|n| affine[n] + w[self.layout.periodic(n)]).collect();
                (t, report)
            }
        };
        if !report.converged {
            return Err(HomogenizationError::NotConverged { gradient: g, report });
        }
        let mean = volume_averages(self.grid, &temperature).value;
        let fluctuation = temperature.iter().zip(&affine).map(|(t, a)| t - mean - a).collect();
        Ok(SubscaleField {
            gradient: g,
            temperature,
            mean_temperature: mean,
            fluctuation,
            report,
        })
    }
}

pub fn solve_loadcase(
    grid: &VoxelGrid,
    g: [f64; 3],
    opts: &HomogenizationOptions,
) -> Result<SubscaleField, HomogenizationError> {
    LoadCaseSolver::new(grid, *opts)?.solve(g)
}

/// `|⟨q·∇T⟩ − ⟨q⟩·⟨∇T⟩| / |⟨q⟩·⟨∇T⟩|`; zero when both sides vanish.
pub fn verify_hill_mandel(grid: &VoxelGrid, field: &SubscaleField) -> f64 {
    let avg = volume_averages(grid, &field.temperature);
    let micro = -avg.energy;
    let macro_ = -(avg.flux[0] * avg.gradient[0] + avg.flux[1] * avg.gradient[1] + avg.flux[2] * avg.gradient[2]);
    if macro_ == 0.0 {
        return if micro == 0.0 { 0.0 } else { f64::INFINITY };
    }
    ((micro - macro_) / macro_).abs()
}

/// Full extraction output with diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Homogenized {
    pub tensor: ConductivityTensor,
    /// Column i is ⟨κ_s ∇T_i⟩ (not symmetrized).
    pub flux_route: [[f64; 3]; 3],
    /// max |energy − flux| / max |κ|.
    pub route_mismatch: f64,
    pub hill_mandel: [f64; 3],
    pub reports: [SolveReport; 3],
}

pub fn extract_tensor(grid: &VoxelGrid, opts: &HomogenizationOptions) -> Result<ConductivityTensor, HomogenizationError> {
    Ok(homogenize(grid, opts)?.tensor)
}

/// Solve the three unit load cases and form the effective tensor.
pub fn homogenize(grid: &VoxelGrid, opts: &HomogenizationOptions) -> Result<Homogenized, HomogenizationError> {
    const UNIT: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let solver = LoadCaseSolver::new(grid, *opts)?;
    let fields: Vec<SubscaleField> = UNIT
        .par_iter()
        .map(|g| solver.solve(*g))
        .collect::<Result<_, _>>()?;

    let layout = &solver.layout;
    let units = unit_elements(grid);
    let mut energy = [[0.0; 3]; 3];
    for k in 0..grid.nz {
        let ke = &units[k].1;
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let kappa = grid.conductivity(grid.voxel_index(i, j, k));
                let nodes = layout.element_nodes(i, j, k);
                let t: [[f64; 8]; 3] = std::array::from_fn(|c| nodes.map(|n| fields[c].temperature[n]));
                let mut kt = [[0.0; 8]; 3];
                for c in 0..3 {
                    for a in 0..8 {
                        kt[c][a] = (0..8).map(|b| ke[a][b] * t[c][b]).sum();
                    }
                }
                for r in 0..3 {
                    for c in 0..3 {
                        let v: f64 = (0..8).map(|a| t[r][a] * kt[c][a]).sum();
                        energy[r][c] += kappa * v;
                    }
                }
            }
        }
    }
    let v = grid.volume();
    for row in energy.iter_mut() {
        for e in row.iter_mut() {
            *e /= v;
        }
    }

    let scale = energy.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
    for i in 0..3 {
        for j in i + 1..3 {
            let d = (energy[i][j] - energy[j][i]).abs();
            if d > ASYMMETRY_LIMIT * scale {
                return Err(HomogenizationError::Asymmetric { i, j, value: d });
            }
        }
    }
    let tensor = ConductivityTensor::from_matrix(&energy);

    let mut flux_route = [[0.0; 3]; 3];
    let mut hill_mandel = [0.0; 3];
    for (c, field) in fields.iter().enumerate() {
        let avg = volume_averages(grid, &field.temperature);
        for r in 0..3 {
            flux_route[r][c] = avg.flux[r];
        }
        hill_mandel[c] = verify_hill_mandel(grid, field);
    }
    let mut mismatch = 0.0f64;
    for r in 0..3 {
        for c in 0..3 {
            mismatch = mismatch.max((flux_route[r][c] - energy[r][c]).abs());
        }
    }
    let route_mismatch = if scale > 0.0 { mismatch / scale } else { 0.0 };
    if route_mismatch > ROUTE_MISMATCH_LIMIT {
        return Err(HomogenizationError::RouteMismatch(route_mismatch));
    }
    let ev = tensor.eigenvalues();
    if ev[0] <= 0.0 {
        return Err(HomogenizationError::NotPositiveDefinite(ev));
    }
    Ok(Homogenized {
        tensor,
        flux_route,
        route_mismatch,
        hill_mandel,
        reports: [fields[0].report, fields[1].report, fields[2].report],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stack::Material;

    fn mat(name: &str, k: f64) -> Material {
        Material {
            name: name.into(),
            conductivity: k,
        }
    }

    /// Two-phase grid whose lower half in z is phase 0, upper half phase 1.
    fn laminate(n: [usize; 3], size: [f64; 3], k: (f64, f64)) -> VoxelGrid {
        let mut g = VoxelGrid::uniform(n, size, mat("a", k.0));
        g.materials.push(mat("b", k.1));
        for kz in n[2] / 2..n[2] {
            for j in 0..n[1] {
                for i in 0..n[0] {
                    let v = g.voxel_index(i, j, kz);
                    g.material_id[v] = 1;
                }
            }
        }
        g
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn single_voxel_matrix_has_zero_row_sums() {
        let g = VoxelGrid::uniform([1, 1, 1], [1.0; 3], mat("m", 1.0));
        let k = assemble_subscale(&g);
        assert_eq!(k.dim(), 8);
        assert!(k.row_sums().iter().all(|s| s.abs() < 1e-14));
        assert!((k.get(0, 0) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn uniform_grid_matrix_symmetric() {
        let g = VoxelGrid::uniform([2, 2, 2], [1.0, 2.0, 0.5], mat("m", 3.0));
        let k = assemble_subscale(&g);
        assert_eq!(k.dim(), 27);
        assert_eq!(k.max_asymmetry(), 0.0);
        assert!(k.row_sums().iter().all(|s| s.abs() < 1e-12));
    }

    #[test]
    fn homogeneous_grid_gives_affine_field() {
        let g = VoxelGrid::uniform([4, 3, 5], [1.0, 0.6, 0.8], mat("si", 139.4));
        for bc in [BoundaryCondition::Kubc, BoundaryCondition::Pbc] {
            let f = solve_loadcase(&g, [0.3, -1.0, 2.0], &HomogenizationOptions::with_bc(bc)).unwrap();
            assert!(f.fluctuation.iter().all(|t| t.abs() < 1e-9), "{bc:?}");
            let t = extract_tensor(&g, &HomogenizationOptions::with_bc(bc)).unwrap();
            for (c, e) in t.components().iter().zip(ConductivityTensor::isotropic(139.4).components()) {
                assert!((c - e).abs() <= 1e-10 * 139.4, "{bc:?} {c} {e}");
            }
        }
    }

    #[test]
    fn zero_gradient_gives_constant_field() {
        let g = laminate([2, 2, 4], [1.0; 3], (400.0, 1.4));
        for bc in [BoundaryCondition::Kubc, BoundaryCondition::Pbc] {
            let f = solve_loadcase(&g, [0.0; 3], &HomogenizationOptions::with_bc(bc)).unwrap();
            assert!(f.temperature.iter().all(|&t| t == 0.0));
            assert_eq!(verify_hill_mandel(&g, &f), 0.0);
        }
    }

    #[test]
    fn laminate_series_gradient_ratio() {
        let g = laminate([2, 2, 8], [1.0, 1.0, 1.0], (400.0, 1.4));
        let f = solve_loadcase(&g, [0.0, 0.0, 1.0], &HomogenizationOptions::with_bc(BoundaryCondition::Pbc)).unwrap();
        let layout = NodeLayout::new(&g);
        let t = |k: usize| f.temperature[layout.node(0, 0, k)];
        let lower = (t(4) - t(0)) / 0.5;
        let upper = (t(8) - t(4)) / 0.5;
        assert!(rel(lower / upper, 1.4 / 400.0) < 1e-8);
        assert!(rel(lower + upper, 2.0) < 1e-10);
    }

    #[test]
    fn laminate_pbc_matches_mixing_rules() {
        let g = laminate([3, 3, 6], [1.0, 1.0, 1.0], (400.0, 1.4));
        let h = homogenize(&g, &HomogenizationOptions::with_bc(BoundaryCondition::Pbc)).unwrap();
        let t = h.tensor;
        assert!(rel(t.zz, 2.0 / (1.0 / 400.0 + 1.0 / 1.4)) < 1e-8);
        assert!(rel(t.xx, 200.7) < 1e-10);
        assert!(rel(t.yy, 200.7) < 1e-10);
        assert!(t.max_abs_off_diagonal() < 1e-8);
        assert!(h.hill_mandel.iter().all(|&r| r <= 1e-10));
        assert!(h.route_mismatch < 1e-8);
    }

    #[test]
    fn kubc_bounds_pbc_and_approaches_it_with_aspect_ratio() {
        let series = 2.0 / (1.0 / 400.0 + 1.0 / 1.4);
        let mut previous = f64::INFINITY;
        for width in [1.0, 4.0] {
            let g = laminate([4, 4, 4], [width, width, 1.0], (400.0, 1.4));
            let kubc = extract_tensor(&g, &HomogenizationOptions::default()).unwrap();
            let pbc = extract_tensor(&g, &HomogenizationOptions::with_bc(BoundaryCondition::Pbc)).unwrap();
            assert!(rel(kubc.xx, 200.7) < 1e-10);
            assert!(kubc.zz >= series);
            assert!(kubc.sub(&pbc).eigenvalues()[0] >= -1e-8 * kubc.max_abs());
            assert!(kubc.zz < previous);
            previous = kubc.zz;
        }
    }

    #[test]
    fn rotation_permutes_components() {
        let mut g = VoxelGrid::uniform([4, 6, 3], [0.8, 1.2, 0.6], mat("ox", 1.4));
        g.materials.push(mat("cu", 400.0));
        for &(i, j, k) in &[(0, 0, 0), (1, 0, 0), (1, 1, 1), (2, 1, 1), (2, 2, 1), (3, 4, 2), (0, 5, 2), (1, 3, 2)] {
            let v = g.voxel_index(i, j, k);
            g.material_id[v] = 1;
        }
        let opts = HomogenizationOptions::default();
        let t = extract_tensor(&g, &opts).unwrap();
        let r = extract_tensor(&g.rotated_90_z(), &opts).unwrap();
        let expect = t.rotated_90_z();
        for (a, b) in r.components().iter().zip(expect.components()) {
            assert!((a - b).abs() < 1e-8 * t.max_abs(), "{r:?} vs {expect:?}");
        }
        assert!(t.max_abs_off_diagonal() > 1e-6);
    }

    #[test]
    fn averaging_rules_hold() {
        let mut g = laminate([3, 4, 4], [1.0, 1.0, 1.0], (400.0, 1.4));
        let v = g.voxel_index(1, 2, 0);
        g.material_id[v] = 1;
        for bc in [BoundaryCondition::Kubc, BoundaryCondition::Pbc] {
            for gr in [[1.0, 0.0, 0.0], [0.2, -0.5, 1.0]] {
                let f = solve_loadcase(&g, gr, &HomogenizationOptions::with_bc(bc)).unwrap();
                let avg_t = volume_averages(&g, &f.temperature);
                let avg_f = volume_averages(&g, &f.fluctuation);
                for d in 0..3 {
                    assert!((avg_t.gradient[d] - gr[d]).abs() < 1e-8);
                    assert!(avg_f.gradient[d].abs() < 1e-8);
                }
                assert!(avg_f.value.abs() < 1e-8);
            }
        }
    }

    #[test]
    fn tensor_helpers() {
        let t = ConductivityTensor::from_components([3.0, 2.0, 1.0, 0.5, -0.25, 0.1]);
        assert_eq!(t.rotated_90_z().rotated_90_z().rotated_90_z().rotated_90_z(), t);
        assert_eq!(t.z_flipped().z_flipped(), t);
        let ev = t.eigenvalues();
        let trace: f64 = ev.iter().sum();
        assert!((trace - 6.0).abs() < 1e-12);
        assert!(ev[0] <= ev[1] && ev[1] <= ev[2]);
        assert_eq!("PBC".parse::<BoundaryCondition>().unwrap(), BoundaryCondition::Pbc);
    }
}
