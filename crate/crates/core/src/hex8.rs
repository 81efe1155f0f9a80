//! Trilinear 8-node hexahedron on axis-aligned boxes, integrated with 2x2x2
//! Gauss quadrature. Both the RVE and the chip-scale meshes are structured
//! box grids, so the Jacobian is diagonal and constant per element.
//!
//! Local node order (VTK_HEXAHEDRON): bottom face counter-clockwise from the
//! minimum corner, then the top face in the same order.

/// Reference coordinates of the 8 nodes in {-1, 1}^3.
pub const NODE_SIGNS: [[f64; 3]; 8] = [
    [-1.0, -1.0, -1.0],
    [1.0, -1.0, -1.0],
    [1.0, 1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
    [1.0, -1.0, 1.0],
    [1.0, 1.0, 1.0],
    [-1.0, 1.0, 1.0],
];

/// Integer (di, dj, dk) offsets of the local nodes from the minimum corner.
pub const NODE_OFFSETS: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [1, 1, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [1, 1, 1],
    [0, 1, 1],
];

const G: f64 = 0.577_350_269_189_625_8; // 1/sqrt(3)

/// 2x2x2 Gauss points (unit weights) in reference coordinates.
pub const GAUSS_POINTS: [[f64; 3]; 8] = [
    [-G, -G, -G],
    [G, -G, -G],
    [G, G, -G],
    [-G, G, -G],
    [-G, -G, G],
    [G, -G, G],
    [G, G, G],
    [-G, G, G],
];

pub fn shape(xi: [f64; 3]) -> [f64; 8] {
    let mut n = [0.0; 8];
    for (a, s) in NODE_SIGNS.iter().enumerate() {
        n[a] = 0.125 * (1.0 + s[0] * xi[0]) * (1.0 + s[1] * xi[1]) * (1.0 + s[2] * xi[2]);
    }
    n
}

/// Reference-coordinate derivatives dN_a/dxi_d.
pub fn shape_derivatives(xi: [f64; 3]) -> [[f64; 3]; 8] {
    let mut d = [[0.0; 3]; 8];
    for (a, s) in NODE_SIGNS.iter().enumerate() {
        let f = [1.0 + s[0] * xi[0], 1.0 + s[1] * xi[1], 1.0 + s[2] * xi[2]];
        d[a] = [
            0.125 * s[0] * f[1] * f[2],
            0.125 * s[1] * f[0] * f[2],
            0.125 * s[2] * f[0] * f[1],
        ];
    }
    d
}

/// Precomputed quadrature data for a box of size `h`.
#[derive(Debug, Clone)]
pub struct BoxElement {
    pub h: [f64; 3],
    /// Physical gradients of every shape function at every Gauss point.
    pub grads: [[[f64; 3]; 8]; 8],
    /// Shape values at every Gauss point.
    pub values: [[f64; 8]; 8],
    /// Quadrature weight times Jacobian determinant (= volume / 8).
    pub weight: f64,
}

impl BoxElement {
    pub fn new(h: [f64; 3]) -> Self {
        let mut grads = [[[0.0; 3]; 8]; 8];
        let mut values = [[0.0; 8]; 8];
        for (q, xi) in GAUSS_POINTS.iter().enumerate() {
            let d = shape_derivatives(*xi);
            for a in 0..8 {
                for k in 0..3 {
                    grads[q][a][k] = d[a][k] * 2.0 / h[k];
                }
            }
            values[q] = shape(*xi);
        }
        Self {
            h,
            grads,
            values,
            weight: h[0] * h[1] * h[2] / 8.0,
        }
    }

    pub fn volume(&self) -> f64 {
        self.h[0] * self.h[1] * self.h[2]
    }

    /// `∫ ∇N_a · κ ∇N_b dV` for a symmetric 3x3 `kappa`.
    pub fn conductance(&self, kappa: &[[f64; 3]; 3]) -> [[f64; 8]; 8] {
        let mut k = [[0.0; 8]; 8];
        for q in 0..8 {
            let g = &self.grads[q];
            let mut kg = [[0.0; 3]; 8];
            for b in 0..8 {
                for i in 0..3 {
                    kg[b][i] = kappa[i][0] * g[b][0] + kappa[i][1] * g[b][1] + kappa[i][2] * g[b][2];
                }
            }
            for a in 0..8 {
                for b in a..8 {
                    let v = g[a][0] * kg[b][0] + g[a][1] * kg[b][1] + g[a][2] * kg[b][2];
                    k[a][b] += v * self.weight;
                }
            }
        }
        for a in 0..8 {
            for b in 0..a {
                k[a][b] = k[b][a];
            }
        }
        k
    }

    pub fn isotropic_conductance(&self, kappa: f64) -> [[f64; 8]; 8] {
        let d = [[kappa, 0.0, 0.0], [0.0, kappa, 0.0], [0.0, 0.0, kappa]];
        self.conductance(&d)
    }

    /// Gradient of the interpolated field at Gauss point `q`.
    #[inline]
    pub fn gradient_at(&self, q: usize, nodal: &[f64; 8]) -> [f64; 3] {
        let mut g = [0.0; 3];
        for a in 0..8 {
            for k in 0..3 {
                g[k] += self.grads[q][a][k] * nodal[a];
            }
        }
        g
    }

    #[inline]
    pub fn value_at(&self, q: usize, nodal: &[f64; 8]) -> f64 {
        (0..8).map(|a| self.values[q][a] * nodal[a]).sum()
    }
}
