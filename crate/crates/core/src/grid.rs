//! Periodic spatial mesh on the d-torus and truncated velocity box.
//!
//! Spatial cells are indexed row-major with axis 0 slowest; velocity nodes
//! follow the same convention. Velocity nodes are midpoints of a uniform
//! partition of `[-vmax, vmax]^d`, so the node set is symmetric under
//! reflection and every node carries the weight `hv^d`.

use crate::error::{Error, Result};

/// Scalar field, one value per spatial cell.
pub type Field = Vec<f64>;

/// Vector field stored component-major: `field[axis][cell]`.
pub type VectorField = Vec<Vec<f64>>;

pub fn zero_vector_field(dim: usize, n: usize) -> VectorField {
    vec![vec![0.0; n]; dim]
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseGrid {
    dim: usize,
    length: f64,
    nx: usize,
    hx: f64,
    vmax: f64,
    nv: usize,
    hv: f64,
    xc: Vec<f64>,
    vc: Vec<f64>,
}

impl PhaseGrid {
    pub fn new(dim: usize, length: f64, nx: usize, vmax: f64, nv: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dim must be 1, 2 or 3, got {dim}")));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::InvalidGrid(format!("period L must be positive, got {length}")));
        }
        if !(vmax > 0.0 && vmax.is_finite()) {
            return Err(Error::InvalidGrid(format!("Vmax must be positive, got {vmax}")));
        }
        if nx < 4 {
            return Err(Error::InvalidGrid(format!("Nx must be at least 4, got {nx}")));
        }
        if nv < 4 {
            return Err(Error::InvalidGrid(format!("Nv must be at least 4, got {nv}")));
        }
        if nv % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "Nv must be even for a mirror-symmetric velocity mesh, got {nv}"
            )));
        }
        let hx = length / nx as f64;
        let hv = 2.0 * vmax / nv as f64;
        let xc = (0..nx).map(|i| (i as f64 + 0.5) * hx).collect();
        // Built from the centre outward so that vc[nv-1-j] == -vc[j] bit for bit.
        let half = nv / 2;
        let mut vc = vec![0.0; nv];
        for k in 0..half {
            let v = (k as f64 + 0.5) * hv;
            vc[half + k] = v;
            vc[half - 1 - k] = -v;
        }
        Ok(Self { dim, length, nx, hx, vmax, nv, hv, xc, vc })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn hx(&self) -> f64 {
        self.hx
    }

    pub fn vmax(&self) -> f64 {
        self.vmax
    }

    pub fn nv(&self) -> usize {
        self.nv
    }

    pub fn hv(&self) -> f64 {
        self.hv
    }

    /// Cell-centre coordinates along one axis.
    pub fn xc(&self) -> &[f64] {
        &self.xc
    }

    /// Velocity node coordinates along one axis.
    pub fn vc(&self) -> &[f64] {
        &self.vc
    }

    pub fn n_cells(&self) -> usize {
        self.nx.pow(self.dim as u32)
    }

    pub fn n_vel(&self) -> usize {
        self.nv.pow(self.dim as u32)
    }

    /// `hx^d`, the measure of one spatial cell.
    pub fn cell_volume(&self) -> f64 {
        self.hx.powi(self.dim as i32)
    }

    /// `hv^d`, the midpoint quadrature weight of one velocity node.
    pub fn velocity_weight(&self) -> f64 {
        self.hv.powi(self.dim as i32)
    }

    pub fn domain_volume(&self) -> f64 {
        self.length.powi(self.dim as i32)
    }

    pub fn cell_stride(&self, axis: usize) -> usize {
        self.nx.pow((self.dim - 1 - axis) as u32)
    }

    pub fn vel_stride(&self, axis: usize) -> usize {
        self.nv.pow((self.dim - 1 - axis) as u32)
    }

    /// Index of cell `cell` along `axis`.
    pub fn cell_coord(&self, cell: usize, axis: usize) -> usize {
        (cell / self.cell_stride(axis)) % self.nx
    }

    /// Index of velocity node `node` along `axis`.
    pub fn vel_coord(&self, node: usize, axis: usize) -> usize {
        (node / self.vel_stride(axis)) % self.nv
    }

    /// Cell-centre position of `cell` along `axis`.
    pub fn x(&self, cell: usize, axis: usize) -> f64 {
        self.xc[self.cell_coord(cell, axis)]
    }

    /// Velocity component `axis` of node `node`.
    pub fn v(&self, node: usize, axis: usize) -> f64 {
        self.vc[self.vel_coord(node, axis)]
    }

    /// Periodic neighbour of `cell` shifted by `offset` cells along `axis`.
    pub fn neighbor(&self, cell: usize, axis: usize, offset: isize) -> usize {
        let stride = self.cell_stride(axis);
        let i = self.cell_coord(cell, axis) as isize;
        let n = self.nx as isize;
        let j = (i + offset).rem_euclid(n) as usize;
        cell - (i as usize) * stride + j * stride
    }

    /// Midpoint quadrature `sum_j hv^d g[j]` over the velocity nodes.
    pub fn velocity_integral(&self, g: &[f64]) -> f64 {
        debug_assert_eq!(g.len(), self.n_vel());
        g.iter().sum::<f64>() * self.velocity_weight()
    }

    /// `sum_x hx^d s[x]` over the spatial cells.
    pub fn space_integral(&self, s: &[f64]) -> f64 {
        debug_assert_eq!(s.len(), self.n_cells());
        s.iter().sum::<f64>() * self.cell_volume()
    }

    /// Node index of the mirror image `-v` of node `node`.
    pub fn mirror_node(&self, node: usize) -> usize {
        let mut out = 0;
        for axis in 0..self.dim {
            let j = self.vel_coord(node, axis);
            out += (self.nv - 1 - j) * self.vel_stride(axis);
        }
        out
    }

    /// Same layout with a different number of cells per axis.
    pub fn with_nx(&self, nx: usize) -> Result<Self> {
        Self::new(self.dim, self.length, nx, self.vmax, self.nv)
    }
}

/// Free-function form of [`PhaseGrid::new`].
pub fn make_grid(dim: usize, length: f64, nx: usize, vmax: f64, nv: usize) -> Result<PhaseGrid> {
    PhaseGrid::new(dim, length, nx, vmax, nv)
}

/// Free-function form of [`PhaseGrid::velocity_integral`].
pub fn velocity_integral(grid: &PhaseGrid, g: &[f64]) -> f64 {
    grid.velocity_integral(g)
}

/// Shortest decimal that reads back to the same `f64`; exponent form for
/// very small or very large magnitudes.
pub fn csv_number(v: f64) -> String {
    format!("{v:?}")
}
