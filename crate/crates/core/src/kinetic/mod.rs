//! Particle distribution `f(x, ξ)` and its split evolution.
//!
//! One full kinetic step is composed from exact or conservative substeps:
//! free transport in `x`, the affine drag/field flow in `ξ`, and the stiff
//! local-alignment contraction toward the cell mean velocity.

mod remap;
mod transport;

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

pub use remap::{affine_remap, deposit_point, match_moments, RemapOutcome, RemapPath, RemapWorkspace};
pub use transport::{transport_substep, TransportScheme};

use crate::error::{Error, Result};
use crate::grid::{csv_number, zero_vector_field, Field, PhaseGrid, VectorField};

/// Relative density below which a cell is treated as vacuum.
pub const VACUUM_FLOOR: f64 = 1e-12;

const SNAPSHOT_MAGIC: &[u8; 4] = b"ELDF";
const SNAPSHOT_VERSION: u32 = 1;

/// Gridded phase-space density, stored `[cell][velocity node]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistF {
    grid: Arc<PhaseGrid>,
    data: Vec<f64>,
}

impl DistF {
    pub fn zeros(grid: Arc<PhaseGrid>) -> Self {
        let len = grid.n_cells() * grid.n_vel();
        Self { grid, data: vec![0.0; len] }
    }

    /// Samples `value(cell, node)` on every phase-space node.
    pub fn from_fn(grid: Arc<PhaseGrid>, mut value: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let nvel = grid.n_vel();
        let mut data = Vec::with_capacity(grid.n_cells() * nvel);
        for cell in 0..grid.n_cells() {
            for node in 0..nvel {
                data.push(value(cell, node));
            }
        }
        Self::from_data(grid, data)
    }

    pub fn from_data(grid: Arc<PhaseGrid>, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.n_cells() * grid.n_vel() {
            return Err(Error::InvalidArgument(format!(
                "distribution has {} values, grid expects {}",
                data.len(),
                grid.n_cells() * grid.n_vel()
            )));
        }
        if data.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidArgument("distribution must be finite and nonnegative".into()));
        }
        Ok(Self { grid, data })
    }

    pub fn grid(&self) -> &PhaseGrid {
        &self.grid
    }

    pub fn grid_arc(&self) -> Arc<PhaseGrid> {
        Arc::clone(&self.grid)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn cell(&self, cell: usize) -> &[f64] {
        let n = self.grid.n_vel();
        &self.data[cell * n..(cell + 1) * n]
    }

    pub fn cell_mut(&mut self, cell: usize) -> &mut [f64] {
        let n = self.grid.n_vel();
        &mut self.data[cell * n..(cell + 1) * n]
    }

    /// `Σ_x hx^d ∫ f dξ`.
    pub fn total_mass(&self) -> f64 {
        self.data.iter().sum::<f64>() * self.grid.velocity_weight() * self.grid.cell_volume()
    }

    /// Total particle momentum per axis.
    pub fn total_momentum(&self) -> Vec<f64> {
        let g = &*self.grid;
        let nvel = g.n_vel();
        let mut out = vec![0.0; g.dim()];
        for (axis, slot) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for cell in 0..g.n_cells() {
                let values = &self.data[cell * nvel..(cell + 1) * nvel];
                acc += values.iter().enumerate().map(|(j, f)| f * g.v(j, axis)).sum::<f64>();
            }
            *slot = acc * g.velocity_weight() * g.cell_volume();
        }
        out
    }

    /// `∫∫ ½|ξ|² f dξ dx`.
    pub fn kinetic_energy(&self) -> f64 {
        let g = &*self.grid;
        let speed2 = speed_squared(g);
        let nvel = g.n_vel();
        let mut acc = 0.0;
        for cell in 0..g.n_cells() {
            let values = &self.data[cell * nvel..(cell + 1) * nvel];
            acc += values.iter().zip(&speed2).map(|(f, s)| f * s).sum::<f64>();
        }
        0.5 * acc * g.velocity_weight() * g.cell_volume()
    }

    /// Writes the flat binary snapshot: magic, version, dims, sizes, then
    /// the values as little-endian doubles in `[cell][node]` order.
    pub fn write_snapshot(&self, path: &Path) -> Result<()> {
        let g = &*self.grid;
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        out.write_all(SNAPSHOT_MAGIC)?;
        for v in [SNAPSHOT_VERSION, g.dim() as u32, g.nx() as u32, g.nv() as u32] {
            out.write_all(&v.to_le_bytes())?;
        }
        out.write_all(&g.length().to_le_bytes())?;
        out.write_all(&g.vmax().to_le_bytes())?;
        for v in &self.data {
            out.write_all(&v.to_le_bytes())?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_snapshot(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        let bad = |m: &str| Error::InvalidArgument(format!("snapshot {}: {m}", path.display()));
        if bytes.len() < 36 || &bytes[..4] != SNAPSHOT_MAGIC {
            return Err(bad("missing header"));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap());
        if word(0) != SNAPSHOT_VERSION {
            return Err(bad("unsupported version"));
        }
        let (dim, nx, nv) = (word(1) as usize, word(2) as usize, word(3) as usize);
        let length = f64::from_le_bytes(bytes[20..28].try_into().unwrap());
        let vmax = f64::from_le_bytes(bytes[28..36].try_into().unwrap());
        let grid = Arc::new(PhaseGrid::new(dim, length, nx, vmax, nv)?);
        let body = &bytes[36..];
        if body.len() != 8 * grid.n_cells() * grid.n_vel() {
            return Err(bad("payload size does not match header"));
        }
        let data = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        Self::from_data(grid, data)
    }
}

pub(crate) fn speed_squared(g: &PhaseGrid) -> Vec<f64> {
    (0..g.n_vel())
        .map(|j| (0..g.dim()).map(|a| g.v(j, a).powi(2)).sum())
        .collect()
}

/// Velocity moments of `f` per spatial cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub rho_f: Field,
    pub j_f: VectorField,
    pub u_f: VectorField,
    /// `∫ ξ⊗ξ f dξ`, stored `[cell][a * d + b]`.
    pub second: Vec<Vec<f64>>,
    pub vacuum: Vec<bool>,
}

impl Moments {
    pub fn dim(&self) -> usize {
        self.j_f.len()
    }

    pub fn n_cells(&self) -> usize {
        self.rho_f.len()
    }
}

/// Mass, mean and central second moments of one cell's velocity profile.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CellMoments {
    /// `Σ f` (not yet multiplied by the node weight).
    pub sum: f64,
    pub mean: [f64; 3],
    /// Central second moments `E[(ξ_a - μ_a)(ξ_b - μ_b)]`, row-major 3x3.
    pub cov: [f64; 9],
}

impl CellMoments {
    pub fn of(grid: &PhaseGrid, values: &[f64]) -> Self {
        let d = grid.dim();
        let sum: f64 = values.iter().sum();
        let mut out = Self { sum, ..Default::default() };
        if sum <= 0.0 {
            return out;
        }
        for a in 0..d {
            out.mean[a] = values.iter().enumerate().map(|(j, f)| f * grid.v(j, a)).sum::<f64>() / sum;
        }
        for a in 0..d {
            for b in a..d {
                let c = values
                    .iter()
                    .enumerate()
                    .map(|(j, f)| f * (grid.v(j, a) - out.mean[a]) * (grid.v(j, b) - out.mean[b]))
                    .sum::<f64>()
                    / sum;
                out.cov[3 * a + b] = c;
                out.cov[3 * b + a] = c;
            }
        }
        out
    }

    pub fn trace(&self, dim: usize) -> f64 {
        (0..dim).map(|a| self.cov[4 * a]).sum()
    }
}

fn vacuum_threshold(rho_f: &[f64]) -> f64 {
    let mean = rho_f.iter().sum::<f64>() / rho_f.len() as f64;
    VACUUM_FLOOR * mean
}

/// Density, momentum density, mean velocity and second moment per cell.
pub fn moments(f: &DistF) -> Moments {
    let g = f.grid();
    let d = g.dim();
    let n = g.n_cells();
    let w = g.velocity_weight();
    let mut rho_f = vec![0.0; n];
    let mut j_f = zero_vector_field(d, n);
    let mut second = vec![vec![0.0; d * d]; n];
    for cell in 0..n {
        let values = f.cell(cell);
        rho_f[cell] = values.iter().sum::<f64>() * w;
        for a in 0..d {
            j_f[a][cell] = values.iter().enumerate().map(|(j, v)| v * g.v(j, a)).sum::<f64>() * w;
            for b in a..d {
                let s = values
                    .iter()
                    .enumerate()
                    .map(|(j, v)| v * g.v(j, a) * g.v(j, b))
                    .sum::<f64>()
                    * w;
                second[cell][a * d + b] = s;
                second[cell][b * d + a] = s;
            }
        }
    }
    let floor = vacuum_threshold(&rho_f);
    let vacuum: Vec<bool> = rho_f.iter().map(|&r| r <= floor || r <= 0.0).collect();
    let mut u_f = zero_vector_field(d, n);
    for cell in 0..n {
        if !vacuum[cell] {
            for a in 0..d {
                u_f[a][cell] = j_f[a][cell] / rho_f[cell];
            }
        }
    }
    Moments { rho_f, j_f, u_f, second, vacuum }
}

/// `∫ (ξ - u_f)⊗(ξ - u_f) f dξ` per cell, row-major `d×d`; zero on vacuum.
pub fn kinetic_stress(f: &DistF) -> Vec<Vec<f64>> {
    let g = f.grid();
    let d = g.dim();
    let w = g.velocity_weight();
    let m = moments(f);
    (0..g.n_cells())
        .map(|cell| {
            if m.vacuum[cell] {
                return vec![0.0; d * d];
            }
            let cm = CellMoments::of(g, f.cell(cell));
            let mut out = vec![0.0; d * d];
            for a in 0..d {
                for b in 0..d {
                    out[a * d + b] = cm.cov[3 * a + b] * cm.sum * w;
                }
            }
            out
        })
        .collect()
}

/// Diagnostics accumulated by one substep.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SubstepStats {
    /// Mass removed by clipping negative values (before renormalisation).
    pub clipped_mass: f64,
    /// Mass whose image left the velocity box.
    pub escaped_mass: f64,
    /// Cells handled by the deposit fallback of the velocity remap.
    pub fallback_cells: usize,
    /// Cells whose remapped support escaped the velocity box.
    pub escape_warnings: usize,
    /// Kinetic energy removed from the particles, `Σ hx^d ΔE`.
    pub energy_removed: f64,
}

impl SubstepStats {
    pub fn merge(&mut self, other: &SubstepStats) {
        self.clipped_mass += other.clipped_mass;
        self.escaped_mass += other.escaped_mass;
        self.fallback_cells += other.fallback_cells;
        self.escape_warnings += other.escape_warnings;
        self.energy_removed += other.energy_removed;
    }
}

/// Applies the per-cell affine velocity flow `ξ ↦ shift + λ ξ`, with the
/// shift chosen per cell by `shift_of(cell, moments)`. Vacuum cells are
/// left untouched.
fn apply_affine_flow(
    f: &mut DistF,
    lambda: f64,
    ws: &mut RemapWorkspace,
    mut shift_of: impl FnMut(usize, &CellMoments) -> [f64; 3],
) -> SubstepStats {
    let grid = f.grid_arc();
    let g = &*grid;
    let n = g.n_cells();
    let w = g.velocity_weight();
    let vol = g.cell_volume();
    let speed2 = speed_squared(g);
    let sums: Vec<f64> = (0..n).map(|c| f.cell(c).iter().sum::<f64>() * w).collect();
    let floor = vacuum_threshold(&sums);
    let mut stats = SubstepStats::default();
    let mut scratch = vec![0.0; g.n_vel()];
    for cell in 0..n {
        if sums[cell] <= floor || sums[cell] <= 0.0 {
            continue;
        }
        let src = f.cell(cell);
        let cm = CellMoments::of(g, src);
        let shift = shift_of(cell, &cm);
        let energy_before: f64 = src.iter().zip(&speed2).map(|(v, s)| v * s).sum();
        let outcome = affine_remap(g, src, &mut scratch, shift, lambda, &cm, ws);
        let energy_after: f64 = scratch.iter().zip(&speed2).map(|(v, s)| v * s).sum();
        f.cell_mut(cell).copy_from_slice(&scratch);
        stats.energy_removed += 0.5 * (energy_before - energy_after) * w * vol;
        stats.escaped_mass += outcome.escaped_mass * w * vol;
        if outcome.escaped_mass > 0.0 {
            stats.escape_warnings += 1;
        }
        if outcome.path == RemapPath::Deposit {
            stats.fallback_cells += 1;
        }
    }
    stats
}

/// Exact flow of `∂_t f = -div_ξ((g - ξ) f)` over `dt` with `g = u - ∇Φ`
/// frozen per cell: characteristics `ξ(t) = g + e^{-t}(ξ₀ - g)`.
pub fn drag_field_substep(
    f: &mut DistF,
    u: &VectorField,
    grad_phi: &VectorField,
    dt: f64,
    ws: &mut RemapWorkspace,
) -> Result<SubstepStats> {
    if !(dt >= 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be nonnegative, got {dt}")));
    }
    if dt == 0.0 {
        return Ok(SubstepStats::default());
    }
    let d = f.grid().dim();
    let lambda = (-dt).exp();
    Ok(apply_affine_flow(f, lambda, ws, |cell, _| {
        let mut shift = [0.0; 3];
        for a in 0..d {
            shift[a] = (1.0 - lambda) * (u[a][cell] - grad_phi[a][cell]);
        }
        shift
    }))
}

/// Variant of [`drag_field_substep`] that maps each cell onto a prescribed
/// new mean velocity: `ξ ↦ target + λ (ξ - u_f)`. Used by the coupled
/// exchange, where the target comes from the two-phase drag ODE.
pub fn affine_velocity_substep(
    f: &mut DistF,
    target_mean: &VectorField,
    lambda: f64,
    ws: &mut RemapWorkspace,
) -> SubstepStats {
    let d = f.grid().dim();
    apply_affine_flow(f, lambda, ws, |cell, cm| {
        let mut shift = [0.0; 3];
        for a in 0..d {
            shift[a] = target_mean[a][cell] - lambda * cm.mean[a];
        }
        shift
    })
}

/// Exact contraction of each cell toward its own mean velocity:
/// `f'(ξ) = e^{d·dt/ε} f(u_f + e^{dt/ε}(ξ - u_f))`. Conserves mass and
/// momentum per cell; the velocity covariance shrinks by `e^{-2 dt/ε}`.
pub fn alignment_substep(
    f: &mut DistF,
    dt: f64,
    epsilon: f64,
    ws: &mut RemapWorkspace,
) -> Result<SubstepStats> {
    if !(dt >= 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be nonnegative, got {dt}")));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
    }
    if dt == 0.0 {
        return Ok(SubstepStats::default());
    }
    let d = f.grid().dim();
    let lambda = (-dt / epsilon).exp();
    Ok(apply_affine_flow(f, lambda, ws, |_, cm| {
        let mut shift = [0.0; 3];
        for a in 0..d {
            shift[a] = (1.0 - lambda) * cm.mean[a];
        }
        shift
    }))
}

/// Writes `x.., rho_f, u_f.., j_f..` per cell.
pub fn write_moments_csv(path: &Path, grid: &PhaseGrid, m: &Moments) -> Result<()> {
    let d = grid.dim();
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    let mut header: Vec<String> = (0..d).map(|a| format!("x{a}")).collect();
    header.push("rho_f".into());
    header.extend((0..d).map(|a| format!("u_f{a}")));
    header.extend((0..d).map(|a| format!("j_f{a}")));
    writeln!(out, "{}", header.join(","))?;
    for cell in 0..grid.n_cells() {
        let mut row: Vec<String> = (0..d).map(|a| csv_number(grid.x(cell, a))).collect();
        row.push(csv_number(m.rho_f[cell]));
        row.extend((0..d).map(|a| csv_number(m.u_f[a][cell])));
        row.extend((0..d).map(|a| csv_number(m.j_f[a][cell])));
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()?;
    Ok(())
}
