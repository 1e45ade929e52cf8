//! Periodic Poisson solve `-Δφ = ρ_f - 1` by spectral inversion.
//!
//! Convolution with the interaction kernel is exactly the zero-mean inverse
//! Laplacian on the torus, so the kernel itself is never tabulated.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{zero_vector_field, Field, PhaseGrid, VectorField};

/// Multi-dimensional FFT over a periodic cell grid of `n^dim` points.
pub struct Spectral {
    dim: usize,
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("dim", &self.dim).field("n", &self.n).finish()
    }
}

impl Spectral {
    pub fn new(dim: usize, n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            dim,
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        let plan = if inverse { &self.inverse } else { &self.forward };
        let n = self.n;
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        for axis in 0..self.dim {
            let stride = n.pow((self.dim - 1 - axis) as u32);
            let block = stride * n;
            for base in (0..data.len()).step_by(block) {
                for offset in 0..stride {
                    let start = base + offset;
                    for (k, slot) in line.iter_mut().enumerate() {
                        *slot = data[start + k * stride];
                    }
                    plan.process(&mut line);
                    for (k, value) in line.iter().enumerate() {
                        data[start + k * stride] = *value;
                    }
                }
            }
        }
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, false);
    }

    /// Inverse transform including the `1/N` normalisation.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, true);
        let scale = 1.0 / self.len() as f64;
        for z in data.iter_mut() {
            *z *= scale;
        }
    }

    /// Signed integer wavenumber of FFT index `m`.
    pub fn wavenumber(&self, m: usize) -> i64 {
        if m <= self.n / 2 {
            m as i64
        } else {
            m as i64 - self.n as i64
        }
    }

    pub fn is_nyquist(&self, m: usize) -> bool {
        self.n % 2 == 0 && m == self.n / 2
    }

    fn coord(&self, idx: usize, axis: usize) -> usize {
        (idx / self.n.pow((self.dim - 1 - axis) as u32)) % self.n
    }

    pub fn to_complex(values: &[f64]) -> Vec<Complex64> {
        values.iter().map(|&v| Complex64::new(v, 0.0)).collect()
    }
}

/// Electric potential and field on the spatial cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    pub phi: Field,
    pub grad_phi: VectorField,
    /// Mean of the source that was removed before inversion (`mean(ρ_f) - 1`).
    pub removed_mean: f64,
}

/// Spectral Poisson solver bound to one grid; reuses its FFT plans.
#[derive(Debug)]
pub struct PoissonSolver {
    dim: usize,
    length: f64,
    spectral: Spectral,
}

impl PoissonSolver {
    pub fn new(grid: &PhaseGrid) -> Self {
        Self {
            dim: grid.dim(),
            length: grid.length(),
            spectral: Spectral::new(grid.dim(), grid.nx()),
        }
    }

    fn k_vector(&self, idx: usize) -> [f64; 3] {
        let mut k = [0.0; 3];
        for (axis, slot) in k.iter_mut().enumerate().take(self.dim) {
            let m = self.spectral.coord(idx, axis);
            *slot = 2.0 * PI * self.spectral.wavenumber(m) as f64 / self.length;
        }
        k
    }

    fn has_nyquist(&self, idx: usize, axis: usize) -> bool {
        self.spectral.is_nyquist(self.spectral.coord(idx, axis))
    }

    /// Solves `-Δφ = ρ_f - mean(ρ_f)` with `mean(φ) = 0`.
    pub fn solve(&self, rho_f: &[f64]) -> Result<Potential> {
        if rho_f.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Poisson source"));
        }
        let n = rho_f.len();
        let mean = rho_f.iter().sum::<f64>() / n as f64;
        let mut hat: Vec<Complex64> = rho_f.iter().map(|&r| Complex64::new(r - mean, 0.0)).collect();
        self.spectral.forward(&mut hat);
        for (idx, z) in hat.iter_mut().enumerate() {
            let k = self.k_vector(idx);
            let k2: f64 = k.iter().map(|c| c * c).sum();
            *z = if k2 == 0.0 { Complex64::new(0.0, 0.0) } else { *z / k2 };
        }
        let mut grad_phi = zero_vector_field(self.dim, n);
        for (axis, out) in grad_phi.iter_mut().enumerate() {
            let mut d: Vec<Complex64> = hat
                .iter()
                .enumerate()
                .map(|(idx, z)| {
                    if self.has_nyquist(idx, axis) {
                        Complex64::new(0.0, 0.0)
                    } else {
                        *z * Complex64::new(0.0, self.k_vector(idx)[axis])
                    }
                })
                .collect();
            self.spectral.inverse(&mut d);
            for (o, z) in out.iter_mut().zip(&d) {
                *o = z.re;
            }
        }
        self.spectral.inverse(&mut hat);
        let phi = hat.iter().map(|z| z.re).collect();
        Ok(Potential { phi, grad_phi, removed_mean: mean - 1.0 })
    }

    /// Spectral Laplacian of a periodic field.
    pub fn laplacian(&self, values: &[f64]) -> Field {
        let mut hat = Spectral::to_complex(values);
        self.spectral.forward(&mut hat);
        for (idx, z) in hat.iter_mut().enumerate() {
            let k2: f64 = self.k_vector(idx).iter().map(|c| c * c).sum();
            *z *= -k2;
        }
        self.spectral.inverse(&mut hat);
        hat.iter().map(|z| z.re).collect()
    }

    /// `½ Σ |∇φ|² hx^d` for the potential generated by `rho_f`.
    pub fn coulomb_energy(&self, rho_f: &[f64], cell_volume: f64) -> Result<f64> {
        let pot = self.solve(rho_f)?;
        Ok(0.5 * field_energy(&pot.grad_phi) * cell_volume)
    }

    /// `∫ |∇Φ_diff|²` with `-ΔΦ_diff = rho_a - rho_b` (means removed).
    pub fn coulomb_distance(&self, rho_a: &[f64], rho_b: &[f64], cell_volume: f64) -> Result<f64> {
        let diff: Vec<f64> = rho_a.iter().zip(rho_b).map(|(a, b)| a - b).collect();
        let pot = self.solve(&diff)?;
        Ok(field_energy(&pot.grad_phi) * cell_volume)
    }
}

fn field_energy(grad: &VectorField) -> f64 {
    let n = grad[0].len();
    (0..n).map(|i| grad.iter().map(|c| c[i] * c[i]).sum::<f64>()).sum()
}

pub fn solve_poisson(rho_f: &[f64], grid: &PhaseGrid) -> Result<Potential> {
    PoissonSolver::new(grid).solve(rho_f)
}

pub fn coulomb_energy(rho_f: &[f64], grid: &PhaseGrid) -> Result<f64> {
    PoissonSolver::new(grid).coulomb_energy(rho_f, grid.cell_volume())
}

pub fn coulomb_distance(rho_a: &[f64], rho_b: &[f64], grid: &PhaseGrid) -> Result<f64> {
    PoissonSolver::new(grid).coulomb_distance(rho_a, rho_b, grid.cell_volume())
}

/// Trigonometric interpolation of a periodic cell field onto another cell
/// count, both grids sharing the period and the cell-centred layout.
pub fn spectral_resample(values: &[f64], dim: usize, n_from: usize, n_to: usize) -> Field {
    if n_from == n_to {
        return values.to_vec();
    }
    let from = Spectral::new(dim, n_from);
    let to = Spectral::new(dim, n_to);
    let mut hat = Spectral::to_complex(values);
    from.forward(&mut hat);
    let keep = n_from.min(n_to);
    // cell centre of index 0 sits at h/2; the shift between the two layouts
    // in units of the period is (1/n_to - 1/n_from)/2.
    let shift = 0.5 * (1.0 / n_to as f64 - 1.0 / n_from as f64);
    let mut out = vec![Complex64::new(0.0, 0.0); to.len()];
    for (idx, slot) in out.iter_mut().enumerate() {
        let mut src = 0usize;
        let mut phase = 0.0;
        let mut drop = false;
        for axis in 0..dim {
            let m = to.coord(idx, axis);
            let k = to.wavenumber(m);
            if 2 * k.unsigned_abs() as usize >= keep {
                drop = true;
                break;
            }
            let m_from = k.rem_euclid(n_from as i64) as usize;
            src += m_from * n_from.pow((dim - 1 - axis) as u32);
            phase += 2.0 * PI * k as f64 * shift;
        }
        if !drop {
            *slot = hat[src] * Complex64::from_polar(1.0, phase);
        }
    }
    let scale = to.len() as f64 / from.len() as f64;
    to.inverse(&mut out);
    out.iter().map(|z| z.re * scale).collect()
}
