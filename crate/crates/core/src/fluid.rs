//! Isentropic compressible Navier–Stokes with unit Laplacian viscosity and a
//! Brinkman exchange with the particle phase.
//!
//! The hyperbolic part uses a Rusanov flux on MC-limited
//! conservative variables with SSP-RK2 in time. Viscosity is applied as a
//! separate substep, implicit by default.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{csv_number, zero_vector_field, Field, PhaseGrid, VectorField};
use crate::kinetic::{moments, DistF, Moments};

/// `p(ρ) = ρ^γ`.
pub fn pressure(rho: f64, gamma: f64) -> Result<f64> {
    if !(rho >= 0.0) {
        return Err(Error::InvalidArgument(format!("pressure of negative density {rho}")));
    }
    Ok(rho.powf(gamma))
}

/// `c = sqrt(γ ρ^{γ-1})`.
pub fn sound_speed(rho: f64, gamma: f64) -> f64 {
    (gamma * rho.powf(gamma - 1.0)).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FluidState {
    pub rho: Field,
    pub m: VectorField,
    pub gamma: f64,
}

impl FluidState {
    pub fn new(rho: Field, m: VectorField, gamma: f64) -> Result<Self> {
        if !(gamma > 1.5) {
            return Err(Error::InvalidArgument(format!("gamma must exceed 3/2, got {gamma}")));
        }
        if m.iter().any(|c| c.len() != rho.len()) {
            return Err(Error::InvalidArgument("momentum and density sizes differ".into()));
        }
        if let Some((cell, &value)) = rho.iter().enumerate().find(|(_, r)| !(**r > 0.0)) {
            return Err(Error::NegativeDensity { cell, value });
        }
        Ok(Self { rho, m, gamma })
    }

    /// Builds the state from density and velocity.
    pub fn from_velocity(rho: Field, u: &VectorField, gamma: f64) -> Result<Self> {
        let m = u.iter().map(|c| c.iter().zip(&rho).map(|(u, r)| u * r).collect()).collect();
        Self::new(rho, m, gamma)
    }

    pub fn dim(&self) -> usize {
        self.m.len()
    }

    pub fn velocity(&self) -> VectorField {
        self.m.iter().map(|c| c.iter().zip(&self.rho).map(|(m, r)| m / r).collect()).collect()
    }

    pub fn total_mass(&self, grid: &PhaseGrid) -> f64 {
        grid.space_integral(&self.rho)
    }

    pub fn total_momentum(&self, grid: &PhaseGrid) -> Vec<f64> {
        self.m.iter().map(|c| grid.space_integral(c)).collect()
    }

    /// `∫ ½ρ|u|² + ρ^γ/(γ-1)`.
    pub fn energy(&self, grid: &PhaseGrid) -> f64 {
        let g = self.gamma;
        let density: Vec<f64> = (0..self.rho.len())
            .map(|i| {
                let m2: f64 = self.m.iter().map(|c| c[i] * c[i]).sum();
                0.5 * m2 / self.rho[i] + self.rho[i].powf(g) / (g - 1.0)
            })
            .collect();
        grid.space_integral(&density)
    }

    /// Largest `dt·(|u|+c)/hx`, summed over axes.
    pub fn courant(&self, grid: &PhaseGrid, dt: f64) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.rho.len() {
            let c = sound_speed(self.rho[i], self.gamma);
            let s: f64 = self.m.iter().map(|m| (m[i] / self.rho[i]).abs() + c).sum();
            worst = worst.max(s);
        }
        worst * dt / grid.hx()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ViscousScheme {
    /// Crank–Nicolson for the velocity, then a conservative momentum update.
    #[default]
    Implicit,
    /// Forward Euler; requires `dt ≤ hx²/(2d)`.
    Explicit,
}

impl ViscousScheme {
    pub fn name(self) -> &'static str {
        match self {
            Self::Implicit => "implicit",
            Self::Explicit => "explicit",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "implicit" => Some(Self::Implicit),
            "explicit" => Some(Self::Explicit),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluidOptions {
    /// Largest admissible hyperbolic Courant number.
    pub cfl: f64,
    pub viscous: ViscousScheme,
}

impl Default for FluidOptions {
    fn default() -> Self {
        Self { cfl: 1.0, viscous: ViscousScheme::Implicit }
    }
}

/// Periodic 3-point Laplacian summed over axes.
pub fn laplacian(grid: &PhaseGrid, u: &[f64], out: &mut [f64]) {
    let h2 = grid.hx() * grid.hx();
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for axis in 0..grid.dim() {
            acc += u[grid.neighbor(i, axis, 1)] - 2.0 * u[i] + u[grid.neighbor(i, axis, -1)];
        }
        *o = acc / h2;
    }
}

/// Forward difference `(u[i+1] - u[i]) / hx` along `axis`.
pub fn forward_difference(grid: &PhaseGrid, u: &[f64], axis: usize) -> Field {
    (0..u.len()).map(|i| (u[grid.neighbor(i, axis, 1)] - u[i]) / grid.hx()).collect()
}

/// `∫ |∇_h u|²` with the face-centred gradient that pairs with [`laplacian`]:
/// `Σ u·Δ_h u = -Σ |D⁺u|²`.
pub fn gradient_energy(grid: &PhaseGrid, u: &VectorField) -> f64 {
    let mut acc = 0.0;
    for comp in u {
        for axis in 0..grid.dim() {
            acc += forward_difference(grid, comp, axis).iter().map(|g| g * g).sum::<f64>();
        }
    }
    acc * grid.cell_volume()
}

/// Monotonized central slope: the centred difference, clipped to twice
/// either one-sided difference.
fn mc(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        return 0.0;
    }
    let c = 0.5 * (a + b);
    c.signum() * c.abs().min(2.0 * a.abs()).min(2.0 * b.abs())
}

/// `-div F(U)` for the Euler part with Rusanov fluxes. `vars[0]` is ρ and
/// `vars[1 + a]` is `m_a`.
fn euler_rhs(grid: &PhaseGrid, gamma: f64, vars: &[Vec<f64>], out: &mut [Vec<f64>]) {
    let d = grid.dim();
    let n = grid.n_cells();
    let nvars = d + 1;
    for o in out.iter_mut() {
        o.iter_mut().for_each(|v| *v = 0.0);
    }
    let mut slopes = vec![vec![0.0; n]; nvars];
    let mut flux = vec![vec![0.0; n]; nvars];
    let mut left = [0.0f64; 4];
    let mut right = [0.0f64; 4];
    let mut f_left = [0.0f64; 4];
    let mut f_right = [0.0f64; 4];
    let phys = |state: &[f64; 4], axis: usize, out: &mut [f64; 4]| -> f64 {
        let rho = state[0];
        let un = state[1 + axis] / rho;
        let p = rho.powf(gamma);
        out[0] = state[1 + axis];
        for a in 0..d {
            out[1 + a] = state[1 + a] * un;
        }
        out[1 + axis] += p;
        un.abs() + sound_speed(rho, gamma)
    };
    for axis in 0..d {
        for k in 0..nvars {
            for i in 0..n {
                let l = vars[k][grid.neighbor(i, axis, -1)];
                let r = vars[k][grid.neighbor(i, axis, 1)];
                slopes[k][i] = mc(vars[k][i] - l, r - vars[k][i]);
            }
        }
        // flux[k][i] is the flux through the face between i and i+1.
        for i in 0..n {
            let r = grid.neighbor(i, axis, 1);
            for k in 0..nvars {
                left[k] = vars[k][i] + 0.5 * slopes[k][i];
                right[k] = vars[k][r] - 0.5 * slopes[k][r];
            }
            let sl = phys(&left, axis, &mut f_left);
            let sr = phys(&right, axis, &mut f_right);
            let alpha = sl.max(sr);
            for k in 0..nvars {
                flux[k][i] = 0.5 * (f_left[k] + f_right[k]) - 0.5 * alpha * (right[k] - left[k]);
            }
        }
        let inv_h = 1.0 / grid.hx();
        for k in 0..nvars {
            for i in 0..n {
                let l = grid.neighbor(i, axis, -1);
                out[k][i] -= (flux[k][i] - flux[k][l]) * inv_h;
            }
        }
    }
}

fn check_density(rho: &[f64]) -> Result<()> {
    for (cell, &value) in rho.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFinite("fluid density"));
        }
        if value <= 0.0 {
            return Err(Error::NegativeDensity { cell, value });
        }
    }
    Ok(())
}

/// Inviscid Euler update over `dt` (SSP-RK2).
pub fn hydro_step(state: &FluidState, dt: f64, grid: &PhaseGrid, opts: &FluidOptions) -> Result<FluidState> {
    if !(dt >= 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be nonnegative, got {dt}")));
    }
    if dt == 0.0 {
        return Ok(state.clone());
    }
    let courant = state.courant(grid, dt);
    if courant > opts.cfl {
        return Err(Error::Cfl { stage: "fluid", number: courant, limit: opts.cfl });
    }
    let d = state.dim();
    let mut u0: Vec<Vec<f64>> = Vec::with_capacity(d + 1);
    u0.push(state.rho.clone());
    u0.extend(state.m.iter().cloned());
    let mut k = vec![vec![0.0; state.rho.len()]; d + 1];
    euler_rhs(grid, state.gamma, &u0, &mut k);
    let u1: Vec<Vec<f64>> = u0
        .iter()
        .zip(&k)
        .map(|(u, r)| u.iter().zip(r).map(|(a, b)| a + dt * b).collect())
        .collect();
    check_density(&u1[0])?;
    euler_rhs(grid, state.gamma, &u1, &mut k);
    let u2: Vec<Vec<f64>> = (0..=d)
        .map(|c| (0..u0[c].len()).map(|i| 0.5 * u0[c][i] + 0.5 * (u1[c][i] + dt * k[c][i])).collect())
        .collect();
    check_density(&u2[0])?;
    let mut it = u2.into_iter();
    let rho = it.next().unwrap();
    Ok(FluidState { rho, m: it.collect(), gamma: state.gamma })
}

/// Viscous substep `∂_t m = Δ_h u` over `dt` at frozen density. The
/// implicit variant is Crank–Nicolson in `u`; both update `m` in flux form
/// so total momentum is untouched.
pub fn viscous_step(state: &FluidState, dt: f64, grid: &PhaseGrid, scheme: ViscousScheme) -> Result<FluidState> {
    if dt == 0.0 {
        return Ok(state.clone());
    }
    let n = state.rho.len();
    let d = grid.dim() as f64;
    let h2 = grid.hx() * grid.hx();
    let mut out = state.clone();
    let mut lap = vec![0.0; n];
    for (a, comp) in state.m.iter().enumerate() {
        let u_old: Vec<f64> = comp.iter().zip(&state.rho).map(|(m, r)| m / r).collect();
        let u_eff: Vec<f64> = match scheme {
            ViscousScheme::Explicit => {
                let number = dt * 2.0 * d / h2;
                if number > 1.0 + 1e-12 {
                    return Err(Error::Cfl { stage: "explicit viscosity", number, limit: 1.0 });
                }
                u_old
            }
            ViscousScheme::Implicit => {
                laplacian(grid, &u_old, &mut lap);
                let rhs: Vec<f64> = (0..n).map(|i| comp[i] + 0.5 * dt * lap[i]).collect();
                let u_new = implicit_velocity(grid, &state.rho, &rhs, 0.5 * dt)?;
                u_old.iter().zip(&u_new).map(|(a, b)| 0.5 * (a + b)).collect()
            }
        };
        laplacian(grid, &u_eff, &mut lap);
        for i in 0..n {
            out.m[a][i] = comp[i] + dt * lap[i];
        }
    }
    Ok(out)
}

/// Solves `(ρ - dt Δ_h) u = m` by Jacobi-preconditioned conjugate gradients.
fn implicit_velocity(grid: &PhaseGrid, rho: &[f64], m: &[f64], dt: f64) -> Result<Vec<f64>> {
    let n = rho.len();
    let h2 = grid.hx() * grid.hx();
    let diag: Vec<f64> = rho.iter().map(|r| r + 2.0 * grid.dim() as f64 * dt / h2).collect();
    let apply = |x: &[f64], out: &mut [f64], lap: &mut [f64]| {
        laplacian(grid, x, lap);
        for i in 0..n {
            out[i] = rho[i] * x[i] - dt * lap[i];
        }
    };
    let mut x: Vec<f64> = m.iter().zip(rho).map(|(m, r)| m / r).collect();
    let mut lap = vec![0.0; n];
    let mut ax = vec![0.0; n];
    apply(&x, &mut ax, &mut lap);
    let mut r: Vec<f64> = (0..n).map(|i| m[i] - ax[i]).collect();
    let norm_b = m.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let mut z: Vec<f64> = (0..n).map(|i| r[i] / diag[i]).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut ap = vec![0.0; n];
    for _ in 0..(10 * n + 100) {
        let rnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rnorm <= 1e-14 * norm_b || rnorm == 0.0 {
            return Ok(x);
        }
        apply(&p, &mut ap, &mut lap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if !(pap > 0.0) {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
            z[i] = r[i] / diag[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(Error::NonFinite("implicit viscosity solve"))
    }
}

/// Hyperbolic plus viscous update over `dt` (no exchange), split
/// symmetrically as half viscous, full hyperbolic, half viscous.
pub fn navier_stokes_step(state: &FluidState, dt: f64, grid: &PhaseGrid, opts: &FluidOptions) -> Result<FluidState> {
    let half = viscous_step(state, 0.5 * dt, grid, opts.viscous)?;
    let hydro = hydro_step(&half, dt, grid, opts)?;
    viscous_step(&hydro, 0.5 * dt, grid, opts.viscous)
}

/// Exact relaxation `ρ u' = ρ_f (u_f - u)` with the particle moments frozen.
pub fn brinkman_step(state: &FluidState, mom: &Moments, dt: f64) -> FluidState {
    let mut out = state.clone();
    for i in 0..state.rho.len() {
        if mom.vacuum[i] {
            continue;
        }
        let decay = (-mom.rho_f[i] * dt / state.rho[i]).exp();
        for a in 0..state.dim() {
            let u = state.m[a][i] / state.rho[i];
            let uf = mom.u_f[a][i];
            out.m[a][i] = state.rho[i] * (uf + (u - uf) * decay);
        }
    }
    out
}

/// One fluid step against frozen particle moments: Navier–Stokes over `dt`
/// followed by the exact Brinkman relaxation.
pub fn fluid_step(state: &FluidState, mom: &Moments, dt: f64, grid: &PhaseGrid, opts: &FluidOptions) -> Result<FluidState> {
    let ns = navier_stokes_step(state, dt, grid, opts)?;
    Ok(brinkman_step(&ns, mom, dt))
}

/// `Σ_x (m + j_f) hx^d`, total momentum of both phases.
pub fn coupled_momentum_budget(state: &FluidState, f: &DistF) -> Vec<f64> {
    let grid = f.grid();
    let mom = moments(f);
    (0..grid.dim())
        .map(|a| grid.space_integral(&state.m[a]) + grid.space_integral(&mom.j_f[a]))
        .collect()
}

/// Writes `x.., rho, u.., p` per cell.
pub fn write_fluid_csv(path: &Path, grid: &PhaseGrid, state: &FluidState) -> Result<()> {
    let d = grid.dim();
    let u = state.velocity();
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    let mut header: Vec<String> = (0..d).map(|a| format!("x{a}")).collect();
    header.push("rho".into());
    header.extend((0..d).map(|a| format!("u{a}")));
    header.push("p".into());
    writeln!(out, "{}", header.join(","))?;
    for i in 0..grid.n_cells() {
        let mut row: Vec<String> = (0..d).map(|a| csv_number(grid.x(i, a))).collect();
        row.push(csv_number(state.rho[i]));
        row.extend((0..d).map(|a| csv_number(u[a][i])));
        row.push(csv_number(pressure(state.rho[i], state.gamma)?));
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()?;
    Ok(())
}

/// Uniform state at rest.
pub fn rest_state(grid: &PhaseGrid, rho: f64, gamma: f64) -> Result<FluidState> {
    FluidState::new(vec![rho; grid.n_cells()], zero_vector_field(grid.dim(), grid.n_cells()), gamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(nx: usize) -> PhaseGrid {
        PhaseGrid::new(1, 1.0, nx, 4.0, 8).unwrap()
    }

    #[test]
    fn pressure_values() {
        assert_eq!(pressure(0.0, 2.0).unwrap(), 0.0);
        assert_eq!(pressure(1.0, 5.0 / 3.0).unwrap(), 1.0);
        assert!((pressure(2.0, 5.0 / 3.0).unwrap() - 3.174802103936399).abs() < 1e-14);
        assert!(pressure(-1.0, 2.0).is_err());
    }

    #[test]
    fn rest_state_is_steady() {
        let g = grid(16);
        let s = rest_state(&g, 1.0, 2.0).unwrap();
        let out = navier_stokes_step(&s, 0.01, &g, &FluidOptions::default()).unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn hydro_conserves_mass_and_momentum() {
        let g = grid(64);
        let rho: Vec<f64> = g.xc().iter().map(|x| 1.0 + 0.3 * (2.0 * PI * x).sin()).collect();
        let u = vec![g.xc().iter().map(|x| 0.2 * (2.0 * PI * x).cos()).collect()];
        let s = FluidState::from_velocity(rho, &u, 2.0).unwrap();
        let out = navier_stokes_step(&s, 0.002, &g, &FluidOptions::default()).unwrap();
        assert!((out.total_mass(&g) - s.total_mass(&g)).abs() < 1e-14);
        assert!((out.total_momentum(&g)[0] - s.total_momentum(&g)[0]).abs() < 1e-14);
    }

    #[test]
    fn implicit_and_explicit_viscosity_agree_for_small_steps() {
        let g = grid(32);
        let rho = vec![1.0; 32];
        let u = vec![g.xc().iter().map(|x| (2.0 * PI * x).sin()).collect()];
        let s = FluidState::from_velocity(rho, &u, 2.0).unwrap();
        let dt = 1e-5;
        let a = viscous_step(&s, dt, &g, ViscousScheme::Implicit).unwrap();
        let b = viscous_step(&s, dt, &g, ViscousScheme::Explicit).unwrap();
        for i in 0..32 {
            assert!((a.m[0][i] - b.m[0][i]).abs() < 1e-6);
        }
        assert!(viscous_step(&s, 1.0, &g, ViscousScheme::Explicit).is_err());
    }

    #[test]
    fn gradient_energy_matches_summation_by_parts() {
        let g = grid(32);
        let u: Vec<f64> = g.xc().iter().map(|x| (2.0 * PI * x).sin() + 0.3 * (6.0 * PI * x).cos()).collect();
        let mut lap = vec![0.0; 32];
        laplacian(&g, &u, &mut lap);
        let lhs = -g.space_integral(&u.iter().zip(&lap).map(|(a, b)| a * b).collect::<Vec<_>>());
        assert!((lhs - gradient_energy(&g, &vec![u])).abs() < 1e-10);
    }

    #[test]
    fn cfl_violation_is_rejected() {
        let g = grid(16);
        let s = rest_state(&g, 1.0, 2.0).unwrap();
        assert!(matches!(
            hydro_step(&s, 1.0, &g, &FluidOptions::default()),
            Err(Error::Cfl { .. })
        ));
    }
}
