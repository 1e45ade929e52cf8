//! Two-phase limit system: pressureless Euler with drag and self-consistent
//! field for the particles, compressible Navier–Stokes for the fluid.
//!
//! Centered differences in space, classical RK4 in time.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fluid::{laplacian, pressure};
use crate::grid::{csv_number, zero_vector_field, Field, PhaseGrid, VectorField};
use crate::kinetic::VACUUM_FLOOR;
use crate::poisson::{spectral_resample, PoissonSolver};

/// `U = (ρ_f, ω = ρ_f u_f, ρ, m = ρ u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitState {
    pub rho_f: Field,
    pub omega: VectorField,
    pub rho: Field,
    pub m: VectorField,
}

impl LimitState {
    pub fn from_velocities(rho_f: Field, u_f: &VectorField, rho: Field, u: &VectorField) -> Result<Self> {
        let omega = u_f.iter().map(|c| c.iter().zip(&rho_f).map(|(u, r)| u * r).collect()).collect();
        let m = u.iter().map(|c| c.iter().zip(&rho).map(|(u, r)| u * r).collect()).collect();
        let s = Self { rho_f, omega, rho, m };
        s.validate()?;
        Ok(s)
    }

    pub fn zeros_like(&self) -> Self {
        let n = self.rho.len();
        let d = self.m.len();
        Self { rho_f: vec![0.0; n], omega: zero_vector_field(d, n), rho: vec![0.0; n], m: zero_vector_field(d, n) }
    }

    pub fn dim(&self) -> usize {
        self.m.len()
    }

    pub fn n_cells(&self) -> usize {
        self.rho.len()
    }

    fn validate(&self) -> Result<()> {
        let all = self.rho_f.iter().chain(&self.rho).chain(self.omega.iter().flatten()).chain(self.m.iter().flatten());
        if all.clone().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("limit state"));
        }
        if let Some((cell, &value)) = self.rho.iter().enumerate().find(|(_, r)| !(**r > 0.0)) {
            return Err(Error::NegativeDensity { cell, value });
        }
        Ok(())
    }

    /// Particle velocity, zero on vacuum cells.
    pub fn u_f(&self) -> VectorField {
        let floor = VACUUM_FLOOR * self.rho_f.iter().sum::<f64>() / self.n_cells() as f64;
        self.omega
            .iter()
            .map(|c| {
                c.iter()
                    .zip(&self.rho_f)
                    .map(|(w, r)| if *r > floor && *r > 0.0 { w / r } else { 0.0 })
                    .collect()
            })
            .collect()
    }

    pub fn u(&self) -> VectorField {
        self.m.iter().map(|c| c.iter().zip(&self.rho).map(|(m, r)| m / r).collect()).collect()
    }

    fn axpy(&self, a: f64, other: &Self) -> Self {
        let lin = |x: &[f64], y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(x, y)| x + a * y).collect() };
        Self {
            rho_f: lin(&self.rho_f, &other.rho_f),
            omega: self.omega.iter().zip(&other.omega).map(|(x, y)| lin(x, y)).collect(),
            rho: lin(&self.rho, &other.rho),
            m: self.m.iter().zip(&other.m).map(|(x, y)| lin(x, y)).collect(),
        }
    }

    /// Fourier interpolation of every component onto `n_to` cells per axis.
    pub fn resample(&self, dim: usize, n_from: usize, n_to: usize) -> Self {
        let r = |v: &[f64]| spectral_resample(v, dim, n_from, n_to);
        Self {
            rho_f: r(&self.rho_f),
            omega: self.omega.iter().map(|c| r(c)).collect(),
            rho: r(&self.rho),
            m: self.m.iter().map(|c| r(c)).collect(),
        }
    }

    /// Limit energy `½∫ρ_f|u_f|² + ½∫ρ|u|² + ∫ρ^γ/(γ-1) + ½∫|∇Φ|²`.
    pub fn energy(&self, grid: &PhaseGrid, poisson: &PoissonSolver, gamma: f64) -> Result<f64> {
        let uf = self.u_f();
        let u = self.u();
        let mut density = vec![0.0; self.n_cells()];
        for i in 0..self.n_cells() {
            let kf: f64 = uf.iter().map(|c| c[i] * c[i]).sum();
            let k: f64 = u.iter().map(|c| c[i] * c[i]).sum();
            density[i] = 0.5 * self.rho_f[i] * kf + 0.5 * self.rho[i] * k + self.rho[i].powf(gamma) / (gamma - 1.0);
        }
        Ok(grid.space_integral(&density) + poisson.coulomb_energy(&self.rho_f, grid.cell_volume())?)
    }
}

/// RHS evaluator bound to one grid.
#[derive(Debug)]
pub struct LimitSolver {
    grid: Arc<PhaseGrid>,
    poisson: PoissonSolver,
    gamma: f64,
    hyperviscosity: f64,
}

impl LimitSolver {
    pub fn new(grid: Arc<PhaseGrid>, gamma: f64, hyperviscosity: f64) -> Result<Self> {
        if !(gamma > 1.0) {
            return Err(Error::InvalidArgument(format!("gamma must exceed 1, got {gamma}")));
        }
        if !(hyperviscosity >= 0.0) {
            return Err(Error::InvalidArgument("hyperviscosity must be nonnegative".into()));
        }
        let poisson = PoissonSolver::new(&grid);
        Ok(Self { grid, poisson, gamma, hyperviscosity })
    }

    pub fn grid(&self) -> &PhaseGrid {
        &self.grid
    }

    pub fn poisson(&self) -> &PoissonSolver {
        &self.poisson
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    fn centered(&self, q: &[f64], axis: usize) -> Field {
        let g = &*self.grid;
        let inv = 0.5 / g.hx();
        (0..q.len()).map(|i| (q[g.neighbor(i, axis, 1)] - q[g.neighbor(i, axis, -1)]) * inv).collect()
    }

    /// `-div A(U) + F(U)`.
    pub fn rhs(&self, state: &LimitState) -> Result<LimitState> {
        let g = &*self.grid;
        let d = g.dim();
        let n = g.n_cells();
        let uf = state.u_f();
        let u = state.u();
        let field = self.poisson.solve(&state.rho_f)?;
        let mut out = state.zeros_like();
        let p: Vec<f64> = state.rho.iter().map(|r| r.powf(self.gamma)).collect();
        let mut lap = vec![0.0; n];
        for b in 0..d {
            let dr_f = self.centered(&state.omega[b], b);
            let dr = self.centered(&state.m[b], b);
            for i in 0..n {
                out.rho_f[i] -= dr_f[i];
                out.rho[i] -= dr[i];
            }
        }
        for a in 0..d {
            for b in 0..d {
                let flux_f: Vec<f64> = (0..n).map(|i| state.omega[a][i] * uf[b][i]).collect();
                let flux: Vec<f64> = (0..n).map(|i| state.m[a][i] * u[b][i]).collect();
                let df = self.centered(&flux_f, b);
                let dm = self.centered(&flux, b);
                for i in 0..n {
                    out.omega[a][i] -= df[i];
                    out.m[a][i] -= dm[i];
                }
            }
            let dp = self.centered(&p, a);
            laplacian(g, &u[a], &mut lap);
            for i in 0..n {
                let drag = state.rho_f[i] * (u[a][i] - uf[a][i]);
                out.omega[a][i] += drag - state.rho_f[i] * field.grad_phi[a][i];
                out.m[a][i] += -dp[i] + lap[i] - drag;
            }
        }
        if self.hyperviscosity > 0.0 {
            let nu = self.hyperviscosity;
            let mut lap2 = vec![0.0; n];
            let mut damp = |q: &[f64], o: &mut [f64]| {
                laplacian(g, q, &mut lap);
                laplacian(g, &lap, &mut lap2);
                for i in 0..n {
                    o[i] -= nu * lap2[i];
                }
            };
            damp(&state.rho_f, &mut out.rho_f);
            damp(&state.rho, &mut out.rho);
            for a in 0..d {
                damp(&state.omega[a], &mut out.omega[a]);
                damp(&state.m[a], &mut out.m[a]);
            }
        }
        Ok(out)
    }

    /// Largest `|∇u_f|` (centered differences).
    pub fn max_particle_gradient(&self, state: &LimitState) -> f64 {
        let uf = state.u_f();
        let mut worst = 0.0f64;
        for comp in &uf {
            for axis in 0..self.grid.dim() {
                worst = self.centered(comp, axis).iter().fold(worst, |w, v| w.max(v.abs()));
            }
        }
        worst
    }

    /// Stability numbers of explicit RK4 on this grid: advective
    /// `dt·max(|u_f|, |u|+c)/hx` and viscous `dt·4d/hx²`.
    pub fn stability_numbers(&self, state: &LimitState, dt: f64) -> (f64, f64) {
        let g = &*self.grid;
        let uf = state.u_f();
        let u = state.u();
        let mut speed = 0.0f64;
        for i in 0..state.n_cells() {
            let c = (self.gamma * state.rho[i].powf(self.gamma - 1.0)).sqrt();
            let sf: f64 = uf.iter().map(|c| c[i].abs()).sum();
            let s: f64 = u.iter().map(|c| c[i].abs()).sum::<f64>() + g.dim() as f64 * c;
            speed = speed.max(sf).max(s);
        }
        let h2 = g.hx() * g.hx();
        (dt * speed / g.hx(), dt * 4.0 * g.dim() as f64 / h2 + dt * self.hyperviscosity * 16.0 * (g.dim() as f64).powi(2) / (h2 * h2))
    }

    /// One RK4 step. Aborts when the particle velocity gradient indicator
    /// `max|∇u_f|·dt` exceeds one.
    pub fn step(&self, state: &LimitState, dt: f64, time: f64) -> Result<LimitState> {
        if !(dt >= 0.0) {
            return Err(Error::InvalidArgument(format!("dt must be nonnegative, got {dt}")));
        }
        if dt == 0.0 {
            return Ok(state.clone());
        }
        let indicator = self.max_particle_gradient(state) * dt;
        if indicator > 1.0 {
            return Err(Error::SmoothnessLost { time, indicator });
        }
        let (adv, visc) = self.stability_numbers(state, dt);
        if adv > 2.5 {
            return Err(Error::Cfl { stage: "limit advection", number: adv, limit: 2.5 });
        }
        if visc > 2.7 {
            return Err(Error::Cfl { stage: "limit viscosity", number: visc, limit: 2.7 });
        }
        let k1 = self.rhs(state)?;
        let k2 = self.rhs(&state.axpy(0.5 * dt, &k1))?;
        let k3 = self.rhs(&state.axpy(0.5 * dt, &k2))?;
        let k4 = self.rhs(&state.axpy(dt, &k3))?;
        let out = state
            .axpy(dt / 6.0, &k1)
            .axpy(dt / 3.0, &k2)
            .axpy(dt / 3.0, &k3)
            .axpy(dt / 6.0, &k4);
        out.validate()?;
        Ok(out)
    }

    /// Number of equal substeps needed to cover `dt` stably.
    pub fn substeps_for(&self, state: &LimitState, dt: f64) -> usize {
        let (adv, visc) = self.stability_numbers(state, dt);
        let need = (adv / 1.0).max(visc / 2.0).max(1.0);
        need.ceil() as usize
    }
}

/// Free-function form of [`LimitSolver::rhs`].
pub fn limit_rhs(state: &LimitState, grid: Arc<PhaseGrid>, gamma: f64) -> Result<LimitState> {
    LimitSolver::new(grid, gamma, 0.0)?.rhs(state)
}

/// Free-function form of [`LimitSolver::step`].
pub fn limit_step(state: &LimitState, dt: f64, grid: Arc<PhaseGrid>, gamma: f64) -> Result<LimitState> {
    LimitSolver::new(grid, gamma, 0.0)?.step(state, dt, 0.0)
}

/// Limit states at equally spaced times `k·dt`, `k = 0..=n_steps`, already
/// restricted to the comparison grid.
#[derive(Debug, Clone)]
pub struct LimitTrajectory {
    pub dt: f64,
    pub states: Vec<LimitState>,
}

impl LimitTrajectory {
    /// Integrates on `solver`'s grid from `initial` and stores every
    /// `dt`-state resampled to `n_out` cells per axis. Each `dt` is covered
    /// by as many RK4 substeps as stability requires.
    pub fn integrate(solver: &LimitSolver, initial: &LimitState, dt: f64, n_steps: usize, n_out: usize) -> Result<Self> {
        let g = solver.grid();
        let (dim, n_in) = (g.dim(), g.nx());
        let restrict = |s: &LimitState| if n_in == n_out { s.clone() } else { s.resample(dim, n_in, n_out) };
        let mut states = Vec::with_capacity(n_steps + 1);
        states.push(restrict(initial));
        let mut current = initial.clone();
        let mut time = 0.0;
        for _ in 0..n_steps {
            let sub = solver.substeps_for(&current, dt);
            let h = dt / sub as f64;
            for _ in 0..sub {
                current = solver.step(&current, h, time)?;
                time += h;
            }
            states.push(restrict(&current));
        }
        Ok(Self { dt, states })
    }

    pub fn at_step(&self, k: usize) -> &LimitState {
        &self.states[k.min(self.states.len() - 1)]
    }

    pub fn final_state(&self) -> &LimitState {
        self.states.last().unwrap()
    }
}

/// Writes `x.., rho, u.., p, rho_f, u_f..` per cell.
pub fn write_limit_csv(path: &Path, grid: &PhaseGrid, state: &LimitState, gamma: f64) -> Result<()> {
    let d = grid.dim();
    let u = state.u();
    let uf = state.u_f();
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    let mut header: Vec<String> = (0..d).map(|a| format!("x{a}")).collect();
    header.push("rho".into());
    header.extend((0..d).map(|a| format!("u{a}")));
    header.push("p".into());
    header.push("rho_f".into());
    header.extend((0..d).map(|a| format!("u_f{a}")));
    writeln!(out, "{}", header.join(","))?;
    for i in 0..grid.n_cells() {
        let mut row: Vec<String> = (0..d).map(|a| csv_number(grid.x(i, a))).collect();
        row.push(csv_number(state.rho[i]));
        row.extend((0..d).map(|a| csv_number(u[a][i])));
        row.push(csv_number(pressure(state.rho[i], gamma)?));
        row.push(csv_number(state.rho_f[i]));
        row.extend((0..d).map(|a| csv_number(uf[a][i])));
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(nx: usize) -> Arc<PhaseGrid> {
        Arc::new(PhaseGrid::new(1, 1.0, nx, 4.0, 8).unwrap())
    }

    fn uniform(nx: usize, rho_f: f64, uf: f64, rho: f64, u: f64) -> LimitState {
        LimitState::from_velocities(vec![rho_f; nx], &vec![vec![uf; nx]], vec![rho; nx], &vec![vec![u; nx]]).unwrap()
    }

    #[test]
    fn constant_state_is_steady() {
        let s = uniform(16, 1.0, 0.3, 1.2, 0.3);
        let r = limit_rhs(&s, grid(16), 2.0).unwrap();
        assert!(r.rho_f.iter().chain(&r.rho).chain(&r.omega[0]).chain(&r.m[0]).all(|v| v.abs() < 1e-14));
        let next = limit_step(&s, 1e-3, grid(16), 2.0).unwrap();
        for i in 0..16 {
            assert!((next.m[0][i] - s.m[0][i]).abs() < 1e-14);
        }
    }

    #[test]
    fn pure_exchange() {
        let s = uniform(8, 1.0, 0.0, 1.0, 1.0);
        let r = limit_rhs(&s, grid(8), 2.0).unwrap();
        assert!(r.omega[0].iter().all(|v| (v - 1.0).abs() < 1e-14));
        assert!(r.m[0].iter().all(|v| (v + 1.0).abs() < 1e-14));
    }

    #[test]
    fn zero_dt_is_identity() {
        let s = uniform(8, 1.0, 0.1, 1.0, 0.0);
        assert_eq!(limit_step(&s, 0.0, grid(8), 2.0).unwrap(), s);
    }

    #[test]
    fn sentinel_fires_on_steep_particle_velocity() {
        let nx = 16;
        let uf = vec![(0..nx).map(|i| if i < 8 { 5.0 } else { -5.0 }).collect()];
        let s = LimitState::from_velocities(vec![1.0; nx], &uf, vec![1.0; nx], &vec![vec![0.0; nx]]).unwrap();
        let solver = LimitSolver::new(grid(nx), 2.0, 0.0).unwrap();
        assert!(matches!(solver.step(&s, 0.02, 0.0), Err(Error::SmoothnessLost { .. })));
    }
}
