//! Strang-split coupled stepper and the single-ε driver.

use std::path::PathBuf;
use std::sync::Arc;

use crate::entropy::{
    check_energy_inequality, dissipation_d1, dissipation_d2, energy_functional, relative_entropy, DissipationBudget,
    EnergyCheck, EntropyReport, Trajectory,
};
use crate::error::{Error, Result};
use crate::fluid::{navier_stokes_step, sound_speed, FluidOptions, FluidState};
use crate::grid::{PhaseGrid, VectorField};
use crate::kinetic::{
    affine_velocity_substep, alignment_substep, moments, transport_substep, DistF, Moments, RemapWorkspace, SubstepStats,
    TransportScheme,
};
use crate::limit::{LimitSolver, LimitState, LimitTrajectory};
use crate::poisson::PoissonSolver;

use super::{PreparedIc, Profile};

/// Numerical switches of the coupled stepper.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepperOptions {
    pub transport: TransportScheme,
    pub fluid: FluidOptions,
    /// Disables the alignment substep (reference runs).
    pub alignment: bool,
}

impl Default for StepperOptions {
    fn default() -> Self {
        Self { transport: TransportScheme::FiniteVolume, fluid: FluidOptions::default(), alignment: true }
    }
}

/// Per-run settings of [`run_coupled`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub t_final: f64,
    pub cfl: f64,
    pub report_cadence: f64,
    pub stepper: StepperOptions,
    /// Limit grid refinement factor relative to the ε-grid.
    pub limit_refine: usize,
    pub hyperviscosity: f64,
    pub energy_tol: f64,
    pub lemma32_c_max: f64,
    /// Directory for `f_<step>.bin` snapshots at every report.
    pub snapshot_dir: Option<PathBuf>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            t_final: 0.5,
            cfl: 0.5,
            report_cadence: 0.01,
            stepper: StepperOptions::default(),
            limit_refine: 2,
            hyperviscosity: 0.0,
            energy_tol: 1e-3,
            lemma32_c_max: 50.0,
            snapshot_dir: None,
        }
    }
}

/// Step size and count covering `[0, T]` with equal steps: the kinetic
/// Courant bound `cfl·hx/max|ξ|` and the fluid one taken from the initial
/// state.
pub fn plan_time_step(grid: &PhaseGrid, fluid: &FluidState, t_final: f64, cfl: f64) -> Result<(f64, usize)> {
    if !(t_final >= 0.0) {
        return Err(Error::InvalidArgument(format!("T_final must be nonnegative, got {t_final}")));
    }
    if !(cfl > 0.0 && cfl <= 1.0) {
        return Err(Error::InvalidArgument(format!("cfl must lie in (0, 1], got {cfl}")));
    }
    let vnode = grid.vc()[grid.nv() - 1];
    let dt_kin = cfl * grid.hx() / vnode;
    let mut speed = 0.0f64;
    for i in 0..fluid.rho.len() {
        let c = sound_speed(fluid.rho[i], fluid.gamma);
        speed = speed.max(fluid.m.iter().map(|m| (m[i] / fluid.rho[i]).abs() + c).sum());
    }
    let dt_fl = cfl * grid.hx() / speed;
    let dt0 = dt_kin.min(dt_fl);
    if t_final == 0.0 {
        return Ok((dt0, 0));
    }
    let n = (t_final / dt0).ceil().max(1.0) as usize;
    Ok((t_final / n as f64, n))
}

/// Coupled kinetic–fluid state advanced by the symmetric splitting
/// `½fluid → ½transport → ½exchange → alignment → ½exchange → ½transport → ½fluid`,
/// where the exchange is the exact two-phase drag/field ODE.
pub struct CoupledStepper {
    grid: Arc<PhaseGrid>,
    epsilon: f64,
    pub f: DistF,
    pub fluid: FluidState,
    poisson: PoissonSolver,
    options: StepperOptions,
    ws: RemapWorkspace,
    time: f64,
    steps: usize,
    field_impulse: Vec<f64>,
    alignment_removed: f64,
    last_alignment_removed: f64,
    stats: SubstepStats,
    max_removed_mean: f64,
}

impl CoupledStepper {
    pub fn new(f: DistF, fluid: FluidState, epsilon: f64, options: StepperOptions) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
        }
        let grid = f.grid_arc();
        if fluid.rho.len() != grid.n_cells() {
            return Err(Error::InvalidArgument("fluid and kinetic grids differ".into()));
        }
        let poisson = PoissonSolver::new(&grid);
        let ws = RemapWorkspace::new(&grid);
        let d = grid.dim();
        Ok(Self {
            grid,
            epsilon,
            f,
            fluid,
            poisson,
            options,
            ws,
            time: 0.0,
            steps: 0,
            field_impulse: vec![0.0; d],
            alignment_removed: 0.0,
            last_alignment_removed: 0.0,
            stats: SubstepStats::default(),
            max_removed_mean: 0.0,
        })
    }

    pub fn grid(&self) -> &PhaseGrid {
        &self.grid
    }

    pub fn poisson(&self) -> &PoissonSolver {
        &self.poisson
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// `-Σ ∫ρ_f ∇Φ dt` accumulated so far, per axis.
    pub fn field_impulse(&self) -> &[f64] {
        &self.field_impulse
    }

    /// Kinetic energy removed by alignment so far.
    pub fn alignment_removed(&self) -> f64 {
        self.alignment_removed
    }

    /// Kinetic energy removed by alignment in the last step.
    pub fn last_alignment_removed(&self) -> f64 {
        self.last_alignment_removed
    }

    pub fn stats(&self) -> &SubstepStats {
        &self.stats
    }

    /// Largest `|mean(ρ_f) - 1|` seen by the Poisson solver.
    pub fn max_removed_mean(&self) -> f64 {
        self.max_removed_mean
    }

    pub fn total_momentum(&self) -> Vec<f64> {
        let m = self.fluid.total_momentum(&self.grid);
        let p = self.f.total_momentum();
        m.iter().zip(&p).map(|(a, b)| a + b).collect()
    }

    pub fn step(&mut self, dt: f64) -> Result<()> {
        let half = 0.5 * dt;
        self.fluid = navier_stokes_step(&self.fluid, half, &self.grid, &self.options.fluid)?;
        self.stats.merge(&transport_substep(&mut self.f, half, self.options.transport)?);
        let mom = moments(&self.f);
        let field = self.poisson.solve(&mom.rho_f)?;
        self.max_removed_mean = self.max_removed_mean.max(field.removed_mean.abs());
        self.exchange(&mom, &field.grad_phi, half);
        self.last_alignment_removed = 0.0;
        if self.options.alignment {
            let s = alignment_substep(&mut self.f, dt, self.epsilon, &mut self.ws)?;
            self.alignment_removed += s.energy_removed;
            self.last_alignment_removed = s.energy_removed;
            self.stats.merge(&s);
        }
        // Alignment leaves ρ_f untouched, so the field is still current.
        let mom = moments(&self.f);
        self.exchange(&mom, &field.grad_phi, half);
        self.stats.merge(&transport_substep(&mut self.f, half, self.options.transport)?);
        self.fluid = navier_stokes_step(&self.fluid, half, &self.grid, &self.options.fluid)?;
        self.time += dt;
        self.steps += 1;
        Ok(())
    }

    /// Exact solution over `t` of, per cell with frozen `ρ`, `ρ_f`, `E = ∇Φ`,
    /// `u̇_f = u - u_f - E`, `ρ u̇ = ρ_f (u_f - u)`, applied to the fluid and
    /// as an affine velocity map to the particles.
    fn exchange(&mut self, mom: &Moments, grad_phi: &VectorField, t: f64) {
        let g = &*self.grid;
        let d = g.dim();
        let n = g.n_cells();
        let lambda = (-t).exp();
        let mut target = mom.u_f.clone();
        for i in 0..n {
            if mom.vacuum[i] {
                continue;
            }
            let rf = mom.rho_f[i];
            let r = self.fluid.rho[i];
            let k = 1.0 + rf / r;
            let decay = (-k * t).exp();
            for a in 0..d {
                let e = grad_phi[a][i];
                let u = self.fluid.m[a][i] / r;
                let uf = mom.u_f[a][i];
                let p = r * u + rf * uf - rf * e * t;
                let w = (uf - u) * decay - e / k * (1.0 - decay);
                target[a][i] = (p + r * w) / (r + rf);
                self.fluid.m[a][i] = r * (p - rf * w) / (r + rf);
                self.field_impulse[a] -= rf * e * t * g.cell_volume();
            }
        }
        let s = affine_velocity_substep(&mut self.f, &target, lambda, &mut self.ws);
        self.stats.merge(&s);
    }
}

/// Everything a single coupled run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub epsilon: f64,
    pub dt: f64,
    pub n_steps: usize,
    pub trajectory: Trajectory,
    pub energy_check: EnergyCheck,
    pub final_f: DistF,
    pub final_fluid: FluidState,
    pub final_limit: LimitState,
    pub stats: SubstepStats,
    /// Largest relative drift of particle and fluid mass over the run.
    pub max_mass_drift: f64,
    /// Largest `|ΔP_total - field impulse|` over the run.
    pub momentum_mismatch: f64,
    pub field_impulse: Vec<f64>,
    pub max_removed_mean: f64,
}

/// Integrates the limit system for the given time plan on the refined grid
/// and restricts it to the ε-grid.
pub fn limit_trajectory(profile: &Profile, grid: &PhaseGrid, gamma: f64, opts: &RunOptions, dt: f64, n_steps: usize) -> Result<LimitTrajectory> {
    let refine = opts.limit_refine.max(1);
    let fine = Arc::new(grid.with_nx(grid.nx() * refine)?);
    let solver = LimitSolver::new(Arc::clone(&fine), gamma, opts.hyperviscosity)?;
    let initial = super::limit_initial(profile, &fine)?;
    LimitTrajectory::integrate(&solver, &initial, dt, n_steps, grid.nx())
}

struct Integrands {
    d2: f64,
    exchange_viscous: f64,
    drag_rel: f64,
    visc_rel: f64,
    stress: f64,
}

fn integrands(st: &CoupledStepper, limit: &LimitState) -> Result<(Integrands, EntropyReport)> {
    let g = st.grid();
    let mom = moments(&st.f);
    let u = st.fluid.velocity();
    let d1 = dissipation_d1(&st.f);
    let d2 = dissipation_d2(&st.f, &u);
    let rel = relative_entropy(&mom, &st.fluid, limit, g, st.poisson())?;
    let f = energy_functional(&st.f, &st.fluid, st.poisson())?;
    let report = EntropyReport {
        t: st.time(),
        f,
        d1,
        d2,
        h_rel: rel.h_rel,
        p_rel: rel.p_rel,
        coulomb_rel: rel.coulomb_rel,
        drag_rel: rel.drag_rel,
        visc_rel: rel.visc_rel,
        stress_l1: d1,
        mass_drift: 0.0,
        momentum_drift: 0.0,
    };
    let ints = Integrands { d2, exchange_viscous: d2 - d1, drag_rel: rel.drag_rel, visc_rel: rel.visc_rel, stress: d1 };
    Ok((ints, report))
}

/// Runs the coupled system from `ic` to `opts.t_final`, reporting at the
/// configured cadence (on full-step boundaries) against the limit
/// trajectory. When `limit` is `None` the limit run is integrated here.
pub fn run_coupled(
    ic: &PreparedIc,
    profile: &Profile,
    limit: Option<Arc<LimitTrajectory>>,
    opts: &RunOptions,
) -> Result<RunOutput> {
    let grid = ic.f.grid_arc();
    let (dt, n_steps) = plan_time_step(&grid, &ic.fluid, opts.t_final, opts.cfl)?;
    let limit = match limit {
        Some(l) => {
            if l.states.len() < n_steps + 1 || (l.dt - dt).abs() > 1e-14 * dt {
                return Err(Error::InvalidArgument("shared limit trajectory does not match the time plan".into()));
            }
            l
        }
        None => Arc::new(limit_trajectory(profile, &grid, ic.fluid.gamma, opts, dt, n_steps)?),
    };
    let mut st = CoupledStepper::new(ic.f.clone(), ic.fluid.clone(), ic.epsilon, opts.stepper)?;
    let mass_f0 = st.f.total_mass();
    let mass_fl0 = st.fluid.total_mass(&grid);
    let p0 = st.total_momentum();
    let cadence = if opts.report_cadence > 0.0 { ((opts.report_cadence / dt).round() as usize).max(1) } else { usize::MAX };

    let mut reports = Vec::new();
    let mut budgets = Vec::new();
    let mut budget = DissipationBudget::default();
    let (mut prev, first) = integrands(&st, limit.at_step(0))?;
    reports.push(first);
    budgets.push(budget);
    let snapshot = |st: &CoupledStepper, k: usize| -> Result<()> {
        if let Some(dir) = &opts.snapshot_dir {
            st.f.write_snapshot(&dir.join(format!("f_{k}.bin")))?;
        }
        Ok(())
    };
    snapshot(&st, 0)?;
    let mut max_mass_drift = 0.0f64;
    let mut mismatch = 0.0f64;
    for k in 1..=n_steps {
        st.step(dt)?;
        let (cur, mut report) = integrands(&st, limit.at_step(k))?;
        let h = 0.5 * dt;
        budget.alignment += st.last_alignment_removed();
        budget.d2 += h * (prev.d2 + cur.d2);
        budget.exchange_viscous += h * (prev.exchange_viscous + cur.exchange_viscous);
        budget.drag_rel += h * (prev.drag_rel + cur.drag_rel);
        budget.visc_rel += h * (prev.visc_rel + cur.visc_rel);
        budget.stress += h * (prev.stress + cur.stress);
        prev = cur;

        let drift_f = (st.f.total_mass() - mass_f0).abs() / mass_f0;
        let drift_fl = (st.fluid.total_mass(&grid) - mass_fl0).abs() / mass_fl0;
        let mass_drift = drift_f.max(drift_fl);
        max_mass_drift = max_mass_drift.max(mass_drift);
        let p = st.total_momentum();
        let momentum_drift = p
            .iter()
            .zip(&p0)
            .zip(st.field_impulse())
            .map(|((p, p0), imp)| (p - p0 - imp).abs())
            .fold(0.0, f64::max);
        mismatch = mismatch.max(momentum_drift);
        if k % cadence == 0 || k == n_steps {
            report.mass_drift = mass_drift;
            report.momentum_drift = momentum_drift;
            reports.push(report);
            budgets.push(budget);
            snapshot(&st, k)?;
        }
    }
    let trajectory = Trajectory { epsilon: ic.epsilon, reports, budgets };
    let energy_check = check_energy_inequality(&trajectory, opts.energy_tol, opts.lemma32_c_max);
    Ok(RunOutput {
        epsilon: ic.epsilon,
        dt,
        n_steps,
        trajectory,
        energy_check,
        final_limit: limit.at_step(n_steps).clone(),
        stats: *st.stats(),
        max_mass_drift,
        momentum_mismatch: mismatch,
        field_impulse: st.field_impulse().to_vec(),
        max_removed_mean: st.max_removed_mean(),
        final_f: st.f,
        final_fluid: st.fluid,
    })
}
