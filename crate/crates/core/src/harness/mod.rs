//! Well-prepared initial data, the coupled ε-stepper, and the ε-sweep.

mod stepper;
mod sweep;

use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

pub use stepper::{plan_time_step, run_coupled, CoupledStepper, RunOptions, RunOutput, StepperOptions};
pub use stepper::limit_trajectory;
pub use sweep::{
    convergence_metrics, csv_name, eps_sweep, loglog_fit, write_summary, ConvergenceMetrics, LogLogFit, SweepConfig, SweepFlags,
    SweepResult,
};

use crate::error::{Error, Result};
use crate::fluid::FluidState;
use crate::grid::{Field, PhaseGrid, VectorField};
use crate::kinetic::{deposit_point, match_moments, moments, DistF, RemapWorkspace};
use crate::limit::LimitState;
use crate::poisson::{spectral_resample, PoissonSolver};

/// Tail mass beyond `Vmax/2` tolerated in the initial distribution,
/// relative to the total mass.
pub const SUPPORT_TAIL_TOL: f64 = 1e-12;

/// Temperature of the initial Maxwellian as a function of ε.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ThetaRule {
    /// `θ = √ε`.
    #[default]
    Sqrt,
    /// `θ = ε`.
    Linear,
}

impl ThetaRule {
    pub fn theta(self, epsilon: f64) -> f64 {
        match self {
            Self::Sqrt => epsilon.sqrt(),
            Self::Linear => epsilon,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Sqrt => "sqrt",
            Self::Linear => "linear",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "sqrt" => Some(Self::Sqrt),
            "linear" => Some(Self::Linear),
            _ => None,
        }
    }
}

/// Amplitudes of the canonical smooth profile
/// `ρ_f0 = 1 + a_ρf sin`, `u_f0 = a_uf cos`, `ρ0 = 1 + a_ρ cos`, `u0 = a_u sin`
/// (one period per axis, averaged over axes when `d > 1`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Amplitudes {
    pub rho_f: f64,
    pub u_f: f64,
    pub rho: f64,
    pub u: f64,
}

impl Default for Amplitudes {
    fn default() -> Self {
        Self { rho_f: 0.2, u_f: 0.2, rho: 0.2, u: 0.1 }
    }
}

/// Base profiles `(ρ_f0, u_f0, ρ0, u0)` sampled on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseFields {
    pub rho_f0: Field,
    pub u_f0: VectorField,
    pub rho0: Field,
    pub u0: VectorField,
}

/// Source of the base profiles.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    Canonical(Amplitudes),
    /// Values on a 1-D table of `n` cell centres, Fourier-interpolated.
    Table(BaseFields),
}

impl Default for Profile {
    fn default() -> Self {
        Self::Canonical(Amplitudes::default())
    }
}

impl Profile {
    pub fn sample(&self, grid: &PhaseGrid) -> Result<BaseFields> {
        let d = grid.dim();
        let n = grid.n_cells();
        match self {
            Self::Canonical(a) => {
                let k = 2.0 * PI / grid.length();
                let avg = |cell: usize, f: &dyn Fn(f64) -> f64| -> f64 {
                    (0..d).map(|ax| f(k * grid.x(cell, ax))).sum::<f64>() / d as f64
                };
                let rho_f0 = (0..n).map(|c| 1.0 + a.rho_f * avg(c, &f64::sin)).collect();
                let rho0 = (0..n).map(|c| 1.0 + a.rho * avg(c, &f64::cos)).collect();
                let u_f0 = (0..d).map(|ax| (0..n).map(|c| a.u_f * (k * grid.x(c, ax)).cos()).collect()).collect();
                let u0 = (0..d).map(|ax| (0..n).map(|c| a.u * (k * grid.x(c, ax)).sin()).collect()).collect();
                Ok(BaseFields { rho_f0, u_f0, rho0, u0 })
            }
            Self::Table(t) => {
                if d != 1 {
                    return Err(Error::InvalidArgument("tabulated profiles are one-dimensional".into()));
                }
                let m = t.rho0.len();
                let r = |v: &[f64]| spectral_resample(v, 1, m, grid.nx());
                Ok(BaseFields {
                    rho_f0: r(&t.rho_f0),
                    u_f0: vec![r(&t.u_f0[0])],
                    rho0: r(&t.rho0),
                    u0: vec![r(&t.u0[0])],
                })
            }
        }
    }

    /// Reads a CSV with header `x,rho_f,u_f,rho,u`, one row per cell centre.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().unwrap_or("");
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols != ["x", "rho_f", "u_f", "rho", "u"] {
            return Err(Error::InvalidArgument(format!(
                "{}: expected header x,rho_f,u_f,rho,u",
                path.display()
            )));
        }
        let mut t = BaseFields { rho_f0: vec![], u_f0: vec![vec![]], rho0: vec![], u0: vec![vec![]] };
        for (k, line) in lines.enumerate() {
            let v: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::InvalidArgument(format!("{} row {}: {e}", path.display(), k + 2)))?;
            if v.len() != 5 {
                return Err(Error::InvalidArgument(format!("{} row {}: expected 5 values", path.display(), k + 2)));
            }
            t.rho_f0.push(v[1]);
            t.u_f0[0].push(v[2]);
            t.rho0.push(v[3]);
            t.u0[0].push(v[4]);
        }
        if t.rho0.len() < 4 {
            return Err(Error::InvalidArgument(format!("{}: need at least 4 rows", path.display())));
        }
        Ok(Self::Table(t))
    }
}

/// Left-hand sides of the preparation assumptions for one ε.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// Total energy `F` of the ε-data.
    pub energy: f64,
    /// `∫H(U₀^ε|U₀)`.
    pub relative_entropy: f64,
    /// `F - ½∫|∇K*(ρ_f0-1)|² - ∫H(U₀)`.
    pub excess: f64,
    /// `(d/2)·θ·∫ρ_f0`, the thermal energy the excess should equal.
    pub thermal: f64,
    pub theta: f64,
}

/// Initial ε-state with its limit counterpart and certificate.
#[derive(Debug, Clone)]
pub struct PreparedIc {
    pub epsilon: f64,
    pub f: DistF,
    pub fluid: FluidState,
    /// Limit data on the ε-grid.
    pub limit: LimitState,
    pub certificate: Certificate,
}

/// `f₀^ε = ρ_f0·Gaussian(ξ; u_f0, θ)`, tilted on the node set so that its
/// discrete mass, mean and per-axis variance are exactly `ρ_f0`, `u_f0` and
/// `θ`; the fluid starts at `(ρ0, ρ0 u0)`.
pub fn well_prepared_ic(
    base: &BaseFields,
    epsilon: f64,
    grid: Arc<PhaseGrid>,
    gamma: f64,
    theta_rule: ThetaRule,
) -> Result<PreparedIc> {
    if !(epsilon > 0.0) {
        return Err(Error::InitialData(format!("epsilon must be positive, got {epsilon}")));
    }
    let g = &*grid;
    let d = g.dim();
    let n = g.n_cells();
    let theta = theta_rule.theta(epsilon);
    let mean_rho_f = base.rho_f0.iter().sum::<f64>() / n as f64;
    if (mean_rho_f - 1.0).abs() > 1e-10 {
        return Err(Error::InitialData(format!("neutrality violated: mean rho_f0 = {mean_rho_f}")));
    }
    if let Some(c) = base.rho_f0.iter().position(|r| !(*r >= 0.0)) {
        return Err(Error::InitialData(format!("rho_f0 negative in cell {c}")));
    }
    if let Some(c) = base.rho0.iter().position(|r| !(*r > 0.0)) {
        return Err(Error::InitialData(format!("rho0 not positive in cell {c}")));
    }
    let half = 0.5 * g.vmax();
    let sigma = theta.sqrt();
    let mut tail = 0.0;
    for c in 0..n {
        for a in 0..d {
            let u = base.u_f0[a][c];
            if u.abs() >= half {
                return Err(Error::InitialData(format!(
                    "support margin violated: |u_f0| = {} reaches Vmax/2 in cell {c}",
                    u.abs()
                )));
            }
            let s = std::f64::consts::SQRT_2 * sigma;
            tail += base.rho_f0[c] * 0.5 * (erfc((half - u) / s) + erfc((half + u) / s));
        }
    }
    let total = base.rho_f0.iter().sum::<f64>();
    if tail / total >= SUPPORT_TAIL_TOL {
        return Err(Error::InitialData(format!(
            "support margin violated: Gaussian tail mass beyond Vmax/2 is {:.3e} of the total (limit {SUPPORT_TAIL_TOL:e})",
            tail / total
        )));
    }

    let w = g.velocity_weight();
    let mut ws = RemapWorkspace::new(g);
    let mut data = vec![0.0; n * g.n_vel()];
    let mut cell_vals = vec![0.0; g.n_vel()];
    for c in 0..n {
        let sum = base.rho_f0[c] / w;
        if sum == 0.0 {
            continue;
        }
        let mut mean = [0.0; 3];
        let mut var = [0.0; 3];
        for a in 0..d {
            mean[a] = base.u_f0[a][c];
            var[a] = theta;
        }
        for (j, v) in cell_vals.iter_mut().enumerate() {
            let e: f64 = (0..d).map(|a| (g.v(j, a) - mean[a]).powi(2)).sum();
            *v = (-e / (2.0 * theta)).exp();
        }
        let s: f64 = cell_vals.iter().sum();
        let ok = s > 0.0 && {
            cell_vals.iter_mut().for_each(|v| *v *= sum / s);
            match_moments(g, &mut cell_vals, sum, &mean, &var, &mut ws)
        };
        if !ok {
            // Too narrow for the velocity mesh: the best available
            // representation is the two-node split of a point mass.
            deposit_point(g, &mut cell_vals, sum, &mean);
        }
        data[c * g.n_vel()..(c + 1) * g.n_vel()].copy_from_slice(&cell_vals);
    }
    let f = DistF::from_data(Arc::clone(&grid), data)?;
    let fluid = FluidState::from_velocity(base.rho0.clone(), &base.u0, gamma)?;
    let limit = LimitState::from_velocities(base.rho_f0.clone(), &base.u_f0, base.rho0.clone(), &base.u0)?;
    let certificate = certify(&f, &fluid, &limit, theta)?;
    Ok(PreparedIc { epsilon, f, fluid, limit, certificate })
}

fn certify(f: &DistF, fluid: &FluidState, limit: &LimitState, theta: f64) -> Result<Certificate> {
    let g = f.grid();
    let poisson = PoissonSolver::new(g);
    let energy = crate::entropy::energy_functional(f, fluid, &poisson)?;
    let mom = moments(f);
    let rel = crate::entropy::relative_entropy(&mom, fluid, limit, g, &poisson)?;
    let coulomb = poisson.coulomb_energy(&limit.rho_f, g.cell_volume())?;
    let limit_energy = limit.energy(g, &poisson, fluid.gamma)? - coulomb;
    let thermal = 0.5 * g.dim() as f64 * theta * g.space_integral(&limit.rho_f);
    Ok(Certificate {
        energy,
        relative_entropy: rel.h_rel,
        excess: energy - coulomb - limit_energy,
        thermal,
        theta,
    })
}

/// Limit initial data sampled directly on `grid`.
pub fn limit_initial(profile: &Profile, grid: &PhaseGrid) -> Result<LimitState> {
    let b = profile.sample(grid)?;
    LimitState::from_velocities(b.rho_f0, &b.u_f0, b.rho0, &b.u0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Arc<PhaseGrid> {
        Arc::new(PhaseGrid::new(1, 1.0, 32, 9.0, 128).unwrap())
    }

    #[test]
    fn identical_placements_have_zero_relative_entropy() {
        let g = grid();
        let base = Profile::Canonical(Amplitudes { rho_f: 0.0, u_f: 0.1, rho: 0.0, u: 0.0 }).sample(&g).unwrap();
        let mut base = base;
        base.u0 = base.u_f0.clone();
        let ic = well_prepared_ic(&base, 1e-2, g, 2.0, ThetaRule::Sqrt).unwrap();
        assert!(ic.certificate.relative_entropy.abs() < 1e-20);
    }

    #[test]
    fn excess_is_thermal_energy() {
        let g = grid();
        let base = Profile::Canonical(Amplitudes { rho_f: 0.0, ..Default::default() }).sample(&g).unwrap();
        for eps in [1e-1, 1e-2, 1e-3] {
            let ic = well_prepared_ic(&base, eps, g.clone(), 2.0, ThetaRule::Sqrt).unwrap();
            let c = ic.certificate;
            assert!((c.thermal - 0.5 * eps.sqrt()).abs() < 1e-14);
            assert!((c.excess - c.thermal).abs() < 1e-10, "{c:?}");
        }
    }

    #[test]
    fn neutrality_and_margin_are_enforced() {
        let g = grid();
        let mut base = Profile::default().sample(&g).unwrap();
        base.rho_f0.iter_mut().for_each(|r| *r *= 1.1);
        assert!(matches!(well_prepared_ic(&base, 1e-2, g.clone(), 2.0, ThetaRule::Sqrt), Err(Error::InitialData(_))));
        let base = Profile::default().sample(&g).unwrap();
        // θ = √0.5 puts far too much mass beyond Vmax/2 = 3.
        assert!(matches!(well_prepared_ic(&base, 0.5, g, 2.0, ThetaRule::Sqrt), Err(Error::InitialData(_))));
    }
}
