//! ε-sweep against one shared limit run, rate fits and convergence metrics.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::entropy::{dissipation_d1, EnergyCheck};
use crate::error::{Error, Result};
use crate::fluid::FluidState;
use crate::grid::PhaseGrid;
use crate::kinetic::{moments, speed_squared, DistF};
use crate::limit::LimitState;
use crate::poisson::PoissonSolver;

use super::stepper::limit_trajectory;
use super::{plan_time_step, run_coupled, well_prepared_ic, Certificate, Profile, RunOptions, RunOutput, ThetaRule};

/// Least-squares line through `(ln x, ln y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn loglog_fit(x: &[f64], y: &[f64]) -> Result<LogLogFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidArgument("log-log fit needs at least two paired points".into()));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument("log-log fit needs positive finite values".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = ly.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("log-log fit needs distinct abscissae".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = lx.iter().zip(&ly).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Ok(LogLogFit { slope, intercept, r2 })
}

/// Distances between an ε-state and the limit state at the same time.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceMetrics {
    pub rho_l1: f64,
    pub rho_lgamma: f64,
    /// `∫|∇K*(ρ_f^ε - ρ_f)|²`.
    pub rho_f_coulomb: f64,
    /// `‖ρ^ε u^ε - ρ u‖_{L¹}`.
    pub momentum_l1: f64,
    /// `∫∫|ξ - u_f^ε|² f^ε`.
    pub stress: f64,
    /// `∫∫|ξ - u_f|² f^ε` against the limit velocity.
    pub concentration: f64,
}

pub fn convergence_metrics(
    f: &DistF,
    fluid: &FluidState,
    limit: &LimitState,
    grid: &PhaseGrid,
    poisson: &PoissonSolver,
) -> Result<ConvergenceMetrics> {
    let n = grid.n_cells();
    let d = grid.dim();
    let gamma = fluid.gamma;
    let diff: Vec<f64> = (0..n).map(|i| (fluid.rho[i] - limit.rho[i]).abs()).collect();
    let rho_l1 = grid.space_integral(&diff);
    let rho_lgamma = grid.space_integral(&diff.iter().map(|v| v.powf(gamma)).collect::<Vec<_>>()).powf(1.0 / gamma);
    let mom_diff: Vec<f64> = (0..n)
        .map(|i| (0..d).map(|a| (fluid.m[a][i] - limit.m[a][i]).powi(2)).sum::<f64>().sqrt())
        .collect();
    let mom = moments(f);
    let uf = limit.u_f();
    let speed2 = speed_squared(grid);
    let w = grid.velocity_weight();
    let mut conc = 0.0;
    for cell in 0..n {
        let values = f.cell(cell);
        let mut s = 0.0;
        for (j, &v) in values.iter().enumerate() {
            let dot: f64 = (0..d).map(|a| grid.v(j, a) * uf[a][cell]).sum();
            let u2: f64 = (0..d).map(|a| uf[a][cell].powi(2)).sum();
            s += v * (speed2[j] - 2.0 * dot + u2);
        }
        conc += s.max(0.0) * w;
    }
    Ok(ConvergenceMetrics {
        rho_l1,
        rho_lgamma,
        rho_f_coulomb: poisson.coulomb_distance(&mom.rho_f, &limit.rho_f, grid.cell_volume())?,
        momentum_l1: grid.space_integral(&mom_diff),
        stress: dissipation_d1(f),
        concentration: conc * grid.cell_volume(),
    })
}

/// Outcome of an ε-sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub epsilons: Vec<f64>,
    /// `H_rel + coulomb_rel + ∫drag_rel + ∫visc_rel` at `T`.
    pub h_final: Vec<f64>,
    /// `H_rel + coulomb_rel` at `T`.
    pub h_rel_coulomb: Vec<f64>,
    /// `∫₀ᵀ∫∫|ξ - u_f^ε|² f^ε`.
    pub stress_int: Vec<f64>,
    pub stress_initial: Vec<f64>,
    pub stress_final: Vec<f64>,
    pub slope_h: f64,
    pub r2_h: f64,
    pub slope_stress: f64,
    pub r2_stress: f64,
    /// `max H_final/√ε`.
    pub fitted_c: f64,
    /// `max stress_int/ε`.
    pub fitted_c_stress: f64,
    /// Slope of the ε-dependent certificate term (thermal excess).
    pub slope_certificate: f64,
    pub certificates: Vec<Certificate>,
    pub energy_checks: Vec<EnergyCheck>,
    pub metrics: Vec<ConvergenceMetrics>,
    pub max_mass_drift: Vec<f64>,
    pub momentum_mismatch: Vec<f64>,
    pub fallback_cells: Vec<usize>,
    pub flags: SweepFlags,
}

/// Pass/fail of the sweep-level acceptance properties.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepFlags {
    pub rate_slope: bool,
    pub rate_r2: bool,
    pub stress_slope: bool,
    pub h_monotone: bool,
    pub concentration_monotone: bool,
    pub concentration_small: bool,
    pub energy_inequality: bool,
    pub lemma32: bool,
}

impl SweepFlags {
    pub fn all(&self) -> bool {
        self.rate_slope
            && self.rate_r2
            && self.stress_slope
            && self.h_monotone
            && self.concentration_monotone
            && self.concentration_small
            && self.energy_inequality
            && self.lemma32
    }
}

/// Settings shared by every run of a sweep.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub grid: Arc<PhaseGrid>,
    pub gamma: f64,
    pub theta_rule: ThetaRule,
    pub run: RunOptions,
    /// Worker threads for independent ε-runs; 0 or 1 runs them in order.
    pub threads: usize,
    /// Where `entropy_<eps>.csv` and `sweep_summary.json` go.
    pub output_dir: Option<PathBuf>,
}

/// Counts adjacent increases larger than 5% along a sequence.
fn inversions(values: &[f64]) -> usize {
    values.windows(2).filter(|w| w[1] > 1.05 * w[0]).count()
}

pub fn csv_name(epsilon: f64) -> String {
    format!("entropy_{epsilon:e}.csv")
}

fn validate_epsilons(epsilons: &[f64]) -> Result<Vec<f64>> {
    if epsilons.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
        return Err(Error::InvalidArgument("every epsilon must be positive".into()));
    }
    let mut sorted = epsilons.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidArgument("duplicate epsilon values".into()));
    }
    if sorted.len() < 3 {
        return Err(Error::InvalidArgument(format!("need ≥3 distinct ε, got {}", sorted.len())));
    }
    Ok(sorted)
}

/// Runs every ε against one shared limit trajectory and fits the rates.
/// Completed runs are written out even when a later run fails.
pub fn eps_sweep(profile: &Profile, epsilons: &[f64], cfg: &SweepConfig) -> Result<SweepResult> {
    let eps = validate_epsilons(epsilons)?;
    let grid = Arc::clone(&cfg.grid);
    let base = profile.sample(&grid)?;
    let ics = eps
        .iter()
        .map(|&e| well_prepared_ic(&base, e, Arc::clone(&grid), cfg.gamma, cfg.theta_rule))
        .collect::<Result<Vec<_>>>()?;
    let (dt, n_steps) = plan_time_step(&grid, &ics[0].fluid, cfg.run.t_final, cfg.run.cfl)?;
    let limit = Arc::new(limit_trajectory(profile, &grid, cfg.gamma, &cfg.run, dt, n_steps)?);

    let job = |ic: &super::PreparedIc| run_coupled(ic, profile, Some(Arc::clone(&limit)), &cfg.run);
    let results: Vec<Result<RunOutput>> = if cfg.threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
        pool.install(|| ics.par_iter().map(job).collect())
    } else {
        ics.iter().map(job).collect()
    };

    let mut outputs = Vec::with_capacity(results.len());
    let mut failure = None;
    for (e, r) in eps.iter().zip(results) {
        match r {
            Ok(o) => outputs.push(o),
            Err(err) => {
                failure.get_or_insert(Error::SweepAborted { epsilon: *e, source: Box::new(err) });
            }
        }
    }
    if let Some(dir) = &cfg.output_dir {
        std::fs::create_dir_all(dir)?;
        for o in &outputs {
            o.trajectory.write_csv(&dir.join(csv_name(o.epsilon)))?;
        }
    }
    if let Some(err) = failure {
        if let Some(dir) = &cfg.output_dir {
            let done: Vec<f64> = outputs.iter().map(|o| o.epsilon).collect();
            let partial = serde_json::json!({ "aborted": true, "completed_epsilons": done, "error": err.to_string() });
            std::fs::write(dir.join("sweep_summary.json"), serde_json::to_string_pretty(&partial)?)?;
        }
        return Err(err);
    }

    let result = summarize(&eps, &ics, &outputs, &grid)?;
    if let Some(dir) = &cfg.output_dir {
        write_summary(&dir.join("sweep_summary.json"), &result)?;
    }
    Ok(result)
}

fn summarize(eps: &[f64], ics: &[super::PreparedIc], outputs: &[RunOutput], grid: &PhaseGrid) -> Result<SweepResult> {
    let poisson = PoissonSolver::new(grid);
    let mut h_final = Vec::new();
    let mut h_rel_coulomb = Vec::new();
    let mut stress_int = Vec::new();
    let mut stress_initial = Vec::new();
    let mut stress_final = Vec::new();
    let mut metrics = Vec::new();
    for o in outputs {
        let last = o.trajectory.reports.last().unwrap();
        let budget = o.trajectory.budgets.last().copied().unwrap_or_default();
        h_rel_coulomb.push(last.h_rel + last.coulomb_rel);
        h_final.push(last.h_rel + last.coulomb_rel + budget.drag_rel + budget.visc_rel);
        stress_int.push(budget.stress);
        stress_initial.push(o.trajectory.reports[0].stress_l1);
        stress_final.push(last.stress_l1);
        metrics.push(convergence_metrics(&o.final_f, &o.final_fluid, &o.final_limit, grid, &poisson)?);
    }
    let fit_h = loglog_fit(eps, &h_final)?;
    let fit_s = loglog_fit(eps, &stress_int)?;
    let excess: Vec<f64> = ics.iter().map(|ic| ic.certificate.excess).collect();
    let slope_certificate = loglog_fit(eps, &excess).map(|f| f.slope).unwrap_or(f64::NAN);
    let fitted_c = eps.iter().zip(&h_final).map(|(e, h)| h / e.sqrt()).fold(0.0, f64::max);
    let fitted_c_stress = eps.iter().zip(&stress_int).map(|(e, s)| s / e).fold(0.0, f64::max);
    let energy_checks: Vec<EnergyCheck> = outputs.iter().map(|o| o.energy_check).collect();
    let k = eps.len() - 1;
    let flags = SweepFlags {
        rate_slope: fit_h.slope >= 0.4,
        rate_r2: fit_h.r2 >= 0.9,
        stress_slope: fit_s.slope >= 0.8,
        h_monotone: inversions(&h_final) == 0,
        concentration_monotone: inversions(&stress_final) == 0,
        concentration_small: stress_final[k] < 10.0 * stress_initial[k],
        energy_inequality: energy_checks.iter().all(|c| c.passed),
        lemma32: energy_checks.iter().all(|c| c.lemma32_passed),
    };
    Ok(SweepResult {
        epsilons: eps.to_vec(),
        h_final,
        h_rel_coulomb,
        stress_int,
        stress_initial,
        stress_final,
        slope_h: fit_h.slope,
        r2_h: fit_h.r2,
        slope_stress: fit_s.slope,
        r2_stress: fit_s.r2,
        fitted_c,
        fitted_c_stress,
        slope_certificate,
        certificates: ics.iter().map(|ic| ic.certificate).collect(),
        energy_checks,
        metrics,
        max_mass_drift: outputs.iter().map(|o| o.max_mass_drift).collect(),
        momentum_mismatch: outputs.iter().map(|o| o.momentum_mismatch).collect(),
        fallback_cells: outputs.iter().map(|o| o.stats.fallback_cells).collect(),
        flags,
    })
}

pub fn write_summary(path: &Path, result: &SweepResult) -> Result<()> {
    let mut value = serde_json::to_value(result)?;
    value["passed"] = serde_json::Value::Bool(result.flags.all());
    std::fs::write(path, serde_json::to_string_pretty(&value)?)?;
    Ok(())
}
