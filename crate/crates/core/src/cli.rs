//! Flat `key = value` configuration and the `entrolimit` command line.
//!
//! ```text
//! entrolimit <run|limit|sweep|check> --config <path> [--set key=value]...
//! ```
//!
//! Exit codes: 0 on success with every enabled check passing, 1 when a
//! check fails, 2 on configuration or usage errors.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::entropy::check_energy_inequality;
use crate::error::{Error, Result};
use crate::fluid::{write_fluid_csv, FluidOptions, ViscousScheme};
use crate::grid::PhaseGrid;
use crate::harness::{
    csv_name, eps_sweep, limit_trajectory, plan_time_step, run_coupled, well_prepared_ic, Amplitudes, Profile,
    RunOptions, StepperOptions, SweepConfig, ThetaRule,
};
use crate::kinetic::{moments, write_moments_csv, TransportScheme};
use crate::limit::write_limit_csv;

/// Environment variable capping the number of worker threads (0 = serial).
pub const THREADS_ENV: &str = "ENTROLIMIT_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Run,
    Limit,
    Sweep,
    Check,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Self::Run => "run",
            Self::Limit => "limit",
            Self::Sweep => "sweep",
            Self::Check => "check",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "run" => Some(Self::Run),
            "limit" => Some(Self::Limit),
            "sweep" => Some(Self::Sweep),
            "check" => Some(Self::Check),
            _ => None,
        }
    }
}

/// Fully validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub dim: usize,
    pub length: f64,
    pub nx: usize,
    pub vmax: f64,
    pub nv: usize,
    pub gamma: f64,
    pub epsilon: f64,
    pub epsilons: Vec<f64>,
    pub profile: String,
    pub amplitudes: Amplitudes,
    pub ic_file: Option<PathBuf>,
    pub t_final: f64,
    pub cfl: f64,
    pub report_cadence: f64,
    pub transport: TransportScheme,
    pub viscous: ViscousScheme,
    pub theta_rule: ThetaRule,
    pub hyperviscosity: f64,
    pub limit_refine: usize,
    pub energy_tol: f64,
    pub lemma32_c_max: f64,
    pub poincare_cbar: f64,
    pub inject_energy_fault: bool,
    pub output_dir: PathBuf,
    pub snapshots: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Run,
            dim: 1,
            length: 1.0,
            nx: 128,
            vmax: 6.0,
            nv: 128,
            gamma: 2.0,
            epsilon: 1e-2,
            epsilons: vec![1e-1, 1e-2, 1e-3, 1e-4],
            profile: "canonical".into(),
            amplitudes: Amplitudes::default(),
            ic_file: None,
            t_final: 0.5,
            cfl: 0.5,
            report_cadence: 0.01,
            transport: TransportScheme::FiniteVolume,
            viscous: ViscousScheme::Implicit,
            theta_rule: ThetaRule::Sqrt,
            hyperviscosity: 0.0,
            limit_refine: 2,
            energy_tol: 1e-3,
            lemma32_c_max: 50.0,
            poincare_cbar: 10.0,
            inject_energy_fault: false,
            output_dir: PathBuf::from("out"),
            snapshots: false,
        }
    }
}

fn cfg_err(line: usize, message: impl Into<String>) -> Error {
    Error::Config { line, message: message.into() }
}

fn parse_num<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| cfg_err(line, format!("{key}: cannot parse '{value}': {e}")))
}

fn parse_bool(line: usize, key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(cfg_err(line, format!("{key}: expected true or false, got '{value}'"))),
    }
}

impl RunConfig {
    /// Applies one `key = value` entry.
    pub fn set(&mut self, key: &str, value: &str, line: usize) -> Result<()> {
        match key {
            "mode" => self.mode = Mode::parse(value).ok_or_else(|| cfg_err(line, format!("unknown mode '{value}'")))?,
            "dim" => self.dim = parse_num(line, key, value)?,
            "L" => self.length = parse_num(line, key, value)?,
            "Nx" => self.nx = parse_num(line, key, value)?,
            "Vmax" => self.vmax = parse_num(line, key, value)?,
            "Nv" => self.nv = parse_num(line, key, value)?,
            "gamma" => self.gamma = parse_num(line, key, value)?,
            "epsilon" => self.epsilon = parse_num(line, key, value)?,
            "epsilons" => {
                self.epsilons = value
                    .split(',')
                    .map(|s| parse_num::<f64>(line, key, s.trim()))
                    .collect::<Result<_>>()?
            }
            "profile" => self.profile = value.to_string(),
            "amp_rho_f" => self.amplitudes.rho_f = parse_num(line, key, value)?,
            "amp_u_f" => self.amplitudes.u_f = parse_num(line, key, value)?,
            "amp_rho" => self.amplitudes.rho = parse_num(line, key, value)?,
            "amp_u" => self.amplitudes.u = parse_num(line, key, value)?,
            "ic_file" => self.ic_file = if value.is_empty() { None } else { Some(PathBuf::from(value)) },
            "T_final" => self.t_final = parse_num(line, key, value)?,
            "cfl_number" | "cfl" => self.cfl = parse_num(line, key, value)?,
            "report_cadence" => self.report_cadence = parse_num(line, key, value)?,
            "transport_scheme" => {
                self.transport = TransportScheme::parse(value)
                    .ok_or_else(|| cfg_err(line, format!("transport_scheme must be fv or sl, got '{value}'")))?
            }
            "viscous_scheme" => {
                self.viscous = ViscousScheme::parse(value)
                    .ok_or_else(|| cfg_err(line, format!("viscous_scheme must be implicit or explicit, got '{value}'")))?
            }
            "theta_rule" => {
                self.theta_rule = ThetaRule::parse(value)
                    .ok_or_else(|| cfg_err(line, format!("theta_rule must be sqrt or linear, got '{value}'")))?
            }
            "hyperviscosity" => self.hyperviscosity = parse_num(line, key, value)?,
            "limit_refine" => self.limit_refine = parse_num(line, key, value)?,
            "energy_tol" => self.energy_tol = parse_num(line, key, value)?,
            "lemma32_c_max" => self.lemma32_c_max = parse_num(line, key, value)?,
            "poincare_cbar" => self.poincare_cbar = parse_num(line, key, value)?,
            "inject_energy_fault" => self.inject_energy_fault = parse_bool(line, key, value)?,
            "output.dir" => self.output_dir = PathBuf::from(value),
            "output.snapshots" => self.snapshots = parse_bool(line, key, value)?,
            _ => return Err(cfg_err(line, format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Checks cross-field constraints; `line` is attached to any error.
    pub fn validate(&self, line: usize) -> Result<()> {
        if !(self.gamma > 1.5) {
            return Err(cfg_err(
                line,
                format!("gamma = {} is not allowed: the convergence theorem requires gamma > 3/2", self.gamma),
            ));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(cfg_err(line, format!("cfl_number must lie in (0, 1], got {}", self.cfl)));
        }
        if !(self.t_final >= 0.0) {
            return Err(cfg_err(line, format!("T_final must be nonnegative, got {}", self.t_final)));
        }
        if !(self.epsilon > 0.0) || self.epsilons.iter().any(|e| !(*e > 0.0)) {
            return Err(cfg_err(line, "epsilon values must be positive"));
        }
        if self.profile != "canonical" {
            return Err(cfg_err(line, format!("unknown profile '{}'", self.profile)));
        }
        if self.limit_refine == 0 {
            return Err(cfg_err(line, "limit_refine must be at least 1"));
        }
        if !(self.report_cadence >= 0.0) || !(self.hyperviscosity >= 0.0) || !(self.energy_tol >= 0.0) {
            return Err(cfg_err(line, "report_cadence, hyperviscosity and energy_tol must be nonnegative"));
        }
        PhaseGrid::new(self.dim, self.length, self.nx, self.vmax, self.nv).map_err(|e| cfg_err(line, e.to_string()))?;
        Ok(())
    }

    /// Effective configuration in the input format; parses back to `self`.
    pub fn echo(&self) -> String {
        let list = |v: &[f64]| v.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(",");
        let mut lines = vec![
            format!("mode = {}", self.mode.name()),
            format!("dim = {}", self.dim),
            format!("L = {}", self.length),
            format!("Nx = {}", self.nx),
            format!("Vmax = {}", self.vmax),
            format!("Nv = {}", self.nv),
            format!("gamma = {}", self.gamma),
            format!("epsilon = {}", self.epsilon),
            format!("epsilons = {}", list(&self.epsilons)),
            format!("profile = {}", self.profile),
            format!("amp_rho_f = {}", self.amplitudes.rho_f),
            format!("amp_u_f = {}", self.amplitudes.u_f),
            format!("amp_rho = {}", self.amplitudes.rho),
            format!("amp_u = {}", self.amplitudes.u),
        ];
        if let Some(p) = &self.ic_file {
            lines.push(format!("ic_file = {}", p.display()));
        }
        lines.extend([
            format!("T_final = {}", self.t_final),
            format!("cfl_number = {}", self.cfl),
            format!("report_cadence = {}", self.report_cadence),
            format!("transport_scheme = {}", self.transport.name()),
            format!("viscous_scheme = {}", self.viscous.name()),
            format!("theta_rule = {}", self.theta_rule.name()),
            format!("hyperviscosity = {}", self.hyperviscosity),
            format!("limit_refine = {}", self.limit_refine),
            format!("energy_tol = {}", self.energy_tol),
            format!("lemma32_c_max = {}", self.lemma32_c_max),
            format!("poincare_cbar = {}", self.poincare_cbar),
            format!("inject_energy_fault = {}", self.inject_energy_fault),
            format!("output.dir = {}", self.output_dir.display()),
            format!("output.snapshots = {}", self.snapshots),
        ]);
        lines.join("\n") + "\n"
    }

    pub fn grid(&self) -> Result<Arc<PhaseGrid>> {
        Ok(Arc::new(PhaseGrid::new(self.dim, self.length, self.nx, self.vmax, self.nv)?))
    }

    pub fn profile(&self) -> Result<Profile> {
        match &self.ic_file {
            Some(p) => Profile::from_csv(p),
            None => Ok(Profile::Canonical(self.amplitudes)),
        }
    }

    pub fn run_options(&self) -> RunOptions {
        RunOptions {
            t_final: self.t_final,
            cfl: self.cfl,
            report_cadence: self.report_cadence,
            stepper: StepperOptions {
                transport: self.transport,
                fluid: FluidOptions { cfl: 1.0, viscous: self.viscous },
                alignment: true,
            },
            limit_refine: self.limit_refine,
            hyperviscosity: self.hyperviscosity,
            energy_tol: self.energy_tol,
            lemma32_c_max: self.lemma32_c_max,
            snapshot_dir: if self.snapshots { Some(self.output_dir.clone()) } else { None },
        }
    }
}

/// Parses the flat format: one `key = value` per line, `#` starts a comment.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut last = 0;
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(cfg_err(line, format!("expected 'key = value', got '{content}'")));
        };
        let key = key.trim();
        if key.is_empty() {
            return Err(cfg_err(line, "missing key"));
        }
        cfg.set(key, value.trim(), line)?;
        if key == "gamma" {
            // Report the theorem hypothesis at the offending line.
            if !(cfg.gamma > 1.5) {
                cfg.validate(line)?;
            }
        }
        last = line;
    }
    cfg.validate(last)?;
    Ok(cfg)
}

/// Worker count from [`THREADS_ENV`]; unset means all available cores.
pub fn thread_count() -> usize {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v.trim().parse().unwrap_or(0),
        Err(_) => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    }
}

struct Invocation {
    mode: Mode,
    config: PathBuf,
    overrides: Vec<String>,
}

const USAGE: &str = "usage: entrolimit <run|limit|sweep|check> --config <path> [--set key=value]...";

fn parse_args(args: &[String]) -> std::result::Result<Invocation, String> {
    let mut it = args.iter();
    let mode = it.next().ok_or("missing subcommand")?;
    let mode = Mode::parse(mode).ok_or_else(|| format!("unknown subcommand '{mode}'"))?;
    let mut config = None;
    let mut overrides = Vec::new();
    while let Some(a) = it.next() {
        match a.as_str() {
            "--config" => config = Some(PathBuf::from(it.next().ok_or("--config needs a path")?)),
            "--set" => overrides.push(it.next().ok_or("--set needs key=value")?.clone()),
            other => return Err(format!("unexpected argument '{other}'")),
        }
    }
    let config = config.ok_or("missing --config <path>")?;
    Ok(Invocation { mode, config, overrides })
}

fn load(inv: &Invocation) -> Result<RunConfig> {
    let text = std::fs::read_to_string(&inv.config)
        .map_err(|e| cfg_err(0, format!("cannot read {}: {e}", inv.config.display())))?;
    let mut cfg = parse_config(&text)?;
    for o in &inv.overrides {
        let (k, v) = o.split_once('=').ok_or_else(|| cfg_err(0, format!("--set expects key=value, got '{o}'")))?;
        cfg.set(k.trim(), v.trim(), 0)?;
    }
    cfg.mode = inv.mode;
    cfg.validate(0)?;
    Ok(cfg)
}

// Output failures (closed pipe and the like) must not turn into panics.
fn say(args: std::fmt::Arguments) {
    let _ = writeln!(std::io::stdout(), "{args}");
}

fn complain(args: std::fmt::Arguments) {
    let _ = writeln!(std::io::stderr(), "{args}");
}

/// Entry point; `args` excludes the program name. Returns the exit code.
pub fn main(args: Vec<String>) -> i32 {
    if args.iter().any(|a| a == "--help" || a == "-h") {
        say(format_args!("{USAGE}"));
        return 0;
    }
    let inv = match parse_args(&args) {
        Ok(i) => i,
        Err(e) => {
            complain(format_args!("error: {e}\n{USAGE}"));
            return 2;
        }
    };
    let cfg = match load(&inv) {
        Ok(c) => c,
        Err(e) => {
            complain(format_args!("config error: {e}"));
            return 2;
        }
    };
    match execute(&cfg) {
        Ok(outcome) => {
            say(format_args!("{}", outcome.summary));
            for p in &outcome.artifacts {
                say(format_args!("  {}", p.display()));
            }
            if outcome.passed {
                0
            } else {
                1
            }
        }
        Err(e @ (Error::Config { .. } | Error::InvalidGrid(_) | Error::InitialData(_))) => {
            complain(format_args!("config error: {e}"));
            2
        }
        Err(e) => {
            complain(format_args!("error: {e}"));
            1
        }
    }
}

/// What a workflow produced.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub passed: bool,
    pub summary: String,
    pub artifacts: Vec<PathBuf>,
}

/// Runs the workflow selected by `cfg.mode`, writing into `cfg.output_dir`.
pub fn execute(cfg: &RunConfig) -> Result<Outcome> {
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir)?;
    let echo = dir.join("config.echo");
    std::fs::write(&echo, cfg.echo())?;
    let mut artifacts = vec![echo];
    match cfg.mode {
        Mode::Run | Mode::Check => single_run(cfg, dir, &mut artifacts),
        Mode::Limit => limit_run(cfg, dir, &mut artifacts),
        Mode::Sweep => sweep_run(cfg, dir, &mut artifacts),
    }
}

fn single_run(cfg: &RunConfig, dir: &Path, artifacts: &mut Vec<PathBuf>) -> Result<Outcome> {
    let grid = cfg.grid()?;
    let profile = cfg.profile()?;
    let base = profile.sample(&grid)?;
    let ic = well_prepared_ic(&base, cfg.epsilon, Arc::clone(&grid), cfg.gamma, cfg.theta_rule)?;
    let mut out = run_coupled(&ic, &profile, None, &cfg.run_options())?;
    if cfg.inject_energy_fault {
        for r in out.trajectory.reports.iter_mut().skip(1) {
            r.f *= 1.1;
        }
        out.energy_check = check_energy_inequality(&out.trajectory, cfg.energy_tol, cfg.lemma32_c_max);
    }
    let csv = dir.join(csv_name(cfg.epsilon));
    out.trajectory.write_csv(&csv)?;
    artifacts.push(csv);
    if cfg.snapshots {
        for r in out.trajectory.reports.iter() {
            let k = (r.t / out.dt).round() as usize;
            artifacts.push(dir.join(format!("f_{k}.bin")));
        }
    }
    let fluid_csv = dir.join("fluid_final.csv");
    write_fluid_csv(&fluid_csv, &grid, &out.final_fluid)?;
    let limit_csv = dir.join("limit_final.csv");
    write_limit_csv(&limit_csv, &grid, &out.final_limit, cfg.gamma)?;
    let moments_csv = dir.join("moments_final.csv");
    write_moments_csv(&moments_csv, &grid, &moments(&out.final_f))?;
    artifacts.extend([fluid_csv, limit_csv, moments_csv]);
    let check = out.energy_check;
    let check_json = dir.join("check.json");
    std::fs::write(&check_json, serde_json::to_string_pretty(&check)?)?;
    artifacts.push(check_json);
    let last = out.trajectory.reports.last().copied().unwrap_or_default();
    let passed = check.passed && check.lemma32_passed;
    let summary = format!(
        "{} eps={:e} steps={} H_rel={:e} coulomb_rel={:e} energy_check={} (margin {:e}, violation {:.4}) lemma32_C={:.4} mass_drift={:e} momentum_mismatch={:e}",
        cfg.mode.name(),
        cfg.epsilon,
        out.n_steps,
        last.h_rel,
        last.coulomb_rel,
        if check.passed { "pass" } else { "FAIL" },
        check.worst_margin,
        check.violation,
        check.lemma32_c,
        out.max_mass_drift,
        out.momentum_mismatch,
    );
    Ok(Outcome { passed, summary, artifacts: std::mem::take(artifacts) })
}

fn limit_run(cfg: &RunConfig, dir: &Path, artifacts: &mut Vec<PathBuf>) -> Result<Outcome> {
    let grid = cfg.grid()?;
    let profile = cfg.profile()?;
    let base = profile.sample(&grid)?;
    let fluid = crate::fluid::FluidState::from_velocity(base.rho0.clone(), &base.u0, cfg.gamma)?;
    let (dt, n) = plan_time_step(&grid, &fluid, cfg.t_final, cfg.cfl)?;
    let traj = limit_trajectory(&profile, &grid, cfg.gamma, &cfg.run_options(), dt, n)?;
    let initial = dir.join("limit_initial.csv");
    write_limit_csv(&initial, &grid, &traj.states[0], cfg.gamma)?;
    let last = dir.join("limit_final.csv");
    write_limit_csv(&last, &grid, traj.final_state(), cfg.gamma)?;
    artifacts.extend([initial, last]);
    Ok(Outcome {
        passed: true,
        summary: format!("limit T={} steps={} dt={:e}", cfg.t_final, n, dt),
        artifacts: std::mem::take(artifacts),
    })
}

fn sweep_run(cfg: &RunConfig, dir: &Path, artifacts: &mut Vec<PathBuf>) -> Result<Outcome> {
    let grid = cfg.grid()?;
    let profile = cfg.profile()?;
    let sweep_cfg = SweepConfig {
        grid,
        gamma: cfg.gamma,
        theta_rule: cfg.theta_rule,
        run: cfg.run_options(),
        threads: thread_count(),
        output_dir: Some(dir.to_path_buf()),
    };
    let result = eps_sweep(&profile, &cfg.epsilons, &sweep_cfg)?;
    for e in &result.epsilons {
        artifacts.push(dir.join(csv_name(*e)));
    }
    artifacts.push(dir.join("sweep_summary.json"));
    let passed = result.flags.all();
    let summary = format!(
        "sweep eps={:?} slope_H={:.3} R2={:.3} fitted_C={:.4} slope_stress={:.3} {}",
        result.epsilons,
        result.slope_h,
        result.r2_h,
        result.fitted_c,
        result.slope_stress,
        if passed { "pass" } else { "FAIL" }
    );
    Ok(Outcome { passed, summary, artifacts: std::mem::take(artifacts) })
}
