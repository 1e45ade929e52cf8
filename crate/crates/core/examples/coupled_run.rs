//! One coupled kinetic-fluid run against the limit solution, with the
//! energy-inequality check.
use std::sync::Arc;

use entrolimit::grid::PhaseGrid;
use entrolimit::harness::{run_coupled, well_prepared_ic, Profile, RunOptions, ThetaRule};

fn main() -> entrolimit::Result<()> {
    let g = Arc::new(PhaseGrid::new(1, 1.0, 64, 9.0, 256)?);
    let profile = Profile::default();
    let ic = well_prepared_ic(&profile.sample(&g)?, 1e-2, g.clone(), 2.0, ThetaRule::Sqrt)?;
    let opts = RunOptions { t_final: 0.1, report_cadence: 0.02, limit_refine: 1, ..Default::default() };
    let out = run_coupled(&ic, &profile, None, &opts)?;

    println!("{} steps of dt = {:.3e}", out.n_steps, out.dt);
    for r in &out.trajectory.reports {
        println!("t {:.2}  F {:.8}  H_rel {:.3e}  stress {:.3e}", r.t, r.f, r.h_rel, r.stress_l1);
    }
    let c = out.energy_check;
    println!("energy inequality: {} (worst margin {:.3e})", if c.passed { "holds" } else { "violated" }, c.worst_margin);
    println!("mass drift {:.2e}, momentum mismatch {:.2e}", out.max_mass_drift, out.momentum_mismatch);
    Ok(())
}
