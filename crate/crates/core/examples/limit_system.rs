//! The two-phase limit system: pressureless Euler-Poisson particles coupled
//! to compressible Navier-Stokes through drag.
use std::sync::Arc;

use entrolimit::grid::PhaseGrid;
use entrolimit::harness::{limit_initial, Profile};
use entrolimit::limit::{LimitSolver, LimitTrajectory};
use entrolimit::poisson::PoissonSolver;

fn main() -> entrolimit::Result<()> {
    let g = Arc::new(PhaseGrid::new(1, 1.0, 128, 1.0, 4)?);
    let solver = LimitSolver::new(g.clone(), 2.0, 0.0)?;
    let s0 = limit_initial(&Profile::default(), &g)?;

    // explicit viscosity: a 1e-2 output step needs several RK4 substeps here
    println!("substeps per 1e-2: {}", solver.substeps_for(&s0, 1e-2));
    let traj = LimitTrajectory::integrate(&solver, &s0, 1e-2, 50, 128)?;

    let poisson = PoissonSolver::new(&g);
    let e0 = s0.energy(&g, &poisson, 2.0)?;
    let e1 = traj.final_state().energy(&g, &poisson, 2.0)?;
    println!("energy {e0:.8} -> {e1:.8} over t = 0.5");
    println!("max |d u_f/dx| = {:.4}", solver.max_particle_gradient(traj.final_state()));
    Ok(())
}
