//! Spectral Poisson solve on the periodic box: -ΔΦ = ρ_f - mean(ρ_f).
use std::f64::consts::PI;

use entrolimit::grid::make_grid;
use entrolimit::poisson::PoissonSolver;

fn main() -> entrolimit::Result<()> {
    let g = make_grid(1, 1.0, 64, 1.0, 4)?;
    let rho_f: Vec<f64> = (0..64).map(|i| 1.0 + (2.0 * PI * g.x(i, 0)).sin()).collect();
    let solver = PoissonSolver::new(&g);
    let pot = solver.solve(&rho_f)?;

    let err = (0..64)
        .map(|i| (pot.phi[i] - (2.0 * PI * g.x(i, 0)).sin() / (4.0 * PI * PI)).abs())
        .fold(0.0, f64::max);
    println!("max |phi - sin/4pi^2| = {err:.3e}");
    println!("removed mean = {:.3e}", pot.removed_mean);
    println!("coulomb energy = {:.6e}", entrolimit::poisson::coulomb_energy(&rho_f, &g)?);
    Ok(())
}
