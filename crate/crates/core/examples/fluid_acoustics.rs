//! Isentropic Navier-Stokes: a small density pulse splits into two acoustic waves.
use std::sync::Arc;

use entrolimit::fluid::{navier_stokes_step, sound_speed, FluidOptions, FluidState};
use entrolimit::grid::PhaseGrid;

fn main() -> entrolimit::Result<()> {
    let (len, nx) = (200.0, 256);
    let g = Arc::new(PhaseGrid::new(1, len, nx, 1.0, 4)?);
    let rho: Vec<f64> = (0..nx).map(|i| 1.0 + 1e-3 * (-((g.x(i, 0) - 100.0) / 8.0).powi(2)).exp()).collect();
    let mut s = FluidState::from_velocity(rho, &vec![vec![0.0; nx]], 2.0)?;
    let dt = 0.1;
    for _ in 0..400 {
        s = navier_stokes_step(&s, dt, &g, &FluidOptions::default())?;
    }
    let peak = (nx / 2..nx).max_by(|a, b| s.rho[*a].total_cmp(&s.rho[*b])).unwrap();
    println!("right pulse near x = {:.1} after t = 40", g.x(peak, 0));
    println!("expected x = {:.1} (c = {:.4})", 100.0 + 40.0 * sound_speed(1.0, 2.0), sound_speed(1.0, 2.0));
    println!("mass = {:.12}", s.total_mass(&g));
    Ok(())
}
