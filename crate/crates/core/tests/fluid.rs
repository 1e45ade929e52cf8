use std::f64::consts::PI;
use std::sync::Arc;

use entrolimit::fluid::{
    coupled_momentum_budget, fluid_step, navier_stokes_step, pressure, rest_state, sound_speed, FluidOptions, FluidState,
};
use entrolimit::grid::PhaseGrid;
use entrolimit::kinetic::{moments, DistF};

// Oracle: mpmath, 30 digits.
const TWO_POW_FIVE_THIRDS: f64 = 3.174_802_103_936_399;

#[test]
fn pressure_law() {
    assert_eq!(pressure(0.0, 2.0).unwrap(), 0.0);
    for gamma in [1.6, 2.0, 3.0] {
        assert_eq!(pressure(1.0, gamma).unwrap(), 1.0);
    }
    assert!((pressure(2.0, 5.0 / 3.0).unwrap() - TWO_POW_FIVE_THIRDS).abs() < 1e-12);
    assert!(pressure(-1.0, 2.0).is_err());
    assert!((sound_speed(1.0, 2.0) - 2f64.sqrt()).abs() < 1e-15);
}

#[test]
fn rest_without_particles() {
    let g = Arc::new(PhaseGrid::new(1, 1.0, 16, 1.0, 4).unwrap());
    let s = rest_state(&g, 1.0, 2.0).unwrap();
    let mom = moments(&DistF::zeros(g.clone()));
    let next = fluid_step(&s, &mom, 0.01, &g, &FluidOptions::default()).unwrap();
    assert_eq!(next, s);
}

// Oracle: scalar ODE u' = 1 - u from u(0) = 0.
#[test]
fn frozen_drag_relaxation() {
    // A wide box keeps dt = 0.2 inside the acoustic CFL bound.
    let g = Arc::new(PhaseGrid::new(1, 10.0, 8, 2.0, 8).unwrap());
    let node = g.vc().iter().rposition(|v| *v <= 1.0).unwrap();
    // Linear weights between two nodes put the beam exactly at u_f = 1.
    let w = (1.0 - g.vc()[node]) / g.hv();
    let f = DistF::from_fn(g.clone(), |_, j| {
        if j == node {
            (1.0 - w) / g.hv()
        } else if j == node + 1 {
            w / g.hv()
        } else {
            0.0
        }
    })
    .unwrap();
    let mom = moments(&f);
    assert!((mom.u_f[0][0] - 1.0).abs() < 1e-14);
    let s = rest_state(&g, 1.0, 2.0).unwrap();
    for dt in [0.01, 0.05, 0.2] {
        let next = fluid_step(&s, &mom, dt, &g, &FluidOptions::default()).unwrap();
        let u = next.velocity()[0][3];
        assert!((u - (1.0 - (-dt as f64).exp())).abs() < dt * dt, "{dt}: {u}");
    }
}

#[test]
fn mass_is_conserved() {
    let g = Arc::new(PhaseGrid::new(1, 1.0, 64, 1.0, 4).unwrap());
    let rho: Vec<f64> = (0..64).map(|i| 1.0 + 0.3 * (2.0 * PI * g.x(i, 0)).sin()).collect();
    let u = vec![(0..64).map(|i| 0.2 * (2.0 * PI * g.x(i, 0)).cos()).collect()];
    let mut s = FluidState::from_velocity(rho, &u, 2.0).unwrap();
    let m0 = s.total_mass(&g);
    for _ in 0..50 {
        s = navier_stokes_step(&s, 2e-3, &g, &FluidOptions::default()).unwrap();
    }
    assert!((s.total_mass(&g) - m0).abs() < 1e-12 * m0);
}

#[test]
fn mirrored_data_carry_no_momentum() {
    let g = Arc::new(PhaseGrid::new(1, 1.0, 32, 2.0, 16).unwrap());
    let rho: Vec<f64> = (0..32).map(|i| 1.0 + 0.2 * (2.0 * PI * g.x(i, 0)).cos()).collect();
    let u = vec![(0..32).map(|i| 0.3 * (2.0 * PI * g.x(i, 0)).sin()).collect()];
    let mut s = FluidState::from_velocity(rho, &u, 2.0).unwrap();
    let f = DistF::from_fn(g.clone(), |_, j| (-(g.vc()[j]).powi(2)).exp()).unwrap();
    assert!(coupled_momentum_budget(&s, &f)[0].abs() < 1e-14);
    let mom = moments(&f);
    for _ in 0..10 {
        s = fluid_step(&s, &mom, 1e-3, &g, &FluidOptions::default()).unwrap();
        assert!(coupled_momentum_budget(&s, &f)[0].abs() < 1e-10);
    }
}

fn peak_position(x: &[f64], y: &[f64], from: usize, to: usize) -> f64 {
    let k = (from..to).max_by(|a, b| y[*a].total_cmp(&y[*b])).unwrap();
    let (l, c, r) = (y[k - 1], y[k], y[k + 1]);
    let h = x[1] - x[0];
    x[k] + 0.5 * h * (l - r) / (l - 2.0 * c + r)
}

// Oracle: linearized dispersion relation c = sqrt(gamma rho^(gamma-1)) = sqrt(2).
#[test]
fn acoustic_speed() {
    let nx = 256;
    let g = Arc::new(PhaseGrid::new(1, 200.0, nx, 1.0, 4).unwrap());
    let x: Vec<f64> = (0..nx).map(|i| g.x(i, 0)).collect();
    let rho: Vec<f64> = x.iter().map(|x| 1.0 + 1e-3 * (-((x - 100.0) / 8.0).powi(2)).exp()).collect();
    let mut s = FluidState::from_velocity(rho, &vec![vec![0.0; nx]], 2.0).unwrap();
    let t_end = 40.0;
    let steps = 400;
    let dt = t_end / steps as f64;
    for _ in 0..steps {
        s = navier_stokes_step(&s, dt, &g, &FluidOptions::default()).unwrap();
    }
    let right = peak_position(&x, &s.rho, nx / 2 + 5, nx - 2);
    let left = peak_position(&x, &s.rho, 2, nx / 2 - 5);
    let speed = (right - left) / (2.0 * t_end);
    assert!((speed / 2f64.sqrt() - 1.0).abs() < 0.03, "{speed}");
}
