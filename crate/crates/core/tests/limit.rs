mod common;

use common::{grid, spatial_ratio, temporal_ratio, GAMMA};
use entrolimit::limit::{limit_rhs, limit_step, LimitSolver, LimitState};
use entrolimit::Error;

#[test]
fn spatial_order() {
    let ratio = spatial_ratio();
    assert!((ratio - 4.0).abs() <= 0.8, "{ratio}");
}

#[test]
fn constant_state() {
    let s = LimitState::from_velocities(vec![1.0; 16], &vec![vec![0.4; 16]], vec![1.3; 16], &vec![vec![0.4; 16]]).unwrap();
    let r = limit_rhs(&s, grid(16), GAMMA).unwrap();
    assert!(r.rho_f.iter().chain(&r.rho).chain(&r.omega[0]).chain(&r.m[0]).all(|v| v.abs() < 1e-14));
    for dt in [1e-4, 1e-3] {
        let next = limit_step(&s, dt, grid(16), GAMMA).unwrap();
        for i in 0..16 {
            assert!((next.omega[0][i] - s.omega[0][i]).abs() < 1e-14);
            assert!((next.m[0][i] - s.m[0][i]).abs() < 1e-14);
        }
    }
    assert_eq!(limit_step(&s, 0.0, grid(16), GAMMA).unwrap(), s);
}

#[test]
fn exchange_source() {
    let s = LimitState::from_velocities(vec![1.0; 8], &vec![vec![0.0; 8]], vec![1.0; 8], &vec![vec![1.0; 8]]).unwrap();
    let r = limit_rhs(&s, grid(8), GAMMA).unwrap();
    for i in 0..8 {
        assert!((r.omega[0][i] - 1.0).abs() < 1e-14);
        assert!((r.m[0][i] + 1.0).abs() < 1e-14);
    }
}

// Self-convergence: successive differences shrink by 2^4 under dt halving.
#[test]
fn temporal_order() {
    let ratio = temporal_ratio();
    assert!((ratio - 16.0).abs() <= 0.3 * 16.0, "{ratio}");
}

#[test]
fn steep_particle_velocity_aborts() {
    let g = grid(64);
    let uf: Vec<f64> = (0..64).map(|i| if i < 32 { 1.0 } else { -1.0 }).collect();
    let s = LimitState::from_velocities(vec![1.0; 64], &vec![uf], vec![1.0; 64], &vec![vec![0.0; 64]]).unwrap();
    let solver = LimitSolver::new(g, GAMMA, 0.0).unwrap();
    assert!(matches!(solver.step(&s, 2e-2, 0.3), Err(Error::SmoothnessLost { .. })));
}
