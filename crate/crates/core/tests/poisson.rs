use std::f64::consts::PI;

use entrolimit::grid::make_grid;
use entrolimit::poisson::{coulomb_distance, coulomb_energy, solve_poisson, PoissonSolver};

fn sine(nx: usize) -> Vec<f64> {
    (0..nx).map(|i| 1.0 + (2.0 * PI * (i as f64 + 0.5) / nx as f64).sin()).collect()
}

#[test]
fn uniform_source() {
    let g = make_grid(1, 1.0, 32, 1.0, 4).unwrap();
    let p = solve_poisson(&vec![1.0; 32], &g).unwrap();
    assert!(p.phi.iter().chain(&p.grad_phi[0]).all(|v| *v == 0.0));
}

#[test]
fn manufactured_potential() {
    let g = make_grid(1, 1.0, 64, 1.0, 4).unwrap();
    let p = solve_poisson(&sine(64), &g).unwrap();
    let err = (0..64)
        .map(|i| (p.phi[i] - (2.0 * PI * g.x(i, 0)).sin() / (4.0 * PI * PI)).abs())
        .fold(0.0, f64::max);
    assert!(err < 1e-10, "{err}");
    let derr = (0..64)
        .map(|i| (p.grad_phi[0][i] - (2.0 * PI * g.x(i, 0)).cos() / (2.0 * PI)).abs())
        .fold(0.0, f64::max);
    assert!(derr < 1e-10);
}

// Centered second differences as an independent residual: -D2 phi = s - mean(s) + O(hx^2).
#[test]
fn finite_difference_residual() {
    let nx = 256;
    let g = make_grid(1, 1.0, nx, 1.0, 4).unwrap();
    let s = sine(nx);
    let p = solve_poisson(&s, &g).unwrap();
    let h2 = g.hx() * g.hx();
    let worst = (0..nx)
        .map(|i| {
            let lap = (p.phi[(i + 1) % nx] - 2.0 * p.phi[i] + p.phi[(i + nx - 1) % nx]) / h2;
            (-lap - (s[i] - 1.0)).abs()
        })
        .fold(0.0, f64::max);
    assert!(worst < 2e-4, "{worst}");
}

#[test]
fn spectral_laplacian_inverts() {
    let g = make_grid(2, 1.0, 16, 1.0, 4).unwrap();
    let solver = PoissonSolver::new(&g);
    let s: Vec<f64> = (0..g.n_cells())
        .map(|c| 1.0 + 0.3 * (2.0 * PI * g.x(c, 0)).sin() * (4.0 * PI * g.x(c, 1)).cos() + 0.1 * (2.0 * PI * g.x(c, 1)).sin())
        .collect();
    let mean = s.iter().sum::<f64>() / s.len() as f64;
    let lap = solver.laplacian(&solver.solve(&s).unwrap().phi);
    for (l, v) in lap.iter().zip(&s) {
        assert!((-l - (v - mean)).abs() < 1e-12);
    }
}

// Oracle: 1/(16 pi^2) from mpmath quadrature of 1/2 (cos(2 pi x)/(2 pi))^2.
const COULOMB_SINE: f64 = 6.332_573_977_646_110_7e-3;

#[test]
fn coulomb_values() {
    let g = make_grid(1, 1.0, 64, 1.0, 4).unwrap();
    assert_eq!(coulomb_energy(&vec![1.0; 64], &g).unwrap(), 0.0);
    assert!((coulomb_energy(&sine(64), &g).unwrap() - COULOMB_SINE).abs() < 1e-8);
    let one = vec![1.0; 64];
    assert!((coulomb_distance(&sine(64), &one, &g).unwrap() - 2.0 * COULOMB_SINE).abs() < 1e-8);
    let shifted: Vec<f64> = sine(64).iter().map(|v| v + 3.0).collect();
    assert!(coulomb_distance(&sine(64), &shifted, &g).unwrap().abs() < 1e-20);
    assert_eq!(coulomb_distance(&sine(64), &sine(64), &g).unwrap(), 0.0);
}
