use std::f64::consts::PI;
use std::sync::Arc;

use entrolimit::entropy::{
    check_energy_inequality, dissipation_d1, dissipation_d2, energy_functional, poincare_norm, relative_entropy,
    relative_pressure, DissipationBudget, EntropyReport, Trajectory,
};
use entrolimit::fluid::{rest_state, FluidState};
use entrolimit::grid::PhaseGrid;
use entrolimit::kinetic::{alignment_substep, moments, DistF, RemapWorkspace};
use entrolimit::limit::LimitState;
use entrolimit::poisson::PoissonSolver;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn gaussian(v: f64, theta: f64) -> f64 {
    (-v * v / (2.0 * theta)).exp() / (2.0 * PI * theta).sqrt()
}

#[test]
fn energy_of_fluid_at_rest() {
    // Nodes at ±1/3, ±1, ±5/3 so that a beam sits exactly at u_f = 1.
    let g = Arc::new(PhaseGrid::new(1, 1.0, 8, 2.0, 6).unwrap());
    let poisson = PoissonSolver::new(&g);
    for gamma in [5.0 / 3.0, 2.0] {
        let s = rest_state(&g, 1.0, gamma).unwrap();
        let empty = DistF::zeros(g.clone());
        let f0 = energy_functional(&empty, &s, &poisson).unwrap();
        assert!((f0 - 1.0 / (gamma - 1.0)).abs() < 1e-14);
        let node = g.vc().iter().position(|v| (v - 1.0).abs() < 1e-12).unwrap();
        let beam = DistF::from_fn(g.clone(), |_, j| if j == node { 1.0 / g.hv() } else { 0.0 }).unwrap();
        let f1 = energy_functional(&beam, &s, &poisson).unwrap();
        assert!((f1 - f0 - 0.5).abs() < 1e-14);
    }
}

// Oracle: 1/(g-1) + theta/2 + a^2/(16 pi^2), the Gaussian and sine integrals in closed form.
#[test]
fn energy_of_warm_particles() {
    let g = Arc::new(PhaseGrid::new(1, 1.0, 64, 6.0, 128).unwrap());
    let (a, theta) = (0.5, 0.2);
    let f = DistF::from_fn(g.clone(), |c, j| (1.0 + a * (2.0 * PI * g.x(c, 0)).sin()) * gaussian(g.vc()[j], theta)).unwrap();
    let s = rest_state(&g, 1.0, 2.0).unwrap();
    let got = energy_functional(&f, &s, &PoissonSolver::new(&g)).unwrap();
    let want = 1.0 + 0.5 * theta + a * a / (16.0 * PI * PI);
    assert!((got / want - 1.0).abs() < 1e-6, "{got} {want}");
}

#[test]
fn dissipation_values() {
    let g = Arc::new(PhaseGrid::new(1, 1.0, 16, 6.0, 128).unwrap());
    let theta = 0.3;
    let f = DistF::from_fn(g.clone(), |_, j| gaussian(g.vc()[j], theta)).unwrap();
    assert!((dissipation_d1(&f) - theta).abs() < 1e-6);

    let cold = DistF::from_fn(g.clone(), |_, j| if j == 70 { 1.0 } else { 0.0 }).unwrap();
    let u = vec![vec![g.vc()[70]; 16]];
    assert!(dissipation_d1(&cold).abs() < 1e-15);
    assert!(dissipation_d2(&cold, &u).abs() < 1e-15);
}

// Oracle: int_0^1 (2 pi cos 2 pi x)^2 dx = 2 pi^2 (mpmath quadrature).
#[test]
fn viscous_dissipation_of_a_sine() {
    let nx = 16384;
    let g = Arc::new(PhaseGrid::new(1, 1.0, nx, 1.0, 4).unwrap());
    let u = vec![(0..nx).map(|i| (2.0 * PI * g.x(i, 0)).sin()).collect()];
    let d2 = dissipation_d2(&DistF::zeros(g.clone()), &u);
    assert!((d2 - 19.739_208_802_178_716).abs() < 1e-6, "{d2}");
}

// Oracle: mpmath evaluation of 1.5 (2^(5/3) - 1) - 2.5.
#[test]
fn relative_pressure_values() {
    assert_eq!(relative_pressure(1.7, 1.7, 2.0).unwrap(), 0.0);
    assert!((relative_pressure(3.0, 1.0, 2.0).unwrap() - 4.0).abs() < 1e-12);
    assert!((relative_pressure(2.0, 1.0, 5.0 / 3.0).unwrap() - 0.762_203_155_904_598_4).abs() < 1e-12);
    assert!(relative_pressure(1.0, 0.0, 2.0).is_err());
    assert!(relative_pressure(0.0, 1.0, 2.0).unwrap() > 0.0);
}

fn uniform_limit(n: usize, rho_f: f64, uf: f64, rho: f64, u: f64) -> LimitState {
    LimitState::from_velocities(vec![rho_f; n], &vec![vec![uf; n]], vec![rho; n], &vec![vec![u; n]]).unwrap()
}

#[test]
fn relative_entropy_densities() {
    let g = Arc::new(PhaseGrid::new(1, 1.0, 4, 2.0, 6).unwrap());
    let poisson = PoissonSolver::new(&g);
    let node = g.vc().iter().position(|v| (v - 1.0).abs() < 1e-12).unwrap();
    let f = DistF::from_fn(g.clone(), |_, j| if j == node { 2.0 / g.hv() } else { 0.0 }).unwrap();
    let mom = moments(&f);
    let fluid = FluidState::from_velocity(vec![1.0; 4], &vec![vec![0.2; 4]], 2.0).unwrap();

    let same = uniform_limit(4, 2.0, 1.0, 1.0, 0.2);
    let r = relative_entropy(&mom, &fluid, &same, &g, &poisson).unwrap();
    assert!(r.h_rel.abs() < 1e-14 && r.coulomb_rel.abs() < 1e-20 && r.drag_rel.abs() < 1e-14 && r.visc_rel == 0.0);

    let behind = uniform_limit(4, 2.0, 0.0, 1.0, 0.2);
    let r = relative_entropy(&mom, &fluid, &behind, &g, &poisson).unwrap();
    assert!((r.h_rel - 1.0).abs() < 1e-12);

    let dense = FluidState::from_velocity(vec![2.0; 4], &vec![vec![0.2; 4]], 2.0).unwrap();
    let r = relative_entropy(&mom, &dense, &behind, &g, &poisson).unwrap();
    assert!((r.h_rel - 2.0).abs() < 1e-12);
    assert!((r.p_rel - 1.0).abs() < 1e-12);
}

fn report(t: f64, f: f64) -> EntropyReport {
    EntropyReport { t, f, ..Default::default() }
}

#[test]
fn energy_check_edge_cases() {
    let single = Trajectory { epsilon: 1e-2, reports: vec![report(0.0, 2.0)], budgets: vec![] };
    let c = check_energy_inequality(&single, 1e-3, 50.0);
    assert!(c.passed);
    assert!((c.worst_margin - 2.0 * 1e-3).abs() < 1e-15);

    let bumped = Trajectory {
        epsilon: 1e-2,
        reports: vec![report(0.0, 2.0), report(0.1, 2.2), report(0.2, 2.2)],
        budgets: vec![],
    };
    let c = check_energy_inequality(&bumped, 1e-3, 50.0);
    assert!(!c.passed);
    assert!((c.violation - 0.1).abs() < 1e-12);
}

// Closed-form contraction: the energy alignment removes equals (1/eps) int D1.
#[test]
fn alignment_toy_run() {
    let g = Arc::new(PhaseGrid::new(1, 1.0, 8, 4.0, 128).unwrap());
    let poisson = PoissonSolver::new(&g);
    let fluid = rest_state(&g, 1.0, 2.0).unwrap();
    let eps = 0.05;
    let mut f = DistF::from_fn(g.clone(), |c, j| gaussian(g.vc()[j] - 0.1 * c as f64, 0.25)).unwrap();
    let mut ws = RemapWorkspace::new(&g);
    let dt = eps / 100.0;
    let mut traj = Trajectory { epsilon: eps, ..Default::default() };
    let mut budget = DissipationBudget::default();
    let mut trapezoid = 0.0;
    let mut prev_d1 = dissipation_d1(&f);
    let f0 = energy_functional(&f, &fluid, &poisson).unwrap();
    for k in 0..=300 {
        let energy = energy_functional(&f, &fluid, &poisson).unwrap();
        let d1 = dissipation_d1(&f);
        if k > 0 {
            trapezoid += 0.5 * dt * (prev_d1 + d1) / eps;
            let last = traj.reports.last().unwrap().f;
            assert!(energy <= last + 1e-14);
        }
        prev_d1 = d1;
        traj.reports.push(EntropyReport { t: k as f64 * dt, f: energy, d1, stress_l1: d1, ..Default::default() });
        traj.budgets.push(budget);
        let stats = alignment_substep(&mut f, dt, eps, &mut ws).unwrap();
        budget.alignment += stats.energy_removed;
    }
    assert!(trapezoid <= f0);
    let c = check_energy_inequality(&traj, 1e-3, 50.0);
    assert!(c.passed, "{c:?}");
    assert!(c.worst_margin > 0.5e-3 * f0);
}

#[test]
fn poincare_equality_and_zero() {
    let g = Arc::new(PhaseGrid::new(1, 1.0, 32, 1.0, 4).unwrap());
    let zero = poincare_norm(&vec![vec![0.0; 32]], &vec![1.0; 32], &g, 10.0).unwrap();
    assert_eq!(zero.lhs, 0.0);
    assert_eq!(zero.ratio, 0.0);
    let c = 0.7;
    let b = poincare_norm(&vec![vec![c; 32]], &vec![1.0; 32], &g, 1.0).unwrap();
    assert!((b.rhs - c * c).abs() < 1e-14);
    assert!((b.ratio - 1.0).abs() < 1e-14);
}

// Randomized smooth pairs: a failure would falsify the configured constant.
#[test]
fn poincare_random_trials() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let nx = 64;
    let g = Arc::new(PhaseGrid::new(1, 1.0, nx, 1.0, 4).unwrap());
    for _ in 0..100 {
        let modes: Vec<(f64, f64, f64)> = (0..4).map(|k| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), (k + 1) as f64)).collect();
        let offset = rng.gen_range(-1.0..1.0);
        let amp = rng.gen_range(0.0..0.9);
        let phase = rng.gen_range(0.0..2.0 * PI);
        let mut rho: Vec<f64> = (0..nx).map(|i| 1.0 + amp * (2.0 * PI * g.x(i, 0) + phase).sin()).collect();
        let mean = rho.iter().sum::<f64>() / nx as f64;
        rho.iter_mut().for_each(|r| *r /= mean);
        let u: Vec<f64> = (0..nx)
            .map(|i| {
                let x = 2.0 * PI * g.x(i, 0);
                offset + modes.iter().map(|(a, b, k)| a * (k * x).sin() + b * (k * x).cos()).sum::<f64>()
            })
            .collect();
        let b = poincare_norm(&vec![u], &rho, &g, 10.0).unwrap();
        assert!(b.ratio <= 1.0, "{b:?}");
    }
}
