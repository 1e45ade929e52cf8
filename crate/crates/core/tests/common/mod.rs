//! Manufactured limit-system state shared by the limit and acceptance tests.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use entrolimit::grid::PhaseGrid;
use entrolimit::limit::{limit_rhs, LimitSolver, LimitState};

pub const GAMMA: f64 = 2.0;

pub fn grid(nx: usize) -> Arc<PhaseGrid> {
    Arc::new(PhaseGrid::new(1, 1.0, nx, 4.0, 8).unwrap())
}

pub struct Manufactured {
    pub k: f64,
}

// rho_f = 1 + 0.2 sin, u_f = 0.3 cos, rho = 1 + 0.2 cos, u = 0.1 sin, all at wavenumber k.
impl Manufactured {
    pub fn state(&self, g: &PhaseGrid) -> LimitState {
        let x: Vec<f64> = (0..g.nx()).map(|i| self.k * g.x(i, 0)).collect();
        LimitState::from_velocities(
            x.iter().map(|x| 1.0 + 0.2 * x.sin()).collect(),
            &vec![x.iter().map(|x| 0.3 * x.cos()).collect()],
            x.iter().map(|x| 1.0 + 0.2 * x.cos()).collect(),
            &vec![x.iter().map(|x| 0.1 * x.sin()).collect()],
        )
        .unwrap()
    }

    // Hand-differentiated right-hand side at one point.
    fn exact(&self, x: f64) -> [f64; 4] {
        let k = self.k;
        let (s, c) = (k * x).sin_cos();
        let (a, da) = (1.0 + 0.2 * s, 0.2 * k * c);
        let (b, db) = (0.3 * c, -0.3 * k * s);
        let (r, dr) = (1.0 + 0.2 * c, -0.2 * k * s);
        let (u, du, ddu) = (0.1 * s, 0.1 * k * c, -0.1 * k * k * s);
        let dphi = 0.2 * c / k;
        let drag = a * (u - b);
        [
            -(da * b + a * db),
            -(da * b * b + 2.0 * a * b * db) + drag - a * dphi,
            -(dr * u + r * du),
            -(dr * u * u + 2.0 * r * u * du) - GAMMA * r.powf(GAMMA - 1.0) * dr + ddu - drag,
        ]
    }

    pub fn residual(&self, nx: usize) -> f64 {
        let g = grid(nx);
        let r = limit_rhs(&self.state(&g), g.clone(), GAMMA).unwrap();
        (0..nx)
            .map(|i| {
                let e = self.exact(g.x(i, 0));
                let got = [r.rho_f[i], r.omega[0][i], r.rho[i], r.m[0][i]];
                (0..4).map(|q| (got[q] - e[q]).abs()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }
}

pub fn integrate(solver: &LimitSolver, s0: &LimitState, dt: f64, t: f64) -> LimitState {
    let n = (t / dt).round() as usize;
    let mut s = s0.clone();
    for k in 0..n {
        s = solver.step(&s, dt, k as f64 * dt).unwrap();
    }
    s
}

pub fn distance(a: &LimitState, b: &LimitState) -> f64 {
    let pairs = [(&a.rho_f, &b.rho_f), (&a.omega[0], &b.omega[0]), (&a.rho, &b.rho), (&a.m[0], &b.m[0])];
    pairs.iter().flat_map(|(x, y)| x.iter().zip(y.iter()).map(|(p, q)| (p - q).abs())).fold(0.0, f64::max)
}

/// Coarse/fine MMS residual ratio on Nx = 32, 64.
pub fn spatial_ratio() -> f64 {
    let mms = Manufactured { k: 2.0 * PI };
    mms.residual(32) / mms.residual(64)
}

/// Successive-difference ratio of RK4 runs at dt = 2e-3, 1e-3, 5e-4 to T = 0.2.
pub fn temporal_ratio() -> f64 {
    let g = grid(16);
    let solver = LimitSolver::new(g.clone(), GAMMA, 0.0).unwrap();
    let s0 = Manufactured { k: 2.0 * PI }.state(&g);
    let runs: Vec<LimitState> = [2e-3, 1e-3, 5e-4].iter().map(|dt| integrate(&solver, &s0, *dt, 0.2)).collect();
    distance(&runs[0], &runs[1]) / distance(&runs[1], &runs[2])
}
