use std::sync::Arc;

use entrolimit::cli::parse_config;
use entrolimit::entropy::relative_pressure;
use entrolimit::grid::PhaseGrid;
use entrolimit::kinetic::{alignment_substep, moments, transport_substep, DistF, RemapWorkspace, TransportScheme};
use entrolimit::poisson::PoissonSolver;
use proptest::prelude::*;

fn gaussian(v: f64, mean: f64, theta: f64) -> f64 {
    (-(v - mean).powi(2) / (2.0 * theta)).exp()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn relative_pressure_is_a_convex_gap(x in 1e-3f64..1e3, y in 1e-3f64..1e3, gamma in 1.5001f64..4.0) {
        let p = relative_pressure(x, y, gamma).unwrap();
        prop_assert!(p >= 0.0);
        prop_assert_eq!(relative_pressure(y, y, gamma).unwrap(), 0.0);
        // sharp Taylor bound with constant gamma/2
        let lower = 0.5 * gamma * x.powf(gamma - 2.0).min(y.powf(gamma - 2.0)) * (x - y).powi(2);
        prop_assert!(p >= lower * (1.0 - 1e-10));
    }

    #[test]
    fn echo_round_trips(
        nx in 4usize..512,
        half_nv in 4usize..256,
        vmax in 1.0f64..20.0,
        eps in 1e-6f64..1.0,
        cfl in 0.01f64..1.0,
        gamma in 1.51f64..5.0,
        refine in 1usize..5,
        snapshots: bool,
    ) {
        let text = format!(
            "Nx = {nx}\nNv = {}\nVmax = {vmax}\nepsilon = {eps}\ncfl_number = {cfl}\ngamma = {gamma}\nlimit_refine = {refine}\noutput.snapshots = {snapshots}\n",
            2 * half_nv
        );
        let cfg = parse_config(&text).unwrap();
        prop_assert_eq!(parse_config(&cfg.echo()).unwrap(), cfg);
    }

    #[test]
    fn alignment_keeps_mass_and_momentum(mean in -1.0f64..1.0, theta in 0.02f64..0.5, eps in 1e-4f64..1.0, dt in 1e-4f64..0.1) {
        let g = Arc::new(PhaseGrid::new(1, 1.0, 4, 6.0, 128).unwrap());
        let mut f = DistF::from_fn(g.clone(), |c, j| (1.0 + c as f64) * gaussian(g.vc()[j], mean, theta)).unwrap();
        let before = moments(&f);
        let s0 = entrolimit::kinetic::kinetic_stress(&f)[0][0];
        alignment_substep(&mut f, dt, eps, &mut RemapWorkspace::new(&g)).unwrap();
        let after = moments(&f);
        for c in 0..4 {
            prop_assert!((after.rho_f[c] - before.rho_f[c]).abs() <= 1e-12 * before.rho_f[c]);
            prop_assert!((after.u_f[0][c] - before.u_f[0][c]).abs() <= 1e-10);
        }
        prop_assert!(f.data().iter().all(|v| *v >= 0.0));
        prop_assert!(entrolimit::kinetic::kinetic_stress(&f)[0][0] <= s0 * (1.0 + 1e-12));
    }

    #[test]
    fn transport_is_conservative_and_positive(seed in prop::collection::vec(0.0f64..1.0, 32), frac in 0.0f64..1.0, sl: bool) {
        let g = Arc::new(PhaseGrid::new(1, 1.0, 32, 2.0, 4).unwrap());
        let mut f = DistF::from_fn(g.clone(), |c, j| seed[c] * (1.0 + j as f64)).unwrap();
        let m0 = f.total_mass();
        let dt = frac * g.hx() / g.vc()[3];
        let scheme = if sl { TransportScheme::SemiLagrangian } else { TransportScheme::FiniteVolume };
        transport_substep(&mut f, dt, scheme).unwrap();
        prop_assert!((f.total_mass() - m0).abs() <= 1e-12 * m0.max(1.0));
        prop_assert!(f.data().iter().all(|v| *v >= -1e-15));
    }

    #[test]
    fn poisson_inverts_laplacian(source in prop::collection::vec(-1.0f64..1.0, 48)) {
        let g = PhaseGrid::new(1, 1.0, 48, 1.0, 4).unwrap();
        let solver = PoissonSolver::new(&g);
        let mean = source.iter().sum::<f64>() / 48.0;
        let lap = solver.laplacian(&solver.solve(&source).unwrap().phi);
        for (l, s) in lap.iter().zip(&source) {
            prop_assert!((-l - (s - mean)).abs() < 1e-12);
        }
    }
}
