//! Relative pressure and the relative entropy between an ε-state and the limit.
use std::sync::Arc;

use entrolimit::entropy::{relative_entropy, relative_pressure};
use entrolimit::grid::PhaseGrid;
use entrolimit::harness::{well_prepared_ic, Profile, ThetaRule};
use entrolimit::kinetic::moments;
use entrolimit::poisson::PoissonSolver;

fn main() -> entrolimit::Result<()> {
    for gamma in [5.0 / 3.0, 2.0, 3.0] {
        println!("P(2|1) at gamma {gamma:.3} = {:.6}", relative_pressure(2.0, 1.0, gamma)?);
    }

    let g = Arc::new(PhaseGrid::new(1, 1.0, 64, 9.0, 256)?);
    let base = Profile::default().sample(&g)?;
    for eps in [1e-1, 1e-2, 1e-3] {
        let ic = well_prepared_ic(&base, eps, g.clone(), 2.0, ThetaRule::Sqrt)?;
        let terms = relative_entropy(&moments(&ic.f), &ic.fluid, &ic.limit, &g, &PoissonSolver::new(&g))?;
        println!("eps {eps:e}: H_rel {:.3e}, thermal excess {:.3e}", terms.h_rel, ic.certificate.excess);
    }
    Ok(())
}
