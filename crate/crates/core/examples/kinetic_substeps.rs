//! The three kinetic substeps on a warm beam: transport, drag, alignment.
use std::sync::Arc;

use entrolimit::grid::PhaseGrid;
use entrolimit::kinetic::{
    alignment_substep, drag_field_substep, kinetic_stress, moments, transport_substep, DistF, RemapWorkspace,
    TransportScheme,
};

fn gaussian(v: f64, mean: f64, theta: f64) -> f64 {
    (-(v - mean).powi(2) / (2.0 * theta)).exp() / (2.0 * std::f64::consts::PI * theta).sqrt()
}

fn main() -> entrolimit::Result<()> {
    let g = Arc::new(PhaseGrid::new(1, 1.0, 32, 6.0, 128)?);
    let mut f = DistF::from_fn(g.clone(), |c, j| {
        let x = g.x(c, 0);
        (1.0 + 0.2 * (2.0 * std::f64::consts::PI * x).sin()) * gaussian(g.vc()[j], 0.3, 0.2)
    })?;
    let mut ws = RemapWorkspace::new(&g);
    let show = |label: &str, f: &DistF| {
        let m = moments(f);
        println!("{label:>10}: mass {:.12} u_f[0] {:.6} stress {:.6}", f.total_mass(), m.u_f[0][0], kinetic_stress(f)[0][0]);
    };
    show("start", &f);

    transport_substep(&mut f, 0.01, TransportScheme::SemiLagrangian)?;
    show("transport", &f);

    // relax towards u = 0 with no field
    let zero = vec![vec![0.0; 32]];
    drag_field_substep(&mut f, &zero, &zero, 0.5, &mut ws)?;
    show("drag", &f);

    // variance shrinks by exp(-2 dt/eps)
    let stats = alignment_substep(&mut f, 0.01, 1e-2, &mut ws)?;
    show("alignment", &f);
    println!("energy removed by alignment: {:.6e}", stats.energy_removed);
    Ok(())
}
