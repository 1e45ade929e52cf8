//! Phase-space grid basics: cell centres, velocity nodes, quadrature.
use entrolimit::grid::make_grid;

fn main() -> entrolimit::Result<()> {
    let g = make_grid(1, 1.0, 16, 6.0, 64)?;
    println!("hx = {}, hv = {}", g.hx(), g.hv());
    println!("first nodes: {:?}", &g.vc()[..3]);

    // ∫ exp(-ξ²/2)/√(2π) dξ on the node set
    let gauss: Vec<f64> = g
        .vc()
        .iter()
        .map(|v| (-v * v / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt())
        .collect();
    println!("gaussian mass = {:.12}", g.velocity_integral(&gauss));
    println!("domain volume = {}", g.domain_volume());
    Ok(())
}
