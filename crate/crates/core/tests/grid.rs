use entrolimit::grid::{make_grid, velocity_integral};
use entrolimit::Error;

#[test]
fn spacings() {
    let g = make_grid(1, 1.0, 64, 6.0, 64).unwrap();
    assert_eq!(g.hx(), 1.0 / 64.0);
    assert_eq!(g.hv(), 12.0 / 64.0);
}

#[test]
fn midpoint_nodes() {
    let g = make_grid(1, 1.0, 8, 1.0, 4).unwrap();
    assert_eq!(g.vc(), &[-0.75, -0.25, 0.25, 0.75]);
}

#[test]
fn odd_nv_rejected() {
    assert!(matches!(make_grid(1, 1.0, 8, 1.0, 3), Err(Error::InvalidGrid(_))));
}

#[test]
fn box_measure_and_odd_moment() {
    let g = make_grid(1, 1.0, 8, 1.0, 16).unwrap();
    assert!((velocity_integral(&g, &vec![1.0; 16]) - 2.0).abs() < 1e-12);
    let odd: Vec<f64> = g.vc().to_vec();
    assert_eq!(velocity_integral(&g, &odd), 0.0);
}

// Oracle: adaptive quadrature of the normalized Gaussian over [-6, 6] gives 1 to 30 digits.
#[test]
fn gaussian_mass() {
    let g = make_grid(1, 1.0, 8, 6.0, 128).unwrap();
    let vals: Vec<f64> = g.vc().iter().map(|v| (-v * v / 0.2).exp() / (0.2 * std::f64::consts::PI).sqrt()).collect();
    assert!((velocity_integral(&g, &vals) - 1.0).abs() < 1e-6);
}

#[test]
fn weights_in_three_dimensions() {
    let g = make_grid(3, 2.0, 4, 1.5, 6).unwrap();
    let ones = vec![1.0; g.n_vel()];
    assert!((velocity_integral(&g, &ones) / 27.0 - 1.0).abs() < 1e-12);
    for node in 0..g.n_vel() {
        let m = g.mirror_node(node);
        for a in 0..3 {
            assert_eq!(g.v(m, a), -g.v(node, a));
        }
    }
}
