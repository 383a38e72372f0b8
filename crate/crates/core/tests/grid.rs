use moving_optimum::grid::*;

#[test]
fn origin_is_a_node() {
    let g = Grid::new(-1.234, 0.777, 0.01).unwrap();
    let i = g.origin().unwrap();
    assert_eq!(g.z(i), 0.0);
    assert!(g.z_min() <= -1.234 && g.z_max() >= 0.777);
    let e = g.extended(3, 2);
    assert_eq!(e.z(e.origin().unwrap()), 0.0);
    assert_eq!(e.n, g.n + 5);
}

#[test]
fn trapezoid_is_exact_on_linear() {
    let g = Grid::new(0.0, 1.0, 0.1).unwrap();
    let v: Vec<f64> = g.nodes().iter().map(|z| 2.0 * z + 1.0).collect();
    assert!((trapezoid(&v, g.dz) - 2.0).abs() < 1e-14);
}
