use moving_optimum::error::Error;
use moving_optimum::simulator::{
    gaussian_stencil, kernel_stencil, reproduce_asexual, reproduce_infinitesimal, ConvolutionMethod,
    Distribution, Execution, Operator, Reproduction,
};
use moving_optimum::{Grid, Kernel};

const EPS: f64 = 0.1;

fn sup_rel(a: &[f64], b: &[f64]) -> f64 {
    let peak = b.iter().fold(0.0_f64, |m, v| m.max(*v));
    a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs())) / peak
}

fn gaussian_values(grid: &Grid, mean: f64, var: f64) -> Vec<f64> {
    let z = grid.nodes();
    let raw: Vec<f64> = z.iter().map(|z| (-(z - mean).powi(2) / (2.0 * var)).exp()).collect();
    let total: f64 = raw.iter().sum::<f64>() * grid.dz;
    raw.into_iter().map(|v| v / total).collect()
}

fn normalized(mut d: Distribution) -> Distribution {
    d.normalize().unwrap();
    d
}

#[test]
fn delta_spreads_into_a_gaussian_of_sd_eps() {
    let grid = Grid::symmetric(1.0, 0.005).unwrap();
    let d = Distribution::delta(grid, 0.2);
    let out = reproduce_asexual(&d, &Kernel::Gaussian, EPS).unwrap();
    let z0 = grid.z(grid.nearest(0.2));
    assert!(sup_rel(&out.values, &gaussian_values(&grid, z0, EPS * EPS)) < 1e-12);
}

#[test]
fn asexual_reproduction_preserves_mass_and_mean() {
    // Wide enough that the Gamma tail sent past the ends is below 1e-16.
    let grid = Grid::symmetric(5.0, 0.01).unwrap();
    let f = Distribution::gaussian(grid, -0.3, 0.02).unwrap();
    let before = f.moments();
    for k in Kernel::all().into_iter().filter(|k| *k != Kernel::Diffusion) {
        let after = reproduce_asexual(&f, &k, EPS).unwrap().moments();
        assert!((after.mass - before.mass).abs() < 1e-10, "{k:?} mass");
        assert!((after.mean - before.mean).abs() < 1e-10, "{k:?} mean");
        // A symmetric unit-variance kernel adds eps² to the variance.
        assert!((after.var - before.var - EPS * EPS).abs() < 2e-4, "{k:?} var {}", after.var);
    }
}

#[test]
fn stencils_are_symmetric_with_unit_sum() {
    for k in Kernel::all().into_iter().filter(|k| *k != Kernel::Diffusion) {
        let w = kernel_stencil(&k, EPS, 0.01, 10_000);
        assert_eq!(w.len() % 2, 1);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-13);
        for (a, b) in w.iter().zip(w.iter().rev()) {
            assert!((a - b).abs() < 1e-15);
        }
    }
    assert_eq!(gaussian_stencil(0.01, 0.01, 2).len(), 5);
}

#[test]
fn infinitesimal_delta_gives_half_eps_squared() {
    let grid = Grid::symmetric(1.0, 0.0025).unwrap();
    let d = Distribution::delta(grid, 0.1);
    let out = normalized(reproduce_infinitesimal(&d, EPS).unwrap());
    let m = out.moments();
    let z0 = grid.z(grid.nearest(0.1));
    assert!((m.mean - z0).abs() < 1e-12);
    assert!((m.var / (0.5 * EPS * EPS) - 1.0).abs() < 1e-6, "var {}", m.var);
    assert!(sup_rel(&out.values, &gaussian_values(&grid, z0, 0.5 * EPS * EPS)) < 1e-10);
}

#[test]
fn infinitesimal_halves_the_parental_variance() {
    let grid = Grid::symmetric(2.0, 0.0025).unwrap();
    for (mu, v) in [(0.0, 0.01), (-0.4, 0.03), (0.25, 0.002)] {
        let f = Distribution::gaussian(grid, mu, v).unwrap();
        let out = normalized(reproduce_infinitesimal(&f, EPS).unwrap());
        let want = 0.5 * v + 0.5 * EPS * EPS;
        let m = out.moments();
        assert!((m.mean - mu).abs() < 1e-10);
        assert!((m.var / want - 1.0).abs() < 1e-6, "var {} vs {want}", m.var);
        assert!(sup_rel(&out.values, &gaussian_values(&grid, mu, want)) < 1e-6);
    }
}

#[test]
fn gaussian_with_variance_eps_squared_is_a_fixed_point() {
    let grid = Grid::symmetric(1.5, 0.0025).unwrap();
    let f = Distribution::gaussian(grid, 0.2, EPS * EPS).unwrap();
    let out = normalized(reproduce_infinitesimal(&f, EPS).unwrap());
    assert!(sup_rel(&out.values, &f.values) < 1e-8);
}

#[test]
fn fft_operator_matches_direct() {
    let grid = Grid::symmetric(1.5, 0.005).unwrap();
    let f = Distribution::gaussian(grid, -0.2, 0.015).unwrap();
    for rule in [Reproduction::Asexual { kernel: Kernel::Exponential }, Reproduction::Infinitesimal] {
        let op = |method| Operator::new(rule, EPS, grid.dz, grid.n, method, Execution::Sequential).unwrap();
        let d = op(ConvolutionMethod::Direct).apply(&f.values).unwrap();
        let q = op(ConvolutionMethod::Fft).apply(&f.values).unwrap();
        assert!(sup_rel(&q, &d) < 1e-10);
    }
}

#[test]
fn diffusion_operator_adds_the_discrete_laplacian() {
    let grid = Grid::symmetric(1.0, 0.01).unwrap();
    let f = Distribution::gaussian(grid, 0.0, 0.02).unwrap();
    let rule = Reproduction::Asexual { kernel: Kernel::Diffusion };
    let op = Operator::new(rule, EPS, grid.dz, grid.n, ConvolutionMethod::Direct, Execution::Sequential).unwrap();
    assert!((op.diffusion_rate() - 100.0).abs() < 1e-9);
    let out = op.apply(&f.values).unwrap();
    let p = &f.values;
    let i = grid.n / 2;
    let lap = (p[i - 1] - 2.0 * p[i] + p[i + 1]) / (grid.dz * grid.dz);
    assert!((out[i] - (p[i] + 0.5 * EPS * EPS * lap)).abs() < 1e-12);
}

#[test]
fn under_resolved_kernels_are_rejected() {
    let grid = Grid::symmetric(1.0, 0.05).unwrap();
    let f = Distribution::gaussian(grid, 0.0, 0.05).unwrap();
    assert!(matches!(
        reproduce_asexual(&f, &Kernel::Gaussian, EPS),
        Err(Error::Resolution { .. })
    ));
    assert!(matches!(reproduce_infinitesimal(&f, EPS), Err(Error::Resolution { .. })));
}

#[test]
fn diffusion_has_no_convolution_form() {
    let grid = Grid::symmetric(1.0, 0.01).unwrap();
    let f = Distribution::gaussian(grid, 0.0, 0.05).unwrap();
    assert!(matches!(
        reproduce_asexual(&f, &Kernel::Diffusion, EPS),
        Err(Error::Invalid(_))
    ));
}

#[test]
fn empty_distribution_has_no_offspring() {
    let grid = Grid::symmetric(1.0, 0.01).unwrap();
    let f = Distribution::new(grid, vec![0.0; grid.n]).unwrap();
    assert!(matches!(reproduce_infinitesimal(&f, EPS), Err(Error::Degenerate(_))));
}
