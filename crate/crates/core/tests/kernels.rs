use approx::assert_abs_diff_eq;
use moving_optimum::kernels::*;
use moving_optimum::Error;

#[test]
fn table_values() {
    assert_eq!(Kernel::Gaussian.hamiltonian(0.0).unwrap(), 0.0);
    assert_abs_diff_eq!(
        Kernel::Gaussian.hamiltonian(1.0).unwrap(),
        0.648_721_270_7,
        epsilon = 1e-10
    );
    assert_abs_diff_eq!(Kernel::Exponential.hamiltonian(1.0).unwrap(), 1.0, epsilon = 1e-14);
    assert_abs_diff_eq!(
        Kernel::Gamma { shape: 1.0 }.hamiltonian(1.0).unwrap(),
        1.0,
        epsilon = 1e-14
    );
}

#[test]
fn derivatives_at_origin() {
    for k in Kernel::all() {
        let (d1, d2) = k.hamiltonian_derivs(0.0).unwrap();
        assert_abs_diff_eq!(d1, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d2, 1.0, epsilon = 1e-14);
    }
    assert_eq!(Kernel::Diffusion.hamiltonian_derivs(0.3).unwrap(), (0.3, 1.0));
    let (d1, d2) = Kernel::Gaussian.hamiltonian_derivs(0.5).unwrap();
    let e = 0.125_f64.exp();
    assert_abs_diff_eq!(d1, 0.5 * e, epsilon = 1e-15);
    assert_abs_diff_eq!(d2, 1.25 * e, epsilon = 1e-15);
}

#[test]
fn domain_errors() {
    assert!(matches!(
        Kernel::Exponential.hamiltonian(1.5),
        Err(Error::Domain { .. })
    ));
    assert!(Kernel::gamma_default().hamiltonian(0.9).is_err());
    assert!(Kernel::Gaussian.hamiltonian(f64::NAN).is_err());
}

#[test]
fn uniform_series_and_closed_form_branches_agree() {
    // H(p) = sinh(x)/x − 1 with x = √3·p; the series branch takes over below x = 0.5.
    let r3 = 3.0_f64.sqrt();
    for x in [0.49, 0.4999999, 0.5, 0.5000001] {
        let a = Kernel::Uniform.derivatives(x / r3).unwrap();
        let (s, c) = (x.sinh(), x.cosh());
        let (x2, x3, x4) = (x * x, x * x * x, x * x * x * x);
        let b = [
            s / x - 1.0,
            r3 * (c / x - s / x2),
            3.0 * (s / x - 2.0 * c / x2 + 2.0 * s / x3),
            3.0 * r3 * (c / x - 3.0 * s / x2 + 6.0 * c / x3 - 6.0 * s / x4),
        ];
        for j in 0..4 {
            assert_abs_diff_eq!(a[j], b[j], epsilon = 1e-10);
        }
    }
}

#[test]
fn third_derivative_matches_finite_difference() {
    for k in Kernel::all() {
        for p in [-0.6, -0.1, 0.0, 0.2, 0.7] {
            let h = 1e-5;
            let fd = (k.derivatives(p + h).unwrap()[2] - k.derivatives(p - h).unwrap()[2])
                / (2.0 * h);
            let d3 = k.derivatives(p).unwrap()[3];
            assert!((fd - d3).abs() < 1e-6 * (1.0 + d3.abs()), "{k:?} p={p}");
        }
    }
}

#[test]
fn diffusion_lagrangian() {
    let l = Kernel::Diffusion.lagrangian(0.4).unwrap();
    assert_abs_diff_eq!(l.value, 0.08, epsilon = 1e-15);
    assert_abs_diff_eq!(l.slope, 0.4, epsilon = 1e-15);
    assert_abs_diff_eq!(l.curvature, 1.0, epsilon = 1e-15);
    for k in Kernel::all() {
        let l = k.lagrangian(0.0).unwrap();
        assert_eq!((l.value, l.slope), (0.0, 0.0));
        assert_abs_diff_eq!(l.curvature, 1.0, epsilon = 1e-14);
    }
}

#[test]
fn lagrangian_inverse_roundtrip() {
    for k in Kernel::all() {
        for v in [1e-6, 0.01, 0.5, 1.0, 3.0] {
            let c = k.lagrangian_inverse(v).unwrap();
            assert_abs_diff_eq!(k.lagrangian(c).unwrap().value, v, epsilon = 1e-11);
        }
    }
    assert_abs_diff_eq!(
        Kernel::Diffusion.lagrangian_inverse(0.5).unwrap(),
        1.0,
        epsilon = 1e-12
    );
}

#[test]
fn oracle_boundary_error() {
    let s: Vec<(f64, f64)> = (0..10).map(|i| (i as f64 * 0.01, 0.0)).collect();
    assert_eq!(legendre_numeric_oracle(&s, 1.0), Err(Error::Bracket));
}

#[test]
fn densities_have_unit_mass_and_variance() {
    for k in Kernel::all().into_iter().skip(1).chain([Kernel::Gamma { shape: 2.5 }]) {
        // Integrate via the CDF for mass and via substitution-free quadrature for the
        // second moment on a fine grid away from possible singularities at 0.
        let w = k.support_half_width();
        assert_abs_diff_eq!(k.cdf(w) - k.cdf(-w), 1.0, epsilon = 1e-12);
        let n = 400_000;
        let h = w / n as f64;
        let mut m2 = 0.0;
        for i in 0..n {
            let y = (i as f64 + 0.5) * h;
            m2 += 2.0 * y * y * k.density(y) * h;
        }
        assert!((m2 - 1.0).abs() < 1e-6, "{k:?}: {m2}");
    }
}
