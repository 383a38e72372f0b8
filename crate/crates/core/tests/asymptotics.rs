use approx::assert_abs_diff_eq;
use moving_optimum::asymptotics::*;
use moving_optimum::{Error, Kernel, ModelParams, Mode, Order, Selection};

#[test]
fn diffusion_quadratic_closed_forms() {
    let p = asexual_leading(&Kernel::Diffusion, &Selection::Quadratic, 0.1, 0.4).unwrap();
    assert_abs_diff_eq!(p.lambda0, 0.92, epsilon = 1e-14);
    assert_abs_diff_eq!(p.zstar0, -0.4, epsilon = 1e-14);
    assert_abs_diff_eq!(p.var_leading, 0.1, epsilon = 1e-14);
    let q = asexual_correction(&Kernel::Diffusion, &Selection::Quadratic, 0.1, 0.4).unwrap();
    assert_abs_diff_eq!(q.lambda1, -0.5, epsilon = 1e-14);
    assert_abs_diff_eq!(q.lambda(), 0.87, epsilon = 1e-14);
    // Exact Gaussian equilibrium: mean −c, variance ε.
    assert_abs_diff_eq!(q.zstar(), -0.4, epsilon = 1e-13);
    assert_abs_diff_eq!(q.var_correction, 0.1, epsilon = 1e-13);
}

#[test]
fn rest_state() {
    for k in Kernel::all() {
        let p = asexual_leading(&k, &Selection::Quadratic, 0.1, 0.0).unwrap();
        assert_eq!((p.lambda0, p.zstar0, p.var_leading), (1.0, 0.0, 0.1));
        let q = predict(Mode::Asexual, &k, &Selection::Quadratic, 0.1, 0.0, Order::FirstCorrection)
            .unwrap();
        assert_eq!(q.lambda1, -0.5);
    }
    assert!(matches!(
        asexual_correction(&Kernel::Gaussian, &Selection::Quadratic, 0.1, 1e-7),
        Err(Error::Degenerate(_))
    ));
}

#[test]
fn rest_limits_match_small_speed() {
    let sels = [
        Selection::Quadratic,
        Selection::super_quadratic_default(),
        Selection::Bounded { m_inf: 0.5 },
    ];
    for k in Kernel::all() {
        for s in sels {
            let at_rest = predict(Mode::Asexual, &k, &s, 0.1, 0.0, Order::FirstCorrection).unwrap();
            let small = asexual_correction(&k, &s, 0.1, 2e-3).unwrap();
            assert!((at_rest.var_correction - small.var_correction).abs() < 1e-4, "{k:?} {s:?}");
            assert!(small.zstar1.abs() < 1e-2);
        }
    }
}

#[test]
fn asexual_tipping() {
    let b = Selection::Bounded { m_inf: 0.5 };
    let c = Kernel::Gaussian.lagrangian_inverse(0.6).unwrap();
    assert!(matches!(
        asexual_leading(&Kernel::Gaussian, &b, 0.1, c),
        Err(Error::Tipping { .. })
    ));
}

#[test]
fn infinitesimal_closed_forms() {
    let p = infinitesimal_leading(&Selection::Quadratic, 0.1, 0.3).unwrap();
    assert_abs_diff_eq!(p.zstar0, -0.3, epsilon = 1e-15);
    assert_abs_diff_eq!(p.lambda0, 0.955, epsilon = 1e-15);
    assert_abs_diff_eq!(p.var_leading, 0.01, epsilon = 1e-15);
    let q = infinitesimal_correction(&Selection::Quadratic, 0.1, 0.3).unwrap();
    assert_abs_diff_eq!(q.zstar(), -0.306, epsilon = 1e-14);
    assert_abs_diff_eq!(q.lambda(), 0.9482, epsilon = 1e-14);
    assert_abs_diff_eq!(q.var(), 0.01 / 1.02, epsilon = 1e-15);
    let r = infinitesimal_correction(&Selection::Quadratic, 0.1, 0.0).unwrap();
    assert_abs_diff_eq!(r.lambda(), 1.0 - 0.005, epsilon = 1e-15);
    assert!(matches!(
        infinitesimal_leading(&Selection::Bounded { m_inf: 1.0 }, 0.1, 0.7),
        Err(Error::Tipping { .. })
    ));
}

#[test]
fn lag_correction_sign_depends_on_m3() {
    let c = 0.3;
    let sq = infinitesimal_correction(&Selection::super_quadratic_default(), 0.1, c).unwrap();
    let b = infinitesimal_correction(&Selection::Bounded { m_inf: 1.0 }, 0.1, c).unwrap();
    let q = infinitesimal_correction(&Selection::Quadratic, 0.1, c).unwrap();
    // m‴ < 0 at the lag for super-quadratic, > 0 for bounded, so the
    // corrections bracket the quadratic one.
    assert!(sq.zstar1 > q.zstar1 && b.zstar1 < q.zstar1);
}

#[test]
fn critical_speed_examples() {
    let p = ModelParams {
        beta: 1.0,
        mu0: 0.0,
        alpha: 1.0,
        sigma: 0.1,
        c: 0.0,
    };
    let s = critical_speeds(Mode::Asexual, Some(&Kernel::Diffusion), &Selection::Quadratic, &p)
        .unwrap();
    assert_abs_diff_eq!(s.c_star, 2.0_f64.sqrt() * 0.1, epsilon = 1e-12);
    let corr = s.c_star_corrected.unwrap();
    assert_abs_diff_eq!(corr, 2.0_f64.sqrt() * 0.1 * 0.95_f64.sqrt(), epsilon = 1e-12);
    assert_abs_diff_eq!(corr, 0.13784, epsilon = 1e-5);
    assert_eq!(s.c_tip, f64::INFINITY);

    let b = critical_speeds(
        Mode::Asexual,
        Some(&Kernel::Diffusion),
        &Selection::Bounded { m_inf: 0.5 },
        &p,
    )
    .unwrap();
    assert_abs_diff_eq!(b.c_tip, 0.1, epsilon = 1e-12);

    let i = critical_speeds(Mode::Infinitesimal, None, &Selection::Bounded { m_inf: 1.0 }, &p)
        .unwrap();
    assert_abs_diff_eq!(i.c_tip, 0.01 * (-0.5_f64).exp(), epsilon = 1e-15);
    assert_eq!(i.c_star, i.c_tip);
    let q = critical_speeds(Mode::Infinitesimal, None, &Selection::Quadratic, &p).unwrap();
    assert_abs_diff_eq!(q.c_star, 0.01 * 2.0_f64.sqrt(), epsilon = 1e-15);
    let expect = 2.0_f64.sqrt() * 0.01 * (1.0 - 0.005_f64).sqrt() / (1.0 + 0.04_f64).sqrt();
    assert_abs_diff_eq!(q.c_star_corrected.unwrap(), expect, epsilon = 1e-13);
}

#[test]
fn variance_trends() {
    let d = Kernel::Diffusion;
    for c in [0.1, 0.5, 1.3] {
        assert_eq!(variance_trend(&d, &Selection::Quadratic, c).unwrap(), Trend::Flat);
    }
    assert_eq!(
        variance_trend(&d, &Selection::Bounded { m_inf: 0.5 }, 0.9).unwrap(),
        Trend::Increasing
    );
    assert_eq!(
        variance_trend(&d, &Selection::super_quadratic_default(), 0.3).unwrap(),
        Trend::Decreasing
    );
    assert!(matches!(
        variance_trend(&d, &Selection::Bounded { m_inf: 0.5 }, 0.99999999),
        Err(Error::Tipping { .. })
    ));
}

#[test]
fn variance_trend_agrees_with_convexity_for_diffusion() {
    // With L(c) = c²/2 the variance is ∝ d/dc m⁻¹(L(c)), so its trend is the
    // sign of the curvature of c ↦ m⁻¹(c²/2).
    let sels = [
        Selection::super_quadratic_default(),
        Selection::Bounded { m_inf: 0.5 },
        Selection::Bounded { m_inf: 2.0 },
    ];
    for s in sels {
        for c in [0.2, 0.5, 0.8] {
            let phi = |c: f64| s.inverse_pos(0.5 * c * c).unwrap();
            let h = 1e-3;
            let curv = phi(c + h) - 2.0 * phi(c) + phi(c - h);
            let t = variance_trend(&Kernel::Diffusion, &s, c).unwrap();
            assert_eq!(t == Trend::Increasing, curv > 0.0, "{s:?} c={c}");
        }
    }
}
