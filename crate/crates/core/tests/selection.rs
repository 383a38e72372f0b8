use approx::assert_abs_diff_eq;
use moving_optimum::selection::*;
use moving_optimum::Error;

#[test]
fn closed_form_derivatives() {
    assert_eq!(Selection::Quadratic.derivs(1.0), [0.5, 1.0, 1.0, 0.0]);
    let b = Selection::Bounded { m_inf: 0.5 };
    assert_eq!(b.derivs(0.0), [0.0, 0.0, 1.0, 0.0]);
    let b1 = Selection::Bounded { m_inf: 1.0 };
    assert_abs_diff_eq!(b1.m1(1.0), 0.606_530_659_712_633_4, epsilon = 1e-15);
}

#[test]
fn derivatives_match_finite_differences() {
    let fams = [
        Selection::Quadratic,
        Selection::super_quadratic_default(),
        Selection::Bounded { m_inf: 0.5 },
    ];
    let h = 1e-5;
    for s in fams {
        for z in [-2.0, -0.7, 0.3, 1.4] {
            let d = s.derivs(z);
            let (dp, dm) = (s.derivs(z + h), s.derivs(z - h));
            for j in 0..3 {
                let fd = (dp[j] - dm[j]) / (2.0 * h);
                assert!((fd - d[j + 1]).abs() < 1e-7 * (1.0 + d[j + 1].abs()));
            }
            let fd4 = (dp[3] - dm[3]) / (2.0 * h);
            assert!((fd4 - s.m4(z)).abs() < 1e-6 * (1.0 + fd4.abs()));
        }
    }
}

#[test]
fn inverses() {
    assert_abs_diff_eq!(Selection::Quadratic.inverse_pos(0.08).unwrap(), 0.4, epsilon = 1e-15);
    assert_eq!(Selection::Bounded { m_inf: 0.5 }.inverse_pos(0.0).unwrap(), 0.0);
    assert!(matches!(
        Selection::Bounded { m_inf: 0.5 }.inverse_pos(0.5),
        Err(Error::BeyondRange { .. })
    ));
    let sq = Selection::super_quadratic_default();
    let z = sq.inverse_pos(3.0).unwrap();
    assert_abs_diff_eq!(sq.m(z), 3.0, epsilon = 1e-12);
}

#[test]
fn gradient_roots() {
    assert_eq!(Selection::Quadratic.gradient_inverse_convex(0.3).unwrap(), 0.3);
    assert_eq!(Selection::Quadratic.gradient_inverse_concave(0.3).unwrap(), None);
    let b = Selection::Bounded { m_inf: 1.0 };
    let zs = b.gradient_inverse_convex(0.3).unwrap();
    let zu = b.gradient_inverse_concave(0.3).unwrap().unwrap();
    assert!(zs < 1.0 && zu > 1.0);
    assert_abs_diff_eq!(b.m1(zs), 0.3, epsilon = 1e-13);
    assert_abs_diff_eq!(b.m1(zu), 0.3, epsilon = 1e-13);
    assert!(matches!(
        b.gradient_inverse_convex(0.7),
        Err(Error::BeyondGradient { .. })
    ));
}

#[test]
fn bounded_gradient_peak_matches_dense_grid() {
    for m_inf in [0.25, 0.5, 1.0, 2.0] {
        let b = Selection::Bounded { m_inf };
        let (zi, gmax) = b.max_gradient().unwrap();
        let (zg, gg) = (0..200_000)
            .map(|i| i as f64 * 1e-5 * 5.0)
            .map(|z| (z, b.m1(z)))
            .fold((0.0, 0.0), |a, x| if x.1 > a.1 { x } else { a });
        assert!((zg - zi).abs() < 1e-4);
        assert!((gg - gmax).abs() < 1e-9);
    }
}

#[test]
fn shapes() {
    for z in [-1.0, 0.5, 2.0] {
        for t in [ShapeTest::Asexual, ShapeTest::Infinitesimal] {
            assert_eq!(Selection::Quadratic.classify_shape(z, t), Shape::Quadratic);
        }
    }
    let sq = Selection::super_quadratic_default();
    assert_eq!(sq.classify_shape(1.0, ShapeTest::Asexual), Shape::SuperQuadratic);
    assert_eq!(sq.classify_shape(1.0, ShapeTest::Infinitesimal), Shape::SuperQuadratic);
    assert_eq!(sq.classify_shape(-1.0, ShapeTest::Infinitesimal), Shape::SuperQuadratic);
    let b = Selection::Bounded { m_inf: 0.5 };
    assert_eq!(b.classify_shape(1.5, ShapeTest::Asexual), Shape::SubQuadratic);
    assert_eq!(b.classify_shape(-0.5, ShapeTest::Infinitesimal), Shape::SubQuadratic);
}
