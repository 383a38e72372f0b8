use moving_optimum::asymptotics::{critical_speeds_scaled, predict};
use moving_optimum::simulator::{
    reproduce_asexual, reproduce_infinitesimal, Distribution, Problem, Reproduction, SolverOptions,
    Stepper,
};
use moving_optimum::{Grid, Kernel, ModelParams, Mode, Order, Selection};
use proptest::prelude::*;

fn kernel() -> impl Strategy<Value = Kernel> {
    prop_oneof![
        Just(Kernel::Diffusion),
        Just(Kernel::Uniform),
        Just(Kernel::Gaussian),
        Just(Kernel::Exponential),
        (0.3f64..3.0).prop_map(|shape| Kernel::Gamma { shape }),
    ]
}

fn selection() -> impl Strategy<Value = Selection> {
    prop_oneof![
        Just(Selection::Quadratic),
        (0.0f64..0.1).prop_map(|a6| Selection::SuperQuadratic { a6 }),
        (0.2f64..2.0).prop_map(|m_inf| Selection::Bounded { m_inf }),
    ]
}

proptest! {
    #[test]
    fn lagrangian_is_the_conjugate(k in kernel(), c in 0.0f64..1.5) {
        let l = k.lagrangian(c).unwrap();
        let p0 = l.slope;
        prop_assert!(l.value >= 0.0);
        prop_assert!((k.conjugacy_speed(p0).unwrap() - c).abs() < 1e-9 * c.max(1.0));
        let h = k.hamiltonian(p0).unwrap();
        prop_assert!((l.value - (p0 * c - h)).abs() < 1e-12 * l.value.max(1.0));
        // Fenchel-Young: pc - H(p) <= L(c) for every admissible p.
        for t in [-0.5, 0.3, 0.9, 1.1] {
            let p = t * p0;
            if p.abs() < k.p_max() {
                prop_assert!(p * c - k.hamiltonian(p).unwrap() <= l.value + 1e-12);
            }
        }
    }

    #[test]
    fn lagrangian_is_convex(k in kernel(), c in 0.0f64..1.2, d in 0.001f64..0.2) {
        let l = |c: f64| k.lagrangian(c).unwrap().value;
        prop_assert!(l(c) + l(c + 2.0 * d) - 2.0 * l(c + d) >= -1e-12);
        prop_assert!(l(c + d) >= l(c));
    }

    #[test]
    fn lagrangian_inverse_round_trips(k in kernel(), c in 0.01f64..1.5) {
        let v = k.lagrangian(c).unwrap().value;
        prop_assert!((k.lagrangian_inverse(v).unwrap() - c).abs() < 1e-8 * c.max(1.0));
    }

    #[test]
    fn selection_is_a_nonnegative_well(sel in selection(), z in -4.0f64..4.0) {
        prop_assert_eq!(sel.m(0.0), 0.0);
        prop_assert!(sel.m(z) >= 0.0);
        prop_assert!((sel.m(z) - sel.m(-z)).abs() < 1e-15);
        let h = 1e-5;
        let fd = (sel.m(z + h) - sel.m(z - h)) / (2.0 * h);
        prop_assert!((fd - sel.m1(z)).abs() < 1e-6 * sel.m1(z).abs().max(1.0));
    }

    #[test]
    fn convex_gradient_inverse_hits_the_gradient(sel in selection(), t in 0.0f64..0.95) {
        let g = match sel.max_gradient() {
            Some((_, g_max)) => t * g_max,
            None => 3.0 * t,
        };
        let z = sel.gradient_inverse_convex(g).unwrap();
        prop_assert!(z >= 0.0);
        prop_assert!((sel.m1(z) - g).abs() < 1e-9 * g.max(1.0));
        if let Some(zi) = sel.inflection() {
            prop_assert!(z <= zi + 1e-12);
        }
    }

    #[test]
    fn extinction_speed_ignores_selection(k in kernel(), a in selection(), b in selection()) {
        let sa = critical_speeds_scaled(Mode::Asexual, Some(&k), &a, 0.1, 0.0).unwrap().c_star;
        let sb = critical_speeds_scaled(Mode::Asexual, Some(&k), &b, 0.1, 0.0).unwrap().c_star;
        prop_assert!((sa - sb).abs() <= 1e-12 * sa);
    }

    #[test]
    fn scaling_round_trips(beta in 0.2f64..5.0, alpha in 0.05f64..5.0, sigma in 0.01f64..0.5, c in 0.0f64..1.0) {
        let p = ModelParams { beta, mu0: 0.0, alpha, sigma, c };
        for mode in [Mode::Asexual, Mode::Infinitesimal] {
            let s = p.to_scaled(mode);
            prop_assert!((p.speed_from_scaled(s.c, mode) - c).abs() <= 1e-14 * c.max(1.0));
            prop_assert!((s.eps - sigma * (alpha / beta).sqrt()).abs() < 1e-15);
        }
        prop_assert!((p.lambda_from_scaled(p.lambda_to_scaled(0.3)) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn infinitesimal_correction_shrinks_the_variance(c in 0.0f64..1.0, eps in 0.02f64..0.3) {
        let pr = predict(Mode::Infinitesimal, &Kernel::Gaussian, &Selection::Quadratic, eps, c, Order::FirstCorrection).unwrap();
        prop_assert!(pr.var() < eps * eps);
        prop_assert!(pr.lambda() < pr.lambda0);
        prop_assert!(pr.zstar() < pr.zstar0 + 1e-15);
    }

    #[test]
    fn steps_keep_unit_mass_and_positivity(
        rule in prop_oneof![
            Just(Reproduction::Infinitesimal),
            kernel().prop_map(|kernel| Reproduction::Asexual { kernel }),
        ],
        sel in selection(),
        c in 0.0f64..1.0,
        mean in -0.5f64..0.5,
        var in 0.005f64..0.05,
    ) {
        let grid = Grid::symmetric(1.5, 0.01).unwrap();
        let problem = Problem { selection: sel, reproduction: rule, eps: 0.1, c };
        let stepper = Stepper::new(&problem, grid, &SolverOptions::default()).unwrap();
        let mut p = Distribution::gaussian(grid, mean, var).unwrap();
        for _ in 0..5 {
            stepper.step(&mut p.values).unwrap();
        }
        prop_assert!((p.mass() - 1.0).abs() < 1e-12);
        prop_assert!(p.values.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn reproduction_preserves_the_mean(mean in -0.3f64..0.3, var in 0.002f64..0.03) {
        let grid = Grid::symmetric(2.0, 0.01).unwrap();
        let f = Distribution::gaussian(grid, mean, var).unwrap();
        let g = reproduce_asexual(&f, &Kernel::Uniform, 0.1).unwrap().moments();
        prop_assert!((g.mean - mean).abs() < 1e-10);
        let mut h = reproduce_infinitesimal(&f, 0.1).unwrap();
        h.normalize().unwrap();
        prop_assert!((h.moments().mean - mean).abs() < 1e-10);
    }
}
