use moving_optimum::asymptotics::*;
use moving_optimum::{Grid, Kernel, Selection};

#[test]
fn diffusion_quadratic_profile_is_exact() {
    let g = Grid::symmetric(3.0, 0.01).unwrap();
    for c in [0.0, 0.3, 0.8] {
        let p = asexual_u0(&Kernel::Diffusion, &Selection::Quadratic, c, &g).unwrap();
        let err = p
            .z
            .iter()
            .zip(&p.u0)
            .map(|(z, u)| (u - (c * z + 0.5 * z * z)).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-9, "c={c}: {err}");
    }
}

#[test]
fn infinitesimal_series_small_step_tail() {
    // Quadratic: log(1 + h²/2·4⁻ⁿ) summed exactly vs the hybrid series.
    let g = Grid::new(-0.8, 0.2, 0.01).unwrap();
    let c = 0.3;
    let p = infinitesimal_u1(&Selection::Quadratic, c, &g).unwrap();
    for (z, u) in p.z.iter().zip(p.u1.as_ref().unwrap()) {
        let h = z + c;
        let mut exact = 2.0 * c * h;
        for n in 0..200 {
            let hn = h / 2f64.powi(n);
            exact += 2f64.powi(n) * (0.5 * hn * hn).ln_1p();
        }
        assert!((u - exact).abs() < 1e-11, "{z}: {u} vs {exact}");
    }
}
