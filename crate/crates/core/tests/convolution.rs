use moving_optimum::simulator::{
    centered, centered_direct, centered_fft, even_self, even_self_direct, even_self_fft, full_fft,
    ConvolutionMethod, Execution,
};
use proptest::prelude::*;

// Plain double loop over every pair of indices.
fn naive_full(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn sup(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

fn assert_close(a: &[f64], b: &[f64], rel: f64) {
    assert_eq!(a.len(), b.len());
    let scale = sup(b).max(1e-300);
    for (x, y) in a.iter().zip(b) {
        assert!((x - y).abs() <= rel * scale, "{x} vs {y}");
    }
}

fn bump(n: usize, centre: f64, width: f64) -> Vec<f64> {
    (0..n).map(|i| (-(i as f64 - centre).powi(2) / (2.0 * width * width)).exp()).collect()
}

#[test]
fn centered_direct_matches_the_pairwise_sum() {
    let p = bump(101, 40.0, 7.0);
    let w = bump(21, 10.0, 3.0);
    let full = naive_full(&p, &w);
    assert_close(&centered_direct(&p, &w, Execution::Sequential), &full[10..111], 1e-14);
}

#[test]
fn even_self_direct_matches_even_samples_of_the_pairwise_sum() {
    let p = bump(80, 30.0, 6.0);
    let full = naive_full(&p, &p);
    let even: Vec<f64> = (0..p.len()).map(|j| full[2 * j]).collect();
    assert_close(&even_self_direct(&p, Execution::Sequential), &even, 1e-14);
}

#[test]
fn fft_agrees_with_direct_on_a_wide_grid() {
    let p = bump(3001, 1400.0, 120.0);
    let w = bump(801, 400.0, 60.0);
    assert_close(&centered_fft(&p, &w), &centered_direct(&p, &w, Execution::Sequential), 1e-10);
    assert_close(&even_self_fft(&p), &even_self_direct(&p, Execution::Sequential), 1e-10);
}

#[test]
fn parallel_and_sequential_give_identical_bits() {
    let p = bump(4000, 2000.0, 300.0);
    let w = bump(301, 150.0, 40.0);
    assert_eq!(
        centered_direct(&p, &w, Execution::Parallel),
        centered_direct(&p, &w, Execution::Sequential)
    );
    assert_eq!(
        even_self_direct(&p, Execution::Parallel),
        even_self_direct(&p, Execution::Sequential)
    );
}

#[test]
fn dispatch_follows_the_method() {
    let p = bump(64, 30.0, 5.0);
    let w = bump(9, 4.0, 2.0);
    let d = centered(&p, &w, ConvolutionMethod::Direct, Execution::Sequential);
    let f = centered(&p, &w, ConvolutionMethod::Fft, Execution::Sequential);
    assert_eq!(d, centered_direct(&p, &w, Execution::Sequential));
    assert_eq!(f, centered_fft(&p, &w));
    assert_eq!(
        even_self(&p, ConvolutionMethod::Fft, Execution::Sequential),
        even_self_fft(&p)
    );
}

#[test]
fn unit_impulse_returns_the_stencil() {
    let mut p = vec![0.0; 31];
    p[15] = 1.0;
    let w = vec![0.1, 0.2, 0.4, 0.2, 0.1];
    let out = centered_direct(&p, &w, Execution::Sequential);
    assert_eq!(&out[13..18], &w[..]);
    assert!(out[..13].iter().chain(&out[18..]).all(|v| *v == 0.0));
}

proptest! {
    #[test]
    fn full_fft_matches_pairwise_sum(
        a in prop::collection::vec(0.0f64..1.0, 1..200),
        b in prop::collection::vec(0.0f64..1.0, 1..60),
    ) {
        let got = full_fft(&a, &b);
        let want = naive_full(&a, &b);
        let scale = sup(&want).max(1.0);
        for (x, y) in got.iter().zip(&want) {
            prop_assert!((x - y).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn centered_fft_matches_direct(
        p in prop::collection::vec(0.0f64..1.0, 3..300),
        half in 0usize..40,
        seed in 0.0f64..1.0,
    ) {
        let w: Vec<f64> = (0..2 * half + 1).map(|k| 1.0 + seed * (k as f64).sin()).collect();
        let d = centered_direct(&p, &w, Execution::Sequential);
        let f = centered_fft(&p, &w);
        let scale = sup(&d).max(1e-300);
        for (x, y) in f.iter().zip(&d) {
            prop_assert!((x - y).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn even_self_is_symmetric_in_reversal(p in prop::collection::vec(0.0f64..1.0, 2..200)) {
        let fwd = even_self_direct(&p, Execution::Sequential);
        let rev: Vec<f64> = p.iter().rev().cloned().collect();
        let back = even_self_direct(&rev, Execution::Sequential);
        for (x, y) in fwd.iter().zip(back.iter().rev()) {
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }
}
