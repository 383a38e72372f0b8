//! Discrete convolutions used by the reproduction operators. The direct O(N²)
//! loops are the reference; the FFT path must agree with them to round-off.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

/// How convolutions are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConvolutionMethod {
    /// Direct summation. Errors are relative to the local values, so far tails
    /// keep their true (tiny) magnitudes.
    #[default]
    Direct,
    /// Zero-padded FFT. Errors are relative to the maximum, so values far below
    /// 1e-16 of the peak are noise.
    Fft,
}

/// Whether data-parallel loops may use the rayon pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    /// Uses rayon when the `parallel` feature is enabled, sequential otherwise.
    #[default]
    Parallel,
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Below this many output nodes the parallel loops run sequentially.
#[cfg(feature = "parallel")]
const PAR_MIN_LEN: usize = 1024;

fn fill<F>(out: &mut [f64], exec: Execution, f: F)
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() && out.len() >= PAR_MIN_LEN {
        use rayon::prelude::*;
        out.par_iter_mut().enumerate().for_each(|(i, o)| *o = f(i));
        return;
    }
    let _ = exec;
    for (i, o) in out.iter_mut().enumerate() {
        *o = f(i);
    }
}

/// out[i] = Σ_k w[K + k]·p[i − k] for a centred stencil of length 2K + 1, with
/// zeros outside the grid.
pub fn centered_direct(p: &[f64], w: &[f64], exec: Execution) -> Vec<f64> {
    assert!(w.len() % 2 == 1, "stencil length must be odd");
    let n = p.len();
    let half = (w.len() / 2) as i64;
    let mut out = vec![0.0; n];
    fill(&mut out, exec, |i| {
        let lo = (i as i64 - half).max(0) as usize;
        let hi = ((i as i64 + half) as usize).min(n - 1);
        let mut acc = 0.0;
        for j in lo..=hi {
            acc += w[(half + i as i64 - j as i64) as usize] * p[j];
        }
        acc
    });
    out
}

/// out[j] = Σ_{i1 + i2 = 2j} p[i1]·p[i2], the self-convolution sampled at even
/// indices, which lands back on the original nodes.
pub fn even_self_direct(p: &[f64], exec: Execution) -> Vec<f64> {
    let n = p.len();
    let mut out = vec![0.0; n];
    fill(&mut out, exec, |j| {
        let k = 2 * j;
        let lo = k.saturating_sub(n - 1);
        let mut acc = 0.0;
        for i in lo..j {
            acc += p[i] * p[k - i];
        }
        2.0 * acc + p[j] * p[j]
    });
    out
}

/// Full linear convolution through a zero-padded complex FFT.
pub fn full_fft(a: &[f64], b: &[f64]) -> Vec<f64> {
    let len = a.len() + b.len() - 1;
    let size = len.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    // Pack a in the real part and b in the imaginary part: one forward transform.
    let mut buf: Vec<Complex<f64>> = (0..size)
        .map(|i| Complex::new(*a.get(i).unwrap_or(&0.0), *b.get(i).unwrap_or(&0.0)))
        .collect();
    fwd.process(&mut buf);
    let mut prod = vec![Complex::new(0.0, 0.0); size];
    for k in 0..size {
        let x = buf[k];
        let y = buf[(size - k) % size].conj();
        let fa = (x + y) * 0.5;
        let fb = (x - y) * Complex::new(0.0, -0.5);
        prod[k] = fa * fb;
    }
    inv.process(&mut prod);
    let scale = 1.0 / size as f64;
    prod[..len].iter().map(|v| v.re * scale).collect()
}

pub fn centered_fft(p: &[f64], w: &[f64]) -> Vec<f64> {
    let half = w.len() / 2;
    let full = full_fft(p, w);
    full[half..half + p.len()].to_vec()
}

pub fn even_self_fft(p: &[f64]) -> Vec<f64> {
    let full = full_fft(p, p);
    (0..p.len()).map(|j| full[2 * j]).collect()
}

pub fn centered(p: &[f64], w: &[f64], method: ConvolutionMethod, exec: Execution) -> Vec<f64> {
    match method {
        ConvolutionMethod::Direct => centered_direct(p, w, exec),
        ConvolutionMethod::Fft => centered_fft(p, w),
    }
}

pub fn even_self(p: &[f64], method: ConvolutionMethod, exec: Execution) -> Vec<f64> {
    match method {
        ConvolutionMethod::Direct => even_self_direct(p, exec),
        ConvolutionMethod::Fft => even_self_fft(p),
    }
}
