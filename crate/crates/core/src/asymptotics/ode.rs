//! Adaptive Dormand–Prince 5(4) integrator that reports the state at a list of
//! output abscissae. Small and allocation-light: the profile ODEs have 3 states.

use crate::error::{Error, Result};

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
}

/// Integrates y′ = f(x, y) from (x0, y0) through the increasing abscissae `xs`
/// (all > x0), returning the state at each. `f` returns `None` when the state
/// leaves its domain; the step is then rejected and shrunk.
pub fn integrate<const N: usize, F>(
    f: F,
    x0: f64,
    y0: [f64; N],
    xs: &[f64],
    tol: &Tolerance,
) -> Result<Vec<[f64; N]>>
where
    F: Fn(f64, &[f64; N]) -> Option<[f64; N]>,
{
    let mut out = Vec::with_capacity(xs.len());
    let (mut x, mut y) = (x0, y0);
    let span = xs.last().map_or(0.0, |&l| l - x0);
    let mut h = (span * 1e-3).max(1e-8);
    let mut k0 = f(x, &y).ok_or(Error::Singularity { z: x })?;
    for &target in xs {
        while x < target {
            let step = h.min(target - x);
            let last = step >= target - x;
            match try_step(&f, x, &y, &k0, step) {
                Some((ynew, knew, err)) => {
                    let scale = (0..N)
                        .map(|i| {
                            let sc = tol.atol + tol.rtol * y[i].abs().max(ynew[i].abs());
                            (err[i] / sc).powi(2)
                        })
                        .sum::<f64>()
                        / N as f64;
                    let e = scale.sqrt();
                    if e <= 1.0 {
                        x = if last { target } else { x + step };
                        y = ynew;
                        k0 = knew;
                    }
                    let fac = if e == 0.0 {
                        5.0
                    } else {
                        (0.9 * e.powf(-0.2)).clamp(0.2, 5.0)
                    };
                    h = step * fac;
                }
                None => h = step * 0.25,
            }
            if h < 1e-14 * x.abs().max(1.0) {
                return Err(Error::Singularity { z: x });
            }
        }
        out.push(y);
    }
    Ok(out)
}

#[allow(clippy::type_complexity)]
fn try_step<const N: usize, F>(
    f: &F,
    x: f64,
    y: &[f64; N],
    k0: &[f64; N],
    h: f64,
) -> Option<([f64; N], [f64; N], [f64; N])>
where
    F: Fn(f64, &[f64; N]) -> Option<[f64; N]>,
{
    let mut k = [[0.0; N]; 7];
    k[0] = *k0;
    for s in 1..7 {
        let mut ys = *y;
        for (j, kj) in k.iter().enumerate().take(s) {
            for i in 0..N {
                ys[i] += h * A[s][j] * kj[i];
            }
        }
        k[s] = f(x + C[s] * h, &ys)?;
        if k[s].iter().any(|v| !v.is_finite()) {
            return None;
        }
    }
    let mut y5 = *y;
    let mut err = [0.0; N];
    for i in 0..N {
        let (mut s5, mut s4) = (0.0, 0.0);
        for s in 0..7 {
            s5 += B5[s] * k[s][i];
            s4 += B4[s] * k[s][i];
        }
        y5[i] += h * s5;
        err[i] = h * (s5 - s4);
    }
    // FSAL: the last stage is f at the new point.
    Some((y5, k[6], err))
}
