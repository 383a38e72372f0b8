use serde::{Deserialize, Serialize};

use super::ode::{integrate, Tolerance};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::kernels::{Kernel, Lagrangian};
use crate::scaling::Mode;
use crate::selection::Selection;

/// Allowed residual of the limit Hamilton–Jacobi equation on the profile grid.
pub const U0_RESIDUAL_TOL: f64 = 1e-6;

/// Below this step the infinitesimal series switches to its Taylor tail.
const SERIES_TAYLOR_STEP: f64 = 1e-4;

/// Log-density profiles on a grid: F ≈ exp(−U₀/ε^γ − U₁).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub mode: Mode,
    pub z: Vec<f64>,
    pub u0: Vec<f64>,
    /// U₀′ on the grid.
    pub u0_slope: Vec<f64>,
    pub u1: Option<Vec<f64>>,
    /// Lag z₀* at which U₀ is minimal and U₁ vanishes.
    pub zstar0: f64,
    /// Max residual of the limit equation (zero for the exact infinitesimal U₀).
    pub residual: f64,
    /// Characteristic time s(z) = ∫ dz/(H′(U₀′) − c) from the launch points ±dz.
    #[serde(skip)]
    char_time: Vec<f64>,
}

impl Profile {
    /// Linear interpolation of a profile column at z.
    pub fn interpolate(values: &[f64], z_nodes: &[f64], z: f64) -> f64 {
        let n = z_nodes.len();
        if z <= z_nodes[0] {
            return values[0];
        }
        if z >= z_nodes[n - 1] {
            return values[n - 1];
        }
        let h = z_nodes[1] - z_nodes[0];
        let i = (((z - z_nodes[0]) / h).floor() as usize).min(n - 2);
        let t = (z - z_nodes[i]) / h;
        values[i] * (1.0 - t) + values[i + 1] * t
    }

    /// Normalised densities exp(−U₀/ε^γ) and, when U₁ is present, exp(−U₀/ε^γ − U₁),
    /// both with unit trapezoid mass on the profile grid.
    pub fn densities(&self, eps: f64) -> (Vec<f64>, Option<Vec<f64>>) {
        let eg = eps.powi(self.mode.gamma());
        let h = self.z[1] - self.z[0];
        let build = |log: Vec<f64>| {
            let top = log.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut f: Vec<f64> = log.iter().map(|l| (l - top).exp()).collect();
            let mass = crate::grid::trapezoid(&f, h);
            f.iter_mut().for_each(|v| *v /= mass);
            f
        };
        let f0 = build(self.u0.iter().map(|u| -u / eg).collect());
        let f1 = self.u1.as_ref().map(|u1| {
            build(
                self.u0
                    .iter()
                    .zip(u1)
                    .map(|(u0, u1)| -u0 / eg - u1)
                    .collect(),
            )
        });
        (f0, f1)
    }
}

/// U₀′(z) from the limit equation H(p) − cp = m(z) − L(c), on the branch
/// p ≷ L′(c) for z ≷ 0.
fn algebraic_slope(kernel: &Kernel, sel: &Selection, c: f64, lag: &Lagrangian, z: f64) -> Result<f64> {
    let p0 = lag.slope;
    if z == 0.0 {
        return Ok(p0);
    }
    let side = z.signum();
    let target = sel.m(z);
    let p_max = kernel.p_max();
    // t ↦ g(p₀ + side·t) is increasing on t ≥ 0.
    let g = |t: f64| -> Result<(f64, f64)> {
        let p = p0 + side * t;
        let d = kernel.derivatives(p)?;
        Ok((d[0] - c * p + lag.value - target, side * (d[1] - c)))
    };
    let room = p_max - side * p0;
    let mut hi = if room.is_finite() { 0.5 * room } else { 1.0 };
    let mut lo = 0.0;
    while g(hi)?.0 < 0.0 {
        lo = hi;
        hi = if room.is_finite() { 0.5 * (hi + room) } else { 2.0 * hi };
        if hi - lo < 1e-15 || hi > 1e8 {
            return Err(Error::Convergence(format!("no slope bracket at z = {z}")));
        }
    }
    let mut t = 0.5 * (lo + hi);
    for _ in 0..300 {
        let (f, df) = g(t)?;
        if f < 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let mut next = t - f / df;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - t).abs() <= 1e-15 * t.max(1.0) || hi - lo <= 1e-15 * hi.max(1.0) {
            return Ok(p0 + side * next);
        }
        t = next;
    }
    Err(Error::Convergence(format!("slope at z = {z} not refined")))
}

fn check_profile_grid(grid: &Grid) -> Result<usize> {
    let origin = grid
        .origin()
        .filter(|&i| i > 0 && i + 1 < grid.n)
        .ok_or_else(|| Error::Invalid("profile grid must straddle z = 0".into()))?;
    if grid.dz < 1e-8 {
        return Err(Error::Singularity { z: 0.0 });
    }
    Ok(origin)
}

/// Solves the asexual limit problem for U₀ by integrating
/// dU₀′/dz = m′(z)/(H′(U₀′) − c) outward from z = 0 on both sides.
pub fn asexual_u0(kernel: &Kernel, sel: &Selection, c: f64, grid: &Grid) -> Result<Profile> {
    if !(c >= 0.0) {
        return Err(Error::Invalid(format!("speed must be >= 0, got {c}")));
    }
    let origin = check_profile_grid(grid)?;
    let lag = kernel.lagrangian(c)?;
    let zstar0 = match sel.inverse_pos(lag.value) {
        Ok(z) => -z,
        Err(Error::BeyondRange { .. }) => {
            return Err(Error::Tipping {
                c,
                c_tip: super::asexual_tipping_speed(kernel, sel)?,
            })
        }
        Err(e) => return Err(e),
    };
    let n = grid.n;
    let h = grid.dz;
    let mut u0 = vec![0.0; n];
    let mut slope = vec![lag.slope; n];
    let mut s = vec![0.0; n];
    let tol = Tolerance {
        rtol: 1e-12,
        atol: 1e-13,
    };

    for side in [1.0_f64, -1.0] {
        let count = if side > 0.0 { n - 1 - origin } else { origin };
        // The right-hand side is 0/0 at the origin: launch one step out, with the
        // slope from the algebraic relation and U₀ from Simpson's rule.
        let p1 = algebraic_slope(kernel, sel, c, &lag, side * h)?;
        let ph = algebraic_slope(kernel, sel, c, &lag, side * 0.5 * h)?;
        let u1 = side * h / 6.0 * (lag.slope + 4.0 * ph + p1);
        let idx = |k: usize| if side > 0.0 { origin + k } else { origin - k };
        slope[idx(1)] = p1;
        u0[idx(1)] = u1;
        if count > 1 {
            let ws: Vec<f64> = (2..=count).map(|k| k as f64 * h).collect();
            let rhs = |w: f64, y: &[f64; 3]| -> Option<[f64; 3]> {
                let z = side * w;
                let d = kernel.derivatives(y[0]).ok()?;
                let gap = d[1] - c;
                if side * gap <= 0.0 {
                    return None;
                }
                Some([side * sel.m1(z) / gap, side * y[0], side / gap])
            };
            let states = integrate(rhs, h, [p1, u1, 0.0], &ws, &tol).map_err(|e| match e {
                Error::Singularity { z } => Error::Singularity { z: side * z },
                other => other,
            })?;
            for (k, y) in (2..=count).zip(states) {
                slope[idx(k)] = y[0];
                u0[idx(k)] = y[1];
                s[idx(k)] = y[2];
            }
        }
    }

    let z = grid.nodes();
    let mut residual: f64 = 0.0;
    for i in 0..n {
        let hval = kernel.hamiltonian(slope[i])?;
        let r = (1.0 - lag.value) + c * slope[i] + sel.m(z[i]) - 1.0 - hval;
        residual = residual.max(r.abs());
    }
    if residual > U0_RESIDUAL_TOL {
        return Err(Error::Convergence(format!(
            "U0 residual {residual:e} exceeds {U0_RESIDUAL_TOL:e}"
        )));
    }
    Ok(Profile {
        mode: Mode::Asexual,
        z,
        u0,
        u0_slope: slope,
        u1: None,
        zstar0,
        residual,
        char_time: s,
    })
}

/// U₀″(0), U₀‴(0) from differentiating the limit equation at the origin.
fn origin_jets(kernel: &Kernel, sel: &Selection, p0: f64) -> Result<(f64, f64, [f64; 4])> {
    let hd = kernel.derivatives(p0)?;
    let md = sel.derivs(0.0);
    let u2 = (md[2] / hd[2]).sqrt();
    let u3 = (md[3] - hd[3] * u2.powi(3)) / (3.0 * hd[2] * u2);
    Ok((u2, u3, hd))
}

/// First corrector U₁ along the characteristics ż = H′(U₀′) − c, normalised so
/// that U₁(z₀*) = 0.
pub fn asexual_u1(kernel: &Kernel, sel: &Selection, c: f64, profile: &Profile) -> Result<Profile> {
    if c < super::SMALL_SPEED {
        return Err(Error::Degenerate(format!("corrector needs c > 0, got {c}")));
    }
    if profile.mode != Mode::Asexual || profile.char_time.len() != profile.z.len() {
        return Err(Error::Invalid("asexual_u1 needs a profile from asexual_u0".into()));
    }
    let lag = kernel.lagrangian(c)?;
    let lambda1 = -0.5 * (1.0 / lag.curvature).sqrt();
    let (u2, u3, hd) = origin_jets(kernel, sel, lag.slope)?;
    // Derivative of the corrector equation at the characteristic equilibrium.
    let du1 = (hd[3] * u2 * u2 + hd[2] * u3) / (2.0 * hd[2] * u2);

    let z = &profile.z;
    let h = z[1] - z[0];
    let origin = z
        .iter()
        .position(|&v| v == 0.0)
        .ok_or_else(|| Error::Invalid("profile grid must contain z = 0".into()))?;
    let gap = |i: usize| -> Result<f64> { Ok(kernel.derivatives(profile.u0_slope[i])?[1] - c) };
    let mut u1 = vec![0.0; z.len()];
    for side in [1_i64, -1] {
        let launch = (origin as i64 + side) as usize;
        let u_launch = side as f64 * h * du1;
        let g_launch = gap(launch)?;
        let mut i = launch as i64;
        while i >= 0 && (i as usize) < z.len() {
            let k = i as usize;
            let g = gap(k)?;
            if g * g_launch <= 0.0 {
                return Err(Error::Singularity { z: z[k] });
            }
            u1[k] = u_launch + lambda1 * profile.char_time[k] + 0.5 * (g / g_launch).ln();
            i += side;
        }
    }
    let shift = Profile::interpolate(&u1, z, profile.zstar0);
    u1.iter_mut().for_each(|v| *v -= shift);
    Ok(Profile {
        u1: Some(u1),
        ..profile.clone()
    })
}

/// λ₁ recovered from the regularity of the characteristic formula at the origin:
/// U₁ stays finite only if λ₁ = −½ d/dz(H′(U₀′))|₀. The derivative is evaluated
/// from the profile slope off the origin and Richardson-extrapolated.
pub fn lambda1_from_characteristics(kernel: &Kernel, sel: &Selection, c: f64) -> Result<f64> {
    let lag = kernel.lagrangian(c)?;
    let dgap = |z: f64| -> Result<f64> {
        let p = algebraic_slope(kernel, sel, c, &lag, z)?;
        let d = kernel.derivatives(p)?;
        // d/dz H′(U₀′) = H″(U₀′)·m′(z)/(H′(U₀′) − c).
        Ok(d[2] * sel.m1(z) / (d[1] - c))
    };
    let delta = 2e-3;
    let e1 = 0.5 * (dgap(delta)? + dgap(-delta)?);
    let e2 = 0.5 * (dgap(2.0 * delta)? + dgap(-2.0 * delta)?);
    Ok(-0.5 * (4.0 * e1 - e2) / 3.0)
}

/// Second-order corrector of the infinitesimal model,
/// U₁(z₀* + h) = p*h + Σₙ 2ⁿ log(1 + G(z₀* + 2⁻ⁿh)), with
/// G(z) = m(z) − m(z₀*) − m′(z₀*)(z − z₀*) and p* = m‴/(2m″) + 2c at z₀*.
pub fn infinitesimal_u1(sel: &Selection, c: f64, grid: &Grid) -> Result<Profile> {
    let z0 = match sel.gradient_inverse_convex(c) {
        Ok(z) => -z,
        Err(Error::BeyondGradient { max, .. }) => return Err(Error::Tipping { c, c_tip: max }),
        Err(e) => return Err(e),
    };
    let d0 = sel.derivs(z0);
    if d0[2].abs() < 1e-12 {
        return Err(Error::Degenerate(format!("m'' vanishes at the lag {z0}")));
    }
    let p_star = d0[3] / (2.0 * d0[2]) + 2.0 * c;
    // Taylor coefficients of log(1 + G(z₀* + δ)).
    let a2 = 0.5 * d0[2];
    let a3 = d0[3] / 6.0;
    let a4 = sel.m4(z0) / 24.0 - 0.5 * a2 * a2;
    let log1g = |dz: f64| -> Result<f64> {
        let zz = z0 + dz;
        let g = sel.m(zz) - d0[0] - d0[1] * dz;
        if 1.0 + g <= 0.0 {
            return Err(Error::Divergence { z: zz });
        }
        Ok(g.ln_1p())
    };
    let z = grid.nodes();
    let mut u1 = Vec::with_capacity(z.len());
    for &zi in &z {
        let h = zi - z0;
        let mut total = p_star * h;
        let mut n = 0_i32;
        let mut hn = h;
        let mut weight = 1.0;
        while hn.abs() >= SERIES_TAYLOR_STEP && n < 60 {
            let term = weight * log1g(hn)?;
            total += term;
            if term.abs() < 1e-12 * (1.0 + total.abs()) {
                break;
            }
            n += 1;
            hn *= 0.5;
            weight *= 2.0;
        }
        if hn.abs() < SERIES_TAYLOR_STEP && n < 60 {
            // Closed-form sum of the remaining terms Σ_{k≥n} 2^k log(1+G(z₀*+2^{-k}h)).
            total +=
                weight * (a2 * hn * hn * 2.0 + a3 * hn.powi(3) * 4.0 / 3.0 + a4 * hn.powi(4) * 8.0 / 7.0);
        }
        u1.push(total);
    }
    let u0: Vec<f64> = z.iter().map(|&zi| 0.5 * (zi - z0) * (zi - z0)).collect();
    let slope: Vec<f64> = z.iter().map(|&zi| zi - z0).collect();
    Ok(Profile {
        mode: Mode::Infinitesimal,
        z,
        u0,
        u0_slope: slope,
        u1: Some(u1),
        zstar0: z0,
        residual: 0.0,
        char_time: Vec::new(),
    })
}
