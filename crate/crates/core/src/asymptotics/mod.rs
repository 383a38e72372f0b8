//! Small-variance closed forms for mean fitness, lag and standing variance,
//! critical speeds, and the log-density profiles U₀, U₁.

pub mod ode;
mod profile;

pub use profile::{
    asexual_u0, asexual_u1, infinitesimal_u1, lambda1_from_characteristics, Profile,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::report::{EquilibriumReport, Order, Source};
use crate::scaling::{ModelParams, Mode};
use crate::selection::Selection;

/// Below this speed the 1/c terms of the asexual correction are replaced by
/// their c → 0 limits.
pub const SMALL_SPEED: f64 = 1e-6;

/// Asymptotic terms in scaled units. The corrections enter as λ₀ + ε^γλ₁ and
/// z₀* + ε^γz₁*; unused terms are NaN.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub mode: Mode,
    pub eps: f64,
    pub c: f64,
    pub lambda0: f64,
    pub lambda1: f64,
    pub zstar0: f64,
    pub zstar1: f64,
    pub var_leading: f64,
    /// Variance including the first correction (not an increment).
    pub var_correction: f64,
    pub order: Order,
}

impl Prediction {
    fn eps_gamma(&self) -> f64 {
        self.eps.powi(self.mode.gamma())
    }

    pub fn lambda(&self) -> f64 {
        match self.order {
            Order::Leading => self.lambda0,
            Order::FirstCorrection => self.lambda0 + self.eps_gamma() * self.lambda1,
        }
    }

    pub fn zstar(&self) -> f64 {
        match self.order {
            Order::Leading => self.zstar0,
            Order::FirstCorrection => self.zstar0 + self.eps_gamma() * self.zstar1,
        }
    }

    pub fn var(&self) -> f64 {
        match self.order {
            Order::Leading => self.var_leading,
            Order::FirstCorrection => self.var_correction,
        }
    }

    pub fn report(&self, basal_ratio: f64) -> EquilibriumReport {
        let lambda = self.lambda();
        EquilibriumReport {
            lambda,
            zstar: self.zstar(),
            var: self.var(),
            skew: None,
            kurt: None,
            rho: (lambda - basal_ratio) / (1.0 - basal_ratio),
            source: Source::Asymptotic(self.order),
        }
    }
}

fn check_speed(c: f64) -> Result<()> {
    if c >= 0.0 && c.is_finite() {
        Ok(())
    } else {
        Err(Error::Invalid(format!("speed must be finite and >= 0, got {c}")))
    }
}

/// Asexual tipping speed in scaled units: L⁻¹(sup m), or +∞.
pub fn asexual_tipping_speed(kernel: &Kernel, sel: &Selection) -> Result<f64> {
    let sup = sel.sup();
    if sup.is_finite() {
        kernel.lagrangian_inverse(sup)
    } else {
        Ok(f64::INFINITY)
    }
}

/// Infinitesimal tipping speed in scaled units: max m′, or +∞.
pub fn infinitesimal_tipping_speed(sel: &Selection) -> f64 {
    sel.max_gradient().map_or(f64::INFINITY, |(_, g)| g)
}

pub fn asexual_leading(kernel: &Kernel, sel: &Selection, eps: f64, c: f64) -> Result<Prediction> {
    check_speed(c)?;
    let l = kernel.lagrangian(c)?;
    let z0 = match sel.inverse_pos(l.value) {
        Ok(z) => -z,
        Err(Error::BeyondRange { .. }) => {
            return Err(Error::Tipping {
                c,
                c_tip: asexual_tipping_speed(kernel, sel)?,
            })
        }
        Err(e) => return Err(e),
    };
    let var = if c == 0.0 { eps } else { -eps * c / sel.m1(z0) };
    Ok(Prediction {
        mode: Mode::Asexual,
        eps,
        c,
        lambda0: 1.0 - l.value,
        lambda1: f64::NAN,
        zstar0: z0,
        zstar1: f64::NAN,
        var_leading: var,
        var_correction: f64::NAN,
        order: Order::Leading,
    })
}

pub fn asexual_correction(
    kernel: &Kernel,
    sel: &Selection,
    eps: f64,
    c: f64,
) -> Result<Prediction> {
    if c < SMALL_SPEED {
        return Err(Error::Degenerate(format!(
            "speed {c} below {SMALL_SPEED}; use the c = 0 limits"
        )));
    }
    let mut p = asexual_leading(kernel, sel, eps, c)?;
    let l = kernel.lagrangian(c)?;
    let root = (1.0 / l.curvature).sqrt();
    let d = sel.derivs(p.zstar0);
    p.lambda1 = -0.5 * root;
    p.zstar1 = root / (2.0 * d[1]) + 1.0 / (2.0 * c);
    let shape = -d[1] / c
        - 0.5 * eps * (d[2] / (c * d[1]) * root + (d[1] / (c * c)).powi(2));
    p.var_correction = if shape > 0.0 { eps / shape } else { f64::NAN };
    p.order = Order::FirstCorrection;
    Ok(p)
}

/// c → 0 limits of the asexual correction: λ₁ = −½, z₁* = 0 and a local
/// curvature 1 + (3ε/2)(m⁗(0)/24 + μ₄/8), μ₄ the kernel's fourth moment.
fn asexual_correction_at_rest(
    kernel: &Kernel,
    sel: &Selection,
    eps: f64,
    c: f64,
) -> Result<Prediction> {
    let mut p = asexual_leading(kernel, sel, eps, c)?;
    let shape = 1.0 + 1.5 * eps * (sel.m4(0.0) / 24.0 + kernel.fourth_moment() / 8.0);
    p.lambda1 = -0.5;
    p.zstar1 = 0.0;
    p.var_correction = if shape > 0.0 { eps / shape } else { f64::NAN };
    p.order = Order::FirstCorrection;
    Ok(p)
}

pub fn infinitesimal_leading(sel: &Selection, eps: f64, c: f64) -> Result<Prediction> {
    check_speed(c)?;
    let z0 = match sel.gradient_inverse_convex(c) {
        Ok(z) => -z,
        Err(Error::BeyondGradient { max, .. }) => return Err(Error::Tipping { c, c_tip: max }),
        Err(e) => return Err(e),
    };
    Ok(Prediction {
        mode: Mode::Infinitesimal,
        eps,
        c,
        lambda0: 1.0 - sel.m(z0),
        lambda1: f64::NAN,
        zstar0: z0,
        zstar1: f64::NAN,
        var_leading: eps * eps,
        var_correction: f64::NAN,
        order: Order::Leading,
    })
}

pub fn infinitesimal_correction(sel: &Selection, eps: f64, c: f64) -> Result<Prediction> {
    let mut p = infinitesimal_leading(sel, eps, c)?;
    let d = sel.derivs(p.zstar0);
    if d[2].abs() < 1e-12 {
        return Err(Error::Degenerate(format!(
            "m'' vanishes at the lag {}",
            p.zstar0
        )));
    }
    let q = d[3] / (2.0 * d[2]);
    p.zstar1 = -(q + 2.0 * c);
    p.lambda1 = -(2.0 * c * c + c * q + 0.5 * d[2]);
    p.var_correction = eps * eps / (1.0 + 2.0 * eps * eps * d[2]);
    p.order = Order::FirstCorrection;
    Ok(p)
}

/// Prediction at the requested order for either mode. The kernel is ignored in
/// the infinitesimal mode.
pub fn predict(
    mode: Mode,
    kernel: &Kernel,
    sel: &Selection,
    eps: f64,
    c: f64,
    order: Order,
) -> Result<Prediction> {
    match (mode, order) {
        (Mode::Asexual, Order::Leading) => asexual_leading(kernel, sel, eps, c),
        (Mode::Asexual, Order::FirstCorrection) if c < SMALL_SPEED => {
            asexual_correction_at_rest(kernel, sel, eps, c)
        }
        (Mode::Asexual, Order::FirstCorrection) => asexual_correction(kernel, sel, eps, c),
        (Mode::Infinitesimal, Order::Leading) => infinitesimal_leading(sel, eps, c),
        (Mode::Infinitesimal, Order::FirstCorrection) => infinitesimal_correction(sel, eps, c),
    }
}

/// Critical speeds. `c_star` is the leading-order extinction speed; `c_star_corrected`
/// solves λ₀ + ε^γλ₁ = μ₀/β instead, when a root exists below the tipping speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalSpeeds {
    pub c_star: f64,
    pub c_star_corrected: Option<f64>,
    pub c_tip: f64,
}

/// Critical speeds in scaled units for a scaled selection function.
pub fn critical_speeds_scaled(
    mode: Mode,
    kernel: Option<&Kernel>,
    sel: &Selection,
    eps: f64,
    basal_ratio: f64,
) -> Result<CriticalSpeeds> {
    let v = 1.0 - basal_ratio;
    let (c_star, c_tip, kernel) = match mode {
        Mode::Asexual => {
            let k = kernel.ok_or_else(|| Error::Invalid("asexual mode needs a kernel".into()))?;
            (k.lagrangian_inverse(v)?, asexual_tipping_speed(k, sel)?, *k)
        }
        Mode::Infinitesimal => {
            let c_tip = infinitesimal_tipping_speed(sel);
            let c_star = match sel.inverse_pos(v) {
                Ok(z) if sel.inflection().is_none_or(|zi| z <= zi) => sel.m1(z),
                Ok(_) | Err(Error::BeyondRange { .. }) => c_tip,
                Err(e) => return Err(e),
            };
            (c_star, c_tip, Kernel::Diffusion)
        }
    };
    let corrected = corrected_extinction_speed(mode, &kernel, sel, eps, basal_ratio, c_star.min(c_tip));
    Ok(CriticalSpeeds {
        c_star,
        c_star_corrected: corrected,
        c_tip,
    })
}

fn corrected_extinction_speed(
    mode: Mode,
    kernel: &Kernel,
    sel: &Selection,
    eps: f64,
    basal_ratio: f64,
    c_hi: f64,
) -> Option<f64> {
    let f = |c: f64| {
        predict(mode, kernel, sel, eps, c, Order::FirstCorrection)
            .ok()
            .map(|p| p.lambda() - basal_ratio)
    };
    let (mut lo, mut hi) = (0.0, c_hi * (1.0 - 1e-12));
    let (flo, fhi) = (f(lo)?, f(hi)?);
    if !(flo > 0.0 && fhi < 0.0) {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        match f(mid) {
            Some(v) if v > 0.0 => lo = mid,
            Some(_) => hi = mid,
            None => return None,
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Critical speeds in dimensional units. `sel` is the scaled selection function.
pub fn critical_speeds(
    mode: Mode,
    kernel: Option<&Kernel>,
    sel: &Selection,
    params: &ModelParams,
) -> Result<CriticalSpeeds> {
    let s = critical_speeds_scaled(mode, kernel, sel, params.eps(), params.mu0 / params.beta)?;
    let unit = params.speed_scale(mode);
    Ok(CriticalSpeeds {
        c_star: s.c_star * unit,
        c_star_corrected: s.c_star_corrected.map(|c| c * unit),
        c_tip: s.c_tip * unit,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Trend {
    Increasing,
    Flat,
    Decreasing,
}

/// Direction in which the leading asexual standing variance ∝ c/m′(|z₀*(c)|)
/// moves with c.
pub fn variance_trend(kernel: &Kernel, sel: &Selection, c: f64) -> Result<Trend> {
    if !(c > 0.0) {
        return Err(Error::Invalid(format!("variance trend needs c > 0, got {c}")));
    }
    let h = 1e-4 * c;
    let c_tip = asexual_tipping_speed(kernel, sel)?;
    if c + h >= c_tip {
        return Err(Error::Tipping { c, c_tip });
    }
    let v = |c: f64| -> Result<f64> {
        let p = asexual_leading(kernel, sel, 1.0, c)?;
        Ok(c / sel.m1(-p.zstar0))
    };
    let (vp, vm, v0) = (v(c + h)?, v(c - h)?, v(c)?);
    let slope = (vp - vm) / (2.0 * h);
    Ok(if (slope * c / v0).abs() < 1e-6 {
        Trend::Flat
    } else if slope > 0.0 {
        Trend::Increasing
    } else {
        Trend::Decreasing
    })
}
