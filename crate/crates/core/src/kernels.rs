//! Mutation kernels of unit variance, their Hamiltonians H(p) = ∫K(y)e^{yp}dy − 1
//! and the Legendre transforms L(c) = sup_p (pc − H(p)).

use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;
use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::error::{Error, Result};

const SQRT3: f64 = 1.732_050_807_568_877_2;
const ROOT_TOL: f64 = 1e-12;
const MAX_ROOT_ITERS: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Kernel {
    /// Diffusion limit: an operator (ε²/2)∂², not a density.
    Diffusion,
    Uniform,
    Gaussian,
    Exponential,
    Gamma { shape: f64 },
}

/// Default shape for the Gamma family.
pub const DEFAULT_GAMMA_SHAPE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lagrangian {
    pub value: f64,
    /// L′(c), the maximiser p₀ of pc − H(p).
    pub slope: f64,
    /// L″(c) = 1/H″(p₀).
    pub curvature: f64,
}

impl Kernel {
    pub fn gamma_default() -> Self {
        Kernel::Gamma {
            shape: DEFAULT_GAMMA_SHAPE,
        }
    }

    /// The five families in order of increasing kurtosis.
    pub fn all() -> [Kernel; 5] {
        [
            Kernel::Diffusion,
            Kernel::Uniform,
            Kernel::Gaussian,
            Kernel::Exponential,
            Kernel::gamma_default(),
        ]
    }

    pub fn name(&self) -> String {
        match self {
            Kernel::Diffusion => "diffusion".into(),
            Kernel::Uniform => "uniform".into(),
            Kernel::Gaussian => "gaussian".into(),
            Kernel::Exponential => "exponential".into(),
            Kernel::Gamma { shape } => format!("gamma({shape})"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Kernel::Gamma { shape } if !(shape.is_finite() && *shape > 0.0) => Err(
                Error::Invalid(format!("gamma shape must be positive, got {shape}")),
            ),
            _ => Ok(()),
        }
    }

    /// Half-width of the open interval on which H is finite.
    pub fn p_max(&self) -> f64 {
        match self {
            Kernel::Diffusion | Kernel::Uniform | Kernel::Gaussian => f64::INFINITY,
            Kernel::Exponential => std::f64::consts::SQRT_2,
            Kernel::Gamma { shape } => (shape * (shape + 1.0)).sqrt(),
        }
    }

    fn check_domain(&self, p: f64) -> Result<()> {
        let p_max = self.p_max();
        if p.is_nan() || p.abs() >= p_max {
            return Err(Error::Domain { p, p_max });
        }
        Ok(())
    }

    pub fn hamiltonian(&self, p: f64) -> Result<f64> {
        Ok(self.derivatives(p)?[0])
    }

    /// (H′(p), H″(p)).
    pub fn hamiltonian_derivs(&self, p: f64) -> Result<(f64, f64)> {
        let d = self.derivatives(p)?;
        Ok((d[1], d[2]))
    }

    /// c = ∫ yK(y)e^{p₀y}dy, the speed whose Lagrangian slope is p₀.
    pub fn conjugacy_speed(&self, p0: f64) -> Result<f64> {
        Ok(self.derivatives(p0)?[1])
    }

    /// [H, H′, H″, H‴] at p.
    pub fn derivatives(&self, p: f64) -> Result<[f64; 4]> {
        self.check_domain(p)?;
        Ok(match *self {
            Kernel::Diffusion => [0.5 * p * p, p, 1.0, 0.0],
            Kernel::Uniform => {
                let f = sinhc_derivs(SQRT3 * p);
                [f[0] - 1.0, SQRT3 * f[1], 3.0 * f[2], 3.0 * SQRT3 * f[3]]
            }
            Kernel::Gaussian => {
                let e = (0.5 * p * p).exp();
                [
                    e - 1.0,
                    p * e,
                    (1.0 + p * p) * e,
                    (3.0 * p + p * p * p) * e,
                ]
            }
            Kernel::Exponential => {
                let q = 1.0 - 0.5 * p * p;
                let (q2, q3) = (q * q, q * q * q);
                [
                    1.0 / q - 1.0,
                    p / q2,
                    1.0 / q2 + 2.0 * p * p / q3,
                    6.0 * p / q3 + 6.0 * p * p * p / (q3 * q),
                ]
            }
            Kernel::Gamma { shape } => {
                let theta = 1.0 / (shape * (shape + 1.0)).sqrt();
                let (a, b) = (1.0 - theta * p, 1.0 + theta * p);
                let mut out = [0.0; 4];
                let mut rising = 1.0;
                let mut th = 1.0;
                for (j, slot) in out.iter_mut().enumerate() {
                    let e = -shape - j as f64;
                    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                    *slot = 0.5 * rising * th * (a.powf(e) + sign * b.powf(e));
                    rising *= shape + j as f64;
                    th *= theta;
                }
                out[0] -= 1.0;
                out
            }
        })
    }

    /// Solves H′(p₀) = c and returns L(c), L′(c), L″(c).
    pub fn lagrangian(&self, c: f64) -> Result<Lagrangian> {
        if !c.is_finite() {
            return Err(Error::Convergence(format!("non-finite speed {c}")));
        }
        let p = self.slope_root(c.abs())?.copysign(c);
        let d = self.derivatives(p)?;
        Ok(Lagrangian {
            value: p * c - d[0],
            slope: p,
            curvature: 1.0 / d[2],
        })
    }

    /// Largest p with H′(p) = c ≥ 0, by bracketed Newton with bisection fallback.
    fn slope_root(&self, c: f64) -> Result<f64> {
        if c == 0.0 {
            return Ok(0.0);
        }
        let p_max = self.p_max();
        let h1 = |p: f64| self.derivatives(p).map(|d| (d[1] - c, d[2]));
        let (mut lo, mut hi) = (0.0_f64, if p_max.is_finite() { 0.5 * p_max } else { 1.0 });
        let mut grow = 0;
        while h1(hi)?.0 < 0.0 {
            lo = hi;
            hi = if p_max.is_finite() {
                0.5 * (hi + p_max)
            } else {
                2.0 * hi
            };
            grow += 1;
            if grow > 2000 || hi == lo {
                return Err(Error::Convergence(format!("no bracket for H'(p) = {c}")));
            }
        }
        let mut p = 0.5 * (lo + hi);
        for _ in 0..MAX_ROOT_ITERS {
            let (f, df) = h1(p)?;
            if f == 0.0 {
                return Ok(p);
            }
            if f < 0.0 {
                lo = p;
            } else {
                hi = p;
            }
            let mut next = p - f / df;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - p).abs() <= ROOT_TOL * p.abs().max(1.0) || hi - lo <= ROOT_TOL {
                return Ok(next);
            }
            p = next;
        }
        Err(Error::Convergence(format!(
            "H'(p) = {c} not refined after {MAX_ROOT_ITERS} iterations"
        )))
    }

    /// The c ≥ 0 with L(c) = v, for v ≥ 0.
    pub fn lagrangian_inverse(&self, v: f64) -> Result<f64> {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::Invalid(format!("L^-1 needs a finite v >= 0, got {v}")));
        }
        if v == 0.0 {
            return Ok(0.0);
        }
        let (mut lo, mut hi) = (0.0_f64, (2.0 * v).sqrt().max(1e-3));
        while self.lagrangian(hi)?.value < v {
            lo = hi;
            hi *= 2.0;
            if hi > 1e12 {
                return Err(Error::Convergence(format!("no bracket for L(c) = {v}")));
            }
        }
        let mut c = (2.0 * v).sqrt().clamp(lo, hi);
        for _ in 0..MAX_ROOT_ITERS {
            let l = self.lagrangian(c)?;
            let f = l.value - v;
            if f < 0.0 {
                lo = c;
            } else {
                hi = c;
            }
            let mut next = if l.slope > 0.0 { c - f / l.slope } else { f64::NAN };
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - c).abs() <= ROOT_TOL * c.max(1.0) || hi - lo <= ROOT_TOL * hi {
                return Ok(next);
            }
            c = next;
        }
        Err(Error::Convergence(format!("L(c) = {v} not refined")))
    }

    /// Fourth moment ∫y⁴K(y)dy = H⁗(0); zero for the diffusion operator.
    pub fn fourth_moment(&self) -> f64 {
        match *self {
            Kernel::Diffusion => 0.0,
            Kernel::Uniform => 1.8,
            Kernel::Gaussian => 3.0,
            Kernel::Exponential => 6.0,
            Kernel::Gamma { shape } => (shape + 2.0) * (shape + 3.0) / (shape * (shape + 1.0)),
        }
    }

    /// Density of the unit-variance kernel. Zero for the diffusion operator.
    pub fn density(&self, y: f64) -> f64 {
        let ay = y.abs();
        match *self {
            Kernel::Diffusion => 0.0,
            Kernel::Uniform => {
                if ay <= SQRT3 {
                    0.5 / SQRT3
                } else {
                    0.0
                }
            }
            Kernel::Gaussian => (-0.5 * y * y).exp() / (2.0 * std::f64::consts::PI).sqrt(),
            Kernel::Exponential => {
                std::f64::consts::FRAC_1_SQRT_2 * (-std::f64::consts::SQRT_2 * ay).exp()
            }
            Kernel::Gamma { shape } => {
                let rate = (shape * (shape + 1.0)).sqrt();
                if ay == 0.0 {
                    return if shape < 1.0 {
                        f64::INFINITY
                    } else if shape == 1.0 {
                        0.5 * rate
                    } else {
                        0.0
                    };
                }
                let log = shape * rate.ln() + (shape - 1.0) * ay.ln() - rate * ay - ln_gamma(shape);
                0.5 * log.exp()
            }
        }
    }

    /// Cumulative distribution function of the unit-variance kernel.
    pub fn cdf(&self, y: f64) -> f64 {
        let half = |v: f64| if y >= 0.0 { 0.5 + 0.5 * v } else { 0.5 - 0.5 * v };
        let ay = y.abs();
        match *self {
            Kernel::Diffusion => {
                if y >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Kernel::Uniform => half((ay / SQRT3).min(1.0)),
            Kernel::Gaussian => 0.5 * (1.0 + erf(y / std::f64::consts::SQRT_2)),
            Kernel::Exponential => half(-(-std::f64::consts::SQRT_2 * ay).exp_m1()),
            Kernel::Gamma { shape } => {
                let rate = (shape * (shape + 1.0)).sqrt();
                half(if ay == 0.0 { 0.0 } else { gamma_lr(shape, rate * ay) })
            }
        }
    }

    /// Half-width beyond which the kernel carries less than about 1e-17 of its mass.
    pub fn support_half_width(&self) -> f64 {
        match *self {
            Kernel::Diffusion => 0.0,
            Kernel::Uniform => SQRT3,
            Kernel::Gaussian => 9.0,
            Kernel::Exponential => 40.0_f64 / std::f64::consts::SQRT_2,
            Kernel::Gamma { shape } => {
                let rate = (shape * (shape + 1.0)).sqrt();
                (45.0 + 3.0 * shape) / rate
            }
        }
    }

    /// Whether grid weights should come from cell masses rather than point samples
    /// (discontinuous or singular densities).
    pub fn needs_cell_average(&self) -> bool {
        matches!(self, Kernel::Uniform | Kernel::Gamma { .. })
    }
}

/// sinh(x)/x and its first three derivatives.
fn sinhc_derivs(x: f64) -> [f64; 4] {
    if x.abs() < 0.5 {
        // Even series Σ x^{2k}/(2k+1)!, differentiated termwise.
        let mut out = [0.0; 4];
        let mut coef = 1.0; // 1/(2k+1)!
        for k in 0..14 {
            let n = 2 * k;
            let n_f = n as f64;
            out[0] += coef * x.powi(n);
            if n >= 1 {
                out[1] += coef * n_f * x.powi(n - 1);
            }
            if n >= 2 {
                out[2] += coef * n_f * (n_f - 1.0) * x.powi(n - 2);
            }
            if n >= 3 {
                out[3] += coef * n_f * (n_f - 1.0) * (n_f - 2.0) * x.powi(n - 3);
            }
            coef /= (n_f + 2.0) * (n_f + 3.0);
        }
        return out;
    }
    let (s, c) = (x.sinh(), x.cosh());
    let (x2, x3, x4) = (x * x, x * x * x, x * x * x * x);
    [
        s / x,
        c / x - s / x2,
        s / x - 2.0 * c / x2 + 2.0 * s / x3,
        c / x - 3.0 * s / x2 + 6.0 * c / x3 - 6.0 * s / x4,
    ]
}

/// Grid maximum of pc − H(p) over tabulated (p, H(p)) pairs. Verification oracle
/// for [`Kernel::lagrangian`]; fails if the maximiser sits on either end of the table.
pub fn legendre_numeric_oracle(samples: &[(f64, f64)], c: f64) -> Result<f64> {
    let (idx, best) = samples
        .iter()
        .enumerate()
        .map(|(i, &(p, h))| (i, p * c - h))
        .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
    if samples.len() < 3 || idx == 0 || idx == samples.len() - 1 {
        return Err(Error::Bracket);
    }
    Ok(best)
}
