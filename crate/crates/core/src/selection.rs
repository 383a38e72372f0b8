//! Increment-of-mortality functions m(z) in scaled units (m″(0) = 1).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TOL: f64 = 1e-12;

/// SuperQuadratic coefficient used when none is given.
pub const DEFAULT_A6: f64 = 1.0 / 64.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Selection {
    Quadratic,
    SuperQuadratic { a6: f64 },
    Bounded { m_inf: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Shape {
    SubQuadratic,
    Quadratic,
    SuperQuadratic,
}

/// Which shape test to apply: the asexual one compares m″m/(m′)² to ½, the
/// infinitesimal one looks at the sign of m‴ on the lag side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeTest {
    Asexual,
    Infinitesimal,
}

impl Selection {
    pub fn super_quadratic_default() -> Self {
        Selection::SuperQuadratic { a6: DEFAULT_A6 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Selection::Quadratic => "quadratic",
            Selection::SuperQuadratic { .. } => "super_quadratic",
            Selection::Bounded { .. } => "bounded",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Selection::SuperQuadratic { a6 } if !(a6 >= 0.0 && a6.is_finite()) => {
                Err(Error::Invalid(format!("a6 must be >= 0, got {a6}")))
            }
            Selection::Bounded { m_inf } if !(m_inf > 0.0 && m_inf.is_finite()) => {
                Err(Error::Invalid(format!("m_inf must be > 0, got {m_inf}")))
            }
            _ => Ok(()),
        }
    }

    /// [m, m′, m″, m‴] at z.
    pub fn derivs(&self, z: f64) -> [f64; 4] {
        match *self {
            Selection::Quadratic => [0.5 * z * z, z, 1.0, 0.0],
            Selection::SuperQuadratic { a6 } => {
                let z2 = z * z;
                let z3 = z2 * z;
                [
                    0.5 * z2 + a6 * z3 * z3,
                    z + 6.0 * a6 * z3 * z2,
                    1.0 + 30.0 * a6 * z2 * z2,
                    120.0 * a6 * z3,
                ]
            }
            Selection::Bounded { m_inf } => {
                let u = z * z / m_inf;
                let e = (-0.5 * u).exp();
                [
                    -m_inf * (-0.5 * u).exp_m1(),
                    z * e,
                    (1.0 - u) * e,
                    e * (z / m_inf) * (u - 3.0),
                ]
            }
        }
    }

    /// Fourth derivative m⁗(z).
    pub fn m4(&self, z: f64) -> f64 {
        match *self {
            Selection::Quadratic => 0.0,
            Selection::SuperQuadratic { a6 } => 360.0 * a6 * z * z,
            Selection::Bounded { m_inf } => {
                let u = z * z / m_inf;
                (-0.5 * u).exp() * (-u * u + 6.0 * u - 3.0) / m_inf
            }
        }
    }

    pub fn m(&self, z: f64) -> f64 {
        self.derivs(z)[0]
    }

    pub fn m1(&self, z: f64) -> f64 {
        self.derivs(z)[1]
    }

    pub fn sup(&self) -> f64 {
        match *self {
            Selection::Bounded { m_inf } => m_inf,
            _ => f64::INFINITY,
        }
    }

    /// Location and value of max m′ on z ≥ 0, if finite.
    pub fn max_gradient(&self) -> Option<(f64, f64)> {
        match *self {
            Selection::Bounded { m_inf } => {
                let z = m_inf.sqrt();
                Some((z, z * (-0.5_f64).exp()))
            }
            _ => None,
        }
    }

    pub fn inflection(&self) -> Option<f64> {
        self.max_gradient().map(|(z, _)| z)
    }

    /// The z ≥ 0 with m(z) = v.
    pub fn inverse_pos(&self, v: f64) -> Result<f64> {
        if !(v >= 0.0) {
            return Err(Error::Invalid(format!("m^-1 needs v >= 0, got {v}")));
        }
        if v >= self.sup() {
            return Err(Error::BeyondRange { v, sup: self.sup() });
        }
        if v == 0.0 {
            return Ok(0.0);
        }
        match *self {
            Selection::Quadratic => Ok((2.0 * v).sqrt()),
            Selection::Bounded { m_inf } => Ok((-2.0 * m_inf * (-v / m_inf).ln_1p()).sqrt()),
            // m ≥ z²/2, so (2v)^{1/2} bounds the root from above.
            Selection::SuperQuadratic { .. } => safeguarded_newton(
                |z| {
                    let d = self.derivs(z);
                    (d[0] - v, d[1])
                },
                0.0,
                (2.0 * v).sqrt(),
            ),
        }
    }

    /// Smallest z ≥ 0 with m′(z) = g (the convex branch).
    pub fn gradient_inverse_convex(&self, g: f64) -> Result<f64> {
        if !(g >= 0.0) {
            return Err(Error::Invalid(format!("gradient must be >= 0, got {g}")));
        }
        if g == 0.0 {
            return Ok(0.0);
        }
        match *self {
            Selection::Quadratic => Ok(g),
            Selection::SuperQuadratic { .. } => safeguarded_newton(
                |z| {
                    let d = self.derivs(z);
                    (d[1] - g, d[2])
                },
                0.0,
                g,
            ),
            Selection::Bounded { .. } => {
                let (zi, gmax) = self.max_gradient().unwrap();
                if g > gmax {
                    return Err(Error::BeyondGradient { g, max: gmax });
                }
                safeguarded_newton(
                    |z| {
                        let d = self.derivs(z);
                        (d[1] - g, d[2])
                    },
                    0.0,
                    zi,
                )
            }
        }
    }

    /// Root of m′(z) = g beyond the inflection point, when one exists.
    pub fn gradient_inverse_concave(&self, g: f64) -> Result<Option<f64>> {
        match self.max_gradient() {
            None => {
                if g < 0.0 {
                    return Err(Error::Invalid(format!("gradient must be >= 0, got {g}")));
                }
                Ok(None)
            }
            Some((zi, gmax)) => {
                if g > gmax {
                    return Err(Error::BeyondGradient { g, max: gmax });
                }
                if !(g > 0.0) {
                    return Ok(None);
                }
                let mut hi = 2.0 * zi;
                while self.m1(hi) > g {
                    hi *= 2.0;
                }
                // m′ is decreasing here, so flip the sign to keep Newton monotone.
                safeguarded_newton(
                    |z| {
                        let d = self.derivs(z);
                        (g - d[1], -d[2])
                    },
                    zi,
                    hi,
                )
                .map(Some)
            }
        }
    }

    pub fn classify_shape(&self, z: f64, test: ShapeTest) -> Shape {
        let d = self.derivs(z);
        let score = match test {
            ShapeTest::Asexual => d[2] * d[0] / (d[1] * d[1]) - 0.5,
            ShapeTest::Infinitesimal => d[3] * z.signum(),
        };
        if score.abs() <= 1e-12 {
            Shape::Quadratic
        } else if score > 0.0 {
            Shape::SuperQuadratic
        } else {
            Shape::SubQuadratic
        }
    }
}

/// Newton iteration for an increasing f on [lo, hi] with f(lo) ≤ 0 ≤ f(hi),
/// falling back to bisection whenever the step leaves the bracket.
fn safeguarded_newton<F>(f: F, mut lo: f64, mut hi: f64) -> Result<f64>
where
    F: Fn(f64) -> (f64, f64),
{
    let mut x = 0.5 * (lo + hi);
    for _ in 0..300 {
        let (fx, dfx) = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let mut next = x - fx / dfx;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= TOL * x.abs().max(1.0) || hi - lo <= TOL * hi.abs().max(1.0) {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::Convergence("selection root not refined".into()))
}
