//! Conversion between dimensional parameters and the scaled system in which
//! the optimum is at 0, m″(0) = 1 and the birth rate is 1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::report::EquilibriumReport;
use crate::selection::Selection;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Asexual,
    Infinitesimal,
}

impl Mode {
    /// Exponent of ε in front of the transport term.
    pub fn gamma(self) -> i32 {
        match self {
            Mode::Asexual => 1,
            Mode::Infinitesimal => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Asexual => "asexual",
            Mode::Infinitesimal => "infinitesimal",
        }
    }
}

/// Dimensional model parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Birth rate.
    pub beta: f64,
    /// Basal mortality.
    pub mu0: f64,
    /// Selection curvature at the optimum.
    pub alpha: f64,
    /// Mutational (or segregation) standard deviation.
    pub sigma: f64,
    /// Speed of the optimum.
    pub c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledParams {
    pub eps: f64,
    pub c: f64,
    pub mode: Mode,
    /// μ₀/β, needed to recover the population size from λ.
    pub basal_ratio: f64,
}

impl ScaledParams {
    pub fn new(mode: Mode, eps: f64, c: f64) -> Self {
        ScaledParams {
            eps,
            c,
            mode,
            basal_ratio: 0.0,
        }
    }

    pub fn gamma(&self) -> i32 {
        self.mode.gamma()
    }

    /// ε^γ, the small parameter in front of transport and of U.
    pub fn eps_gamma(&self) -> f64 {
        self.eps.powi(self.gamma())
    }

    /// Population size ρ for a scaled mean fitness λ.
    pub fn rho(&self, lambda: f64) -> f64 {
        (lambda - self.basal_ratio) / (1.0 - self.basal_ratio)
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.beta.is_finite()
            && self.mu0 >= 0.0
            && self.beta > self.mu0
            && self.alpha > 0.0
            && self.alpha.is_finite()
            && self.sigma > 0.0
            && self.sigma.is_finite()
            && self.c >= 0.0
            && self.c.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Invalid(format!(
                "need beta > mu0 >= 0, alpha > 0, sigma > 0, c >= 0; got {self:?}"
            )))
        }
    }

    /// Trait scale √(β/α): one scaled trait unit in dimensional units.
    pub fn trait_scale(&self) -> f64 {
        (self.beta / self.alpha).sqrt()
    }

    /// Speed unit: σβ (asexual) or σ²√(αβ) (infinitesimal).
    pub fn speed_scale(&self, mode: Mode) -> f64 {
        match mode {
            Mode::Asexual => self.sigma * self.beta,
            Mode::Infinitesimal => self.sigma * self.sigma * (self.alpha * self.beta).sqrt(),
        }
    }

    pub fn eps(&self) -> f64 {
        self.sigma * (self.alpha / self.beta).sqrt()
    }

    pub fn to_scaled(&self, mode: Mode) -> ScaledParams {
        ScaledParams {
            eps: self.eps(),
            c: self.c / self.speed_scale(mode),
            mode,
            basal_ratio: self.mu0 / self.beta,
        }
    }

    pub fn lambda_to_scaled(&self, lambda_dim: f64) -> f64 {
        (lambda_dim + self.mu0) / self.beta
    }

    pub fn lambda_from_scaled(&self, lambda: f64) -> f64 {
        self.beta * lambda - self.mu0
    }

    /// Dimensional speed from a scaled one.
    pub fn speed_from_scaled(&self, c: f64, mode: Mode) -> f64 {
        c * self.speed_scale(mode)
    }

    /// Rescales a selection function given in dimensional constants (m(z) = αz²/2,
    /// αz²/2 + a₆z⁶ or m∞(1 − exp(−αz²/(2m∞)))) to scaled units.
    pub fn scale_selection(&self, dimensional: Selection) -> Selection {
        match dimensional {
            Selection::Quadratic => Selection::Quadratic,
            Selection::SuperQuadratic { a6 } => Selection::SuperQuadratic {
                a6: a6 * self.trait_scale().powi(6) / self.beta,
            },
            Selection::Bounded { m_inf } => Selection::Bounded {
                m_inf: m_inf / self.beta,
            },
        }
    }

    /// Maps a scaled report to dimensional units. Skewness, kurtosis and ρ are
    /// scale-free and pass through.
    pub fn from_scaled(&self, r: &EquilibriumReport) -> EquilibriumReport {
        let z = self.trait_scale();
        EquilibriumReport {
            lambda: self.lambda_from_scaled(r.lambda),
            zstar: r.zstar * z,
            var: r.var * z * z,
            ..r.clone()
        }
    }

    /// Inverse of [`ModelParams::from_scaled`].
    pub fn report_to_scaled(&self, r: &EquilibriumReport) -> EquilibriumReport {
        let z = self.trait_scale();
        EquilibriumReport {
            lambda: self.lambda_to_scaled(r.lambda),
            zstar: r.zstar / z,
            var: r.var / (z * z),
            ..r.clone()
        }
    }
}
