//! Discrete reproduction operators B on a lattice grid.

use serde::{Deserialize, Serialize};

use super::convolution::{self, ConvolutionMethod, Execution};
use super::Distribution;
use crate::error::{Error, Result};
use crate::grid::trapezoid;
use crate::kernels::Kernel;
use crate::scaling::Mode;

/// Smallest admissible ε/dz.
pub const MIN_RESOLUTION: f64 = 4.0;

/// Inheritance rule for offspring traits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum Reproduction {
    Asexual { kernel: Kernel },
    Infinitesimal,
}

impl Reproduction {
    pub fn mode(&self) -> Mode {
        match self {
            Reproduction::Asexual { .. } => Mode::Asexual,
            Reproduction::Infinitesimal => Mode::Infinitesimal,
        }
    }

    pub fn kernel(&self) -> Option<&Kernel> {
        match self {
            Reproduction::Asexual { kernel } => Some(kernel),
            Reproduction::Infinitesimal => None,
        }
    }
}

fn check_resolution(eps: f64, dz: f64) -> Result<()> {
    let ratio = eps / dz;
    if ratio < MIN_RESOLUTION {
        return Err(Error::Resolution { ratio });
    }
    Ok(())
}

/// Symmetric stencil of K_ε on the lattice, normalised to unit sum. Smooth
/// kernels are point-sampled; discontinuous or singular ones use cell masses.
/// The stencil is cut at `max_half` nodes after normalisation, so mass sent
/// beyond the grid is lost rather than redistributed.
pub fn kernel_stencil(kernel: &Kernel, eps: f64, dz: f64, max_half: usize) -> Vec<f64> {
    let h = dz / eps;
    let half = ((kernel.support_half_width() / h).ceil() as usize).max(1);
    let full: Vec<f64> = (-(half as i64)..=half as i64)
        .map(|k| {
            let y = k as f64 * h;
            if kernel.needs_cell_average() {
                kernel.cdf(y + 0.5 * h) - kernel.cdf(y - 0.5 * h)
            } else {
                kernel.density(y)
            }
        })
        .collect();
    let total: f64 = full.iter().sum();
    let keep = half.min(max_half);
    full[half - keep..=half + keep].iter().map(|w| w / total).collect()
}

/// Point-sampled centred Gaussian of the given variance, unit sum.
pub fn gaussian_stencil(var: f64, dz: f64, max_half: usize) -> Vec<f64> {
    kernel_stencil(&Kernel::Gaussian, var.sqrt(), dz, max_half)
}

/// Precomputed operator for a fixed grid spacing.
#[derive(Debug, Clone)]
pub struct Operator {
    rule: Reproduction,
    eps: f64,
    dz: f64,
    stencil: Vec<f64>,
    method: ConvolutionMethod,
    exec: Execution,
}

impl Operator {
    pub fn new(
        rule: Reproduction,
        eps: f64,
        dz: f64,
        n: usize,
        method: ConvolutionMethod,
        exec: Execution,
    ) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::Invalid(format!("eps must be positive, got {eps}")));
        }
        check_resolution(eps, dz)?;
        let max_half = n.saturating_sub(1).max(1);
        let stencil = match rule {
            Reproduction::Asexual { kernel: Kernel::Diffusion } => Vec::new(),
            Reproduction::Asexual { kernel } => {
                kernel.validate()?;
                kernel_stencil(&kernel, eps, dz, max_half)
            }
            Reproduction::Infinitesimal => gaussian_stencil(0.5 * eps * eps, dz, max_half),
        };
        Ok(Operator {
            rule,
            eps,
            dz,
            stencil,
            method,
            exec,
        })
    }

    pub fn rule(&self) -> Reproduction {
        self.rule
    }

    /// Stiffness ε²/dz² of the explicit diffusion term; zero for convolutions.
    pub fn diffusion_rate(&self) -> f64 {
        match self.rule {
            Reproduction::Asexual { kernel: Kernel::Diffusion } => self.eps * self.eps / (self.dz * self.dz),
            _ => 0.0,
        }
    }

    /// B(p) on the same nodes.
    pub fn apply(&self, p: &[f64]) -> Result<Vec<f64>> {
        match self.rule {
            Reproduction::Asexual { kernel: Kernel::Diffusion } => {
                let n = p.len();
                let coef = 0.5 * self.eps * self.eps / (self.dz * self.dz);
                Ok((0..n)
                    .map(|i| {
                        let left = if i > 0 { p[i - 1] } else { 0.0 };
                        let right = if i + 1 < n { p[i + 1] } else { 0.0 };
                        p[i] + coef * (left - 2.0 * p[i] + right)
                    })
                    .collect())
            }
            Reproduction::Asexual { .. } => {
                Ok(convolution::centered(p, &self.stencil, self.method, self.exec))
            }
            Reproduction::Infinitesimal => {
                let mass = trapezoid(p, self.dz);
                if !(mass > 0.0) {
                    return Err(Error::Degenerate("reproduction of an empty distribution".into()));
                }
                let mut mid = convolution::even_self(p, self.method, self.exec);
                let scale = 2.0 * self.dz / (mass * mass);
                for v in &mut mid {
                    *v *= scale;
                }
                let mut out = convolution::centered(&mid, &self.stencil, self.method, self.exec);
                for v in &mut out {
                    *v *= mass;
                }
                Ok(out)
            }
        }
    }
}

/// B(F) for an asexual kernel, by direct convolution. The diffusion operator
/// p + (ε²/2)Δp is a rate rather than a distribution and is only available
/// through [`Operator::apply`].
pub fn reproduce_asexual(f: &Distribution, kernel: &Kernel, eps: f64) -> Result<Distribution> {
    if *kernel == Kernel::Diffusion {
        return Err(Error::Invalid(
            "the diffusion operator has no kernel; use Operator::apply".into(),
        ));
    }
    let op = Operator::new(
        Reproduction::Asexual { kernel: *kernel },
        eps,
        f.grid.dz,
        f.grid.n,
        ConvolutionMethod::Direct,
        Execution::Sequential,
    )?;
    Distribution::new(f.grid, op.apply(&f.values)?)
}

/// B(F) for the infinitesimal model, by direct convolution.
pub fn reproduce_infinitesimal(f: &Distribution, eps: f64) -> Result<Distribution> {
    let op = Operator::new(
        Reproduction::Infinitesimal,
        eps,
        f.grid.dz,
        f.grid.n,
        ConvolutionMethod::Direct,
        Execution::Sequential,
    )?;
    Distribution::new(f.grid, op.apply(&f.values)?)
}
