use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Order {
    Leading,
    FirstCorrection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Source {
    Simulation {
        converged: bool,
        iterations: usize,
        residual: f64,
        /// Number of steps in which negative densities were clipped.
        clipped: usize,
    },
    Asymptotic(Order),
}

/// Summary of a travelling equilibrium, either simulated or predicted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub lambda: f64,
    pub zstar: f64,
    pub var: f64,
    pub skew: Option<f64>,
    /// Excess kurtosis.
    pub kurt: Option<f64>,
    pub rho: f64,
    pub source: Source,
}

impl EquilibriumReport {
    pub fn converged(&self) -> bool {
        match self.source {
            Source::Simulation { converged, .. } => converged,
            Source::Asymptotic(_) => true,
        }
    }
}
