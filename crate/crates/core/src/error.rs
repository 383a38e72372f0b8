use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("p = {p} outside the Hamiltonian domain |p| < {p_max}")]
    Domain { p: f64, p_max: f64 },
    #[error("root finder did not converge: {0}")]
    Convergence(String),
    #[error("maximiser lies on the sample boundary")]
    Bracket,
    #[error("value {v} is not below the supremum {sup} of the selection function")]
    BeyondRange { v: f64, sup: f64 },
    #[error("gradient {g} exceeds the maximal selection gradient {max}")]
    BeyondGradient { g: f64, max: f64 },
    #[error("speed {c} is beyond the tipping point {c_tip}")]
    Tipping { c: f64, c_tip: f64 },
    #[error("degenerate configuration: {0}")]
    Degenerate(String),
    #[error("characteristic singularity at z = {z}")]
    Singularity { z: f64 },
    #[error("1 + G(z) <= 0 at z = {z}")]
    Divergence { z: f64 },
    #[error("kernel under-resolved: eps/dz = {ratio} < 4")]
    Resolution { ratio: f64 },
    #[error("time step violates stability bound: {0}")]
    Cfl(String),
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("invalid parameter: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
