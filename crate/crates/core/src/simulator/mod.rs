//! Direct time marching of the scaled frequency equation
//!
//!   ∂t p = ε^γ c ∂z p − m p + B(p) − (1 − m̄) p,   m̄ = ∫ m p,
//!
//! to its travelling equilibrium, with explicit Euler steps and one-sided
//! upwind transport.

mod convolution;
mod operators;

pub use convolution::{
    centered, centered_direct, centered_fft, even_self, even_self_direct, even_self_fft, full_fft,
    ConvolutionMethod, Execution,
};
pub use operators::{
    gaussian_stencil, kernel_stencil, reproduce_asexual, reproduce_infinitesimal, Operator,
    Reproduction, MIN_RESOLUTION,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{trapezoid, Grid};
use crate::report::{EquilibriumReport, Source};
use crate::selection::Selection;

/// Upper bound on dt·|ε^γ c|/dz.
pub const CFL_MAX: f64 = 0.9;
/// Upper bound on dt·max m.
pub const REACTION_MAX: f64 = 0.5;
/// Courant bound used by the automatic step with second-order transport.
pub const SECOND_ORDER_CFL: f64 = 0.45;
/// Boundary-to-peak density ratio that triggers domain expansion.
pub const EXPAND_THRESHOLD: f64 = 1e-10;
/// Steps between boundary checks.
pub const EXPAND_EVERY: usize = 500;
/// Steps between samples of the mean in the divergence detector.
pub const DIVERGENCE_SAMPLE: usize = 1000;
/// Consecutive samples of monotone, non-decelerating drift that mean divergence.
pub const DIVERGENCE_WINDOWS: usize = 10;

/// Nonnegative density on a lattice grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub grid: Grid,
    pub values: Vec<f64>,
}

/// Trapezoid-rule moments. Skewness is μ₃/μ₂^{3/2}, kurtosis is excess.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mass: f64,
    pub mean: f64,
    pub var: f64,
    pub skew: f64,
    pub kurt: f64,
}

impl Distribution {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n {
            return Err(Error::Invalid(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.n
            )));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Invalid(format!("density value {v} is not a nonnegative number")));
        }
        Ok(Distribution { grid, values })
    }

    /// Normalised Gaussian sampled at the nodes.
    pub fn gaussian(grid: Grid, mean: f64, var: f64) -> Result<Self> {
        if !(var > 0.0 && var.is_finite() && mean.is_finite()) {
            return Err(Error::Invalid(format!("gaussian needs var > 0, got {var}")));
        }
        let values = grid
            .nodes()
            .iter()
            .map(|z| (-(z - mean).powi(2) / (2.0 * var)).exp())
            .collect();
        let mut d = Distribution::new(grid, values)?;
        d.normalize()?;
        Ok(d)
    }

    /// Unit mass concentrated on the node nearest to z.
    pub fn delta(grid: Grid, z: f64) -> Self {
        let mut values = vec![0.0; grid.n];
        values[grid.nearest(z)] = 1.0 / grid.dz;
        Distribution { grid, values }
    }

    pub fn nodes(&self) -> Vec<f64> {
        self.grid.nodes()
    }

    pub fn mass(&self) -> f64 {
        trapezoid(&self.values, self.grid.dz)
    }

    pub fn normalize(&mut self) -> Result<()> {
        let mass = self.mass();
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::Degenerate(format!("cannot normalise mass {mass}")));
        }
        for v in &mut self.values {
            *v /= mass;
        }
        Ok(())
    }

    pub fn moments(&self) -> Moments {
        moments(self)
    }

    /// Largest of the two end values relative to the peak.
    pub fn boundary_ratio(&self) -> f64 {
        let peak = self.values.iter().cloned().fold(0.0, f64::max);
        if peak <= 0.0 {
            return 0.0;
        }
        self.values[0].max(self.values[self.grid.n - 1]) / peak
    }

    /// Zero-padded copy on a grid extended by the given node counts.
    pub fn extended(&self, lo: usize, hi: usize) -> Distribution {
        let mut values = vec![0.0; lo];
        values.extend_from_slice(&self.values);
        values.resize(lo + self.grid.n + hi, 0.0);
        Distribution {
            grid: self.grid.extended(lo, hi),
            values,
        }
    }
}

pub fn moments(f: &Distribution) -> Moments {
    let z = f.grid.nodes();
    let dz = f.grid.dz;
    let mass = f.mass();
    let weighted = |g: &dyn Fn(f64) -> f64| -> f64 {
        let v: Vec<f64> = z.iter().zip(&f.values).map(|(z, p)| g(*z) * p).collect();
        trapezoid(&v, dz) / mass
    };
    let mean = weighted(&|z| z);
    let var = weighted(&|z| (z - mean).powi(2));
    let mu3 = weighted(&|z| (z - mean).powi(3));
    let mu4 = weighted(&|z| (z - mean).powi(4));
    let (skew, kurt) = if var > 0.0 {
        (mu3 / var.powf(1.5), mu4 / (var * var) - 3.0)
    } else {
        (0.0, 0.0)
    };
    Moments {
        mass,
        mean,
        var,
        skew,
        kurt,
    }
}

/// Spatial discretisation of the transport term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Advection {
    /// Two-point upwind difference. Adds a numerical diffusion |a|·dz/2 at
    /// equilibrium, which biases the variance and hence the lag at O(dz).
    FirstOrder,
    /// Three-point upwind difference, O(dz²) at equilibrium. May overshoot;
    /// negative values are clipped and counted.
    #[default]
    SecondOrder,
}

/// Scaled problem: selection, inheritance, ε and the scaled speed c.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub selection: Selection,
    pub reproduction: Reproduction,
    pub eps: f64,
    pub c: f64,
}

impl Problem {
    /// Transport coefficient ε^γ c.
    pub fn transport(&self) -> f64 {
        self.eps.powi(self.reproduction.mode().gamma()) * self.c
    }

    /// ε^γ, also the initial variance used by the tipping protocol.
    pub fn eps_gamma(&self) -> f64 {
        self.eps.powi(self.reproduction.mode().gamma())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Fixed time step; chosen from the stability bounds when absent.
    pub dt: Option<f64>,
    pub stop_tol: f64,
    pub max_iters: usize,
    pub advection: Advection,
    pub convolution: ConvolutionMethod,
    pub execution: Execution,
    /// Extend the domain when the density at an end exceeds EXPAND_THRESHOLD of the peak.
    pub expand: bool,
    pub max_expansions: usize,
    /// μ₀/β, used to turn λ into a population size.
    pub basal_ratio: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            dt: None,
            stop_tol: 1e-9,
            max_iters: 2_000_000,
            advection: Advection::SecondOrder,
            convolution: ConvolutionMethod::Direct,
            execution: Execution::Parallel,
            expand: true,
            max_expansions: 6,
            basal_ratio: 0.0,
        }
    }
}

/// Outcome of one Euler step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    /// ‖p_{k+1} − p_k‖∞ / dt.
    pub residual: f64,
    /// m̄ before the step.
    pub mean_mortality: f64,
    pub clipped: bool,
}

/// Precomputed stepping data for one problem on one grid.
#[derive(Debug, Clone)]
pub struct Stepper {
    problem: Problem,
    grid: Grid,
    op: Operator,
    m: Vec<f64>,
    a: f64,
    dt: f64,
    advection: Advection,
}

impl Stepper {
    pub fn new(problem: &Problem, grid: Grid, opts: &SolverOptions) -> Result<Self> {
        problem.selection.validate()?;
        if !(problem.c.is_finite() && problem.c >= 0.0) {
            return Err(Error::Invalid(format!("speed must be >= 0, got {}", problem.c)));
        }
        let op = Operator::new(
            problem.reproduction,
            problem.eps,
            grid.dz,
            grid.n,
            opts.convolution,
            opts.execution,
        )?;
        let m: Vec<f64> = grid.nodes().iter().map(|z| problem.selection.m(*z)).collect();
        let a = problem.transport();
        let m_max = m.iter().cloned().fold(0.0, f64::max);
        let dt = match opts.dt {
            Some(dt) => {
                check_dt(dt, a, grid.dz, m_max, op.diffusion_rate(), opts.advection)?;
                dt
            }
            None => auto_dt(a, grid.dz, m_max, op.diffusion_rate(), opts.advection),
        };
        Ok(Stepper {
            problem: *problem,
            grid,
            op,
            m,
            a,
            dt,
            advection: opts.advection,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    pub fn mean_mortality(&self, p: &[f64]) -> f64 {
        let mp: Vec<f64> = self.m.iter().zip(p).map(|(m, p)| m * p).collect();
        trapezoid(&mp, self.grid.dz)
    }

    /// One explicit Euler step in place, followed by clipping and renormalisation.
    pub fn step(&self, p: &mut [f64]) -> Result<StepInfo> {
        let n = self.grid.n;
        let dz = self.grid.dz;
        let mbar = self.mean_mortality(p);
        let birth = self.op.apply(p)?;
        let at = |i: i64| -> f64 {
            if i < 0 || i >= n as i64 {
                0.0
            } else {
                p[i as usize]
            }
        };
        // Information travels against the sign of a: forward differences for a > 0.
        let s: i64 = if self.a >= 0.0 { 1 } else { -1 };
        let mut next = vec![0.0; n];
        let mut clipped = false;
        for i in 0..n {
            let ii = i as i64;
            let grad = match self.advection {
                Advection::FirstOrder => s as f64 * (at(ii + s) - at(ii)) / dz,
                Advection::SecondOrder => {
                    s as f64 * (-3.0 * at(ii) + 4.0 * at(ii + s) - at(ii + 2 * s)) / (2.0 * dz)
                }
            };
            let rhs = self.a * grad - self.m[i] * p[i] + birth[i] - (1.0 - mbar) * p[i];
            let v = p[i] + self.dt * rhs;
            next[i] = if v < 0.0 {
                clipped = true;
                0.0
            } else {
                v
            };
        }
        let mass = trapezoid(&next, dz);
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::Degenerate(format!("mass {mass} after a step")));
        }
        let mut residual = 0.0_f64;
        for (old, new) in p.iter_mut().zip(&next) {
            let v = new / mass;
            residual = residual.max((v - *old).abs());
            *old = v;
        }
        Ok(StepInfo {
            residual: residual / self.dt,
            mean_mortality: mbar,
            clipped,
        })
    }
}

fn check_dt(
    dt: f64,
    a: f64,
    dz: f64,
    m_max: f64,
    diffusion: f64,
    advection: Advection,
) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Cfl(format!("dt = {dt} must be positive")));
    }
    if dt * a.abs() / dz > CFL_MAX {
        return Err(Error::Cfl(format!(
            "dt·|a|/dz = {} exceeds {CFL_MAX}",
            dt * a.abs() / dz
        )));
    }
    if dt * m_max > REACTION_MAX {
        return Err(Error::Cfl(format!(
            "dt·max m = {} exceeds {REACTION_MAX}",
            dt * m_max
        )));
    }
    let stencil = match advection {
        Advection::FirstOrder => 1.0,
        Advection::SecondOrder => 2.0,
    };
    let stiff = dt * (stencil * a.abs() / dz + diffusion);
    if stiff > 1.0 {
        return Err(Error::Cfl(format!(
            "dt·({stencil}|a|/dz + eps²/dz²) = {stiff} exceeds 1"
        )));
    }
    Ok(())
}

/// Largest step meeting the Courant and reaction bounds and the forward Euler
/// bound dt·(s|a|/dz + ε²/dz²) ≤ 1 at the grid-scale mode, where s is 1 for the
/// two-point stencil (which also keeps the update a convex combination) and 2
/// for the three-point one.
pub fn auto_dt(a: f64, dz: f64, m_max: f64, diffusion: f64, advection: Advection) -> f64 {
    let (stencil, cfl) = match advection {
        Advection::FirstOrder => (1.0, CFL_MAX),
        Advection::SecondOrder => (2.0, SECOND_ORDER_CFL),
    };
    let mut dt = (1.0 / (1.0 + stencil * a.abs() / dz + m_max + diffusion)).min(0.5);
    if m_max > 0.0 {
        dt = dt.min(REACTION_MAX / m_max);
    }
    if a != 0.0 {
        dt = dt.min(cfl * dz / a.abs());
    }
    dt
}

/// One step of the scaled equation with default discretisation choices.
pub fn step(
    p: &Distribution,
    selection: &Selection,
    reproduction: &Reproduction,
    eps: f64,
    c: f64,
    dt: f64,
) -> Result<Distribution> {
    let problem = Problem {
        selection: *selection,
        reproduction: *reproduction,
        eps,
        c,
    };
    let opts = SolverOptions {
        dt: Some(dt),
        ..SolverOptions::default()
    };
    let stepper = Stepper::new(&problem, p.grid, &opts)?;
    let mut values = p.values.clone();
    stepper.step(&mut values)?;
    Ok(Distribution {
        grid: p.grid,
        values,
    })
}

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Termination {
    Converged,
    Diverged,
    MaxIterations,
}

/// Raw result of a time-marching run.
#[derive(Debug, Clone, PartialEq)]
pub struct Run {
    pub distribution: Distribution,
    pub termination: Termination,
    pub iterations: usize,
    pub residual: f64,
    /// Steps in which a negative value was clipped.
    pub clipped: usize,
    pub expansions: usize,
    pub lambda: f64,
}

impl Run {
    pub fn report(&self, basal_ratio: f64) -> EquilibriumReport {
        let mo = self.distribution.moments();
        EquilibriumReport {
            lambda: self.lambda,
            zstar: mo.mean,
            var: mo.var,
            skew: Some(mo.skew),
            kurt: Some(mo.kurt),
            rho: (self.lambda - basal_ratio) / (1.0 - basal_ratio),
            source: Source::Simulation {
                converged: self.termination == Termination::Converged,
                iterations: self.iterations,
                residual: self.residual,
                clipped: self.clipped,
            },
        }
    }
}

/// Flags runs whose mean leaves the domain or drifts away from the optimum
/// steadily: over DIVERGENCE_WINDOWS samples |mean| must grow at every sample
/// with increments that do not shrink, which an approach to an equilibrium
/// (exponentially decelerating) never shows.
#[derive(Debug, Clone, Default)]
struct DivergenceDetector {
    samples: Vec<f64>,
}

impl DivergenceDetector {
    /// Shrinking of successive increments tolerated as noise.
    const SLACK: f64 = 0.98;

    fn beyond(&self, mean: f64, grid: &Grid) -> bool {
        mean.abs() > 0.9 * grid.z_min().abs().max(grid.z_max().abs())
    }

    fn diverged(&mut self, mean: f64, grid: &Grid) -> bool {
        if self.beyond(mean, grid) {
            return true;
        }
        self.samples.push(mean.abs());
        let k = self.samples.len();
        if k < DIVERGENCE_WINDOWS + 2 {
            return false;
        }
        let w = &self.samples[k - DIVERGENCE_WINDOWS - 2..];
        let inc: Vec<f64> = w.windows(2).map(|p| p[1] - p[0]).collect();
        inc.iter().all(|d| *d > 0.0) && inc.windows(2).all(|d| d[1] >= Self::SLACK * d[0])
    }
}

/// Time-marches from `init` until the residual drops below stop_tol, the
/// detector fires (if enabled) or max_iters is exhausted.
pub fn run(
    init: &Distribution,
    problem: &Problem,
    opts: &SolverOptions,
    detect_divergence: bool,
) -> Result<Run> {
    let mut dist = init.clone();
    dist.normalize()?;
    let mut stepper = Stepper::new(problem, dist.grid, opts)?;
    let mut detector = DivergenceDetector::default();
    let mut clipped = 0;
    let mut expansions = 0;
    let mut residual = f64::INFINITY;
    let mut termination = Termination::MaxIterations;
    let mut iterations = 0;
    while iterations < opts.max_iters {
        let info = stepper.step(&mut dist.values)?;
        iterations += 1;
        residual = info.residual;
        if info.clipped {
            clipped += 1;
        }
        if residual < opts.stop_tol {
            // A stationary state resting on the domain edge is the outflow
            // boundary holding a diverging population, not an equilibrium.
            let pinned = dist.boundary_ratio() > EXPAND_THRESHOLD
                || detector.beyond(dist.moments().mean, &dist.grid);
            termination = if detect_divergence && pinned {
                Termination::Diverged
            } else {
                Termination::Converged
            };
            break;
        }
        if detect_divergence && iterations % DIVERGENCE_SAMPLE == 0 {
            let mean = dist.moments().mean;
            if detector.diverged(mean, &dist.grid) {
                termination = Termination::Diverged;
                break;
            }
        }
        if opts.expand && expansions < opts.max_expansions && iterations % EXPAND_EVERY == 0 {
            let n = dist.grid.n;
            let peak = dist.values.iter().cloned().fold(0.0, f64::max);
            let lo = dist.values[0] > EXPAND_THRESHOLD * peak;
            let hi = dist.values[n - 1] > EXPAND_THRESHOLD * peak;
            if lo || hi {
                let extra = (n / 4).max(8);
                dist = dist.extended(if lo { extra } else { 0 }, if hi { extra } else { 0 });
                stepper = Stepper::new(problem, dist.grid, opts)?;
                expansions += 1;
            }
        }
    }
    let lambda = 1.0 - stepper.mean_mortality(&dist.values);
    Ok(Run {
        distribution: dist,
        termination,
        iterations,
        residual,
        clipped,
        expansions,
        lambda,
    })
}

/// Travelling equilibrium reached from `init`.
pub fn solve_equilibrium(
    init: &Distribution,
    problem: &Problem,
    opts: &SolverOptions,
) -> Result<(EquilibriumReport, Distribution)> {
    let r = run(init, problem, opts, false)?;
    match r.termination {
        Termination::Converged => Ok((r.report(opts.basal_ratio), r.distribution)),
        _ => Err(Error::NoConvergence {
            iterations: r.iterations,
            residual: r.residual,
        }),
    }
}

/// Fate of one (c, z_init) run in a tipping sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "lowercase")]
pub enum Outcome {
    Converged { zstar: f64, lambda: f64, iterations: usize },
    Diverged { mean: f64, iterations: usize },
    Undecided { mean: f64, residual: f64, iterations: usize },
}

impl Outcome {
    pub fn converged(&self) -> bool {
        matches!(self, Outcome::Converged { .. })
    }

    pub fn diverged(&self) -> bool {
        matches!(self, Outcome::Diverged { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasinPoint {
    pub c: f64,
    pub z_init: f64,
    pub outcome: Outcome,
}

/// Estimated edge of the basin of attraction at one speed: the midpoint
/// between the farthest converging and the nearest diverging initial lag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasinBoundary {
    pub c: f64,
    pub z_boundary: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasinMap {
    /// Row-major in (c, z_init) input order.
    pub points: Vec<BasinPoint>,
    pub boundaries: Vec<BasinBoundary>,
}

/// Runs every (c, z_init) pair from a Gaussian of variance ε^γ on a fixed
/// domain and classifies the fate of the mean.
pub fn tipping_sweep(
    selection: &Selection,
    reproduction: &Reproduction,
    eps: f64,
    c_list: &[f64],
    zinit_list: &[f64],
    grid: Grid,
    opts: &SolverOptions,
) -> Result<BasinMap> {
    let jobs: Vec<(f64, f64)> = c_list
        .iter()
        .flat_map(|c| zinit_list.iter().map(move |z| (*c, *z)))
        .collect();
    let parallel = opts.execution.is_parallel();
    let inner = SolverOptions {
        expand: false,
        execution: if parallel { Execution::Sequential } else { opts.execution },
        ..*opts
    };
    let one = |&(c, z_init): &(f64, f64)| -> Result<BasinPoint> {
        let problem = Problem {
            selection: *selection,
            reproduction: *reproduction,
            eps,
            c,
        };
        let init = Distribution::gaussian(grid, z_init, problem.eps_gamma())?;
        let r = run(&init, &problem, &inner, true)?;
        let mean = r.distribution.moments().mean;
        let outcome = match r.termination {
            Termination::Converged => Outcome::Converged {
                zstar: mean,
                lambda: r.lambda,
                iterations: r.iterations,
            },
            Termination::Diverged => Outcome::Diverged {
                mean,
                iterations: r.iterations,
            },
            Termination::MaxIterations => Outcome::Undecided {
                mean,
                residual: r.residual,
                iterations: r.iterations,
            },
        };
        Ok(BasinPoint { c, z_init, outcome })
    };
    let points: Vec<BasinPoint> = map_jobs(&jobs, parallel, one)?;
    let boundaries = c_list
        .iter()
        .map(|&c| {
            let mut row: Vec<&BasinPoint> = points.iter().filter(|p| p.c == c).collect();
            row.sort_by(|a, b| a.z_init.abs().total_cmp(&b.z_init.abs()));
            let z_boundary = row.windows(2).find_map(|w| {
                (w[0].outcome.converged() && w[1].outcome.diverged())
                    .then(|| 0.5 * (w[0].z_init + w[1].z_init))
            });
            BasinBoundary { c, z_boundary }
        })
        .collect();
    Ok(BasinMap { points, boundaries })
}

/// Maps jobs in order, on the rayon pool when requested and available.
pub fn map_jobs<J, T, F>(jobs: &[J], parallel: bool, f: F) -> Result<Vec<T>>
where
    J: Sync,
    T: Send,
    F: Fn(&J) -> Result<T> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel {
        use rayon::prelude::*;
        return jobs.par_iter().map(&f).collect();
    }
    let _ = parallel;
    jobs.iter().map(f).collect()
}
