use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::{ExperimentConfig, ExperimentKind, Series, SolverConfig, Sweep};
use crate::asymptotics::{self, asexual_u0, asexual_u1, infinitesimal_u1, predict, Prediction};
use crate::error::{Error, Result};
use crate::grid::{trapezoid, Grid};
use crate::kernels::Kernel;
use crate::report::{EquilibriumReport, Order};
use crate::scaling::{ModelParams, Mode};
use crate::selection::Selection;
use crate::simulator::{self, Distribution, Execution, Problem, Reproduction, Run, SolverOptions, Termination};

/// Bulk log-density gap above which an asymptotic profile is flagged as a poor fit.
pub const POOR_FIT_GAP: f64 = 0.3;

/// Half-width of the bulk, in simulated standard deviations, over which
/// log-density gaps are measured.
pub const BULK_SD: f64 = 2.0;

/// One sweep point of one series, resolved to scaled units.
#[derive(Debug, Clone)]
pub struct Point {
    pub series: usize,
    pub label: String,
    /// Position along the sweep; the kernel index for kernel sweeps.
    pub sweep_value: f64,
    pub params: ModelParams,
    pub mode: Mode,
    pub kernel: Kernel,
    /// Scaled selection function.
    pub selection: Selection,
    pub eps: f64,
    /// Scaled speed.
    pub c: f64,
}

impl Point {
    pub fn reproduction(&self) -> Reproduction {
        match self.mode {
            Mode::Asexual => Reproduction::Asexual { kernel: self.kernel },
            Mode::Infinitesimal => Reproduction::Infinitesimal,
        }
    }

    pub fn problem(&self) -> Problem {
        Problem {
            selection: self.selection,
            reproduction: self.reproduction(),
            eps: self.eps,
            c: self.c,
        }
    }

    pub fn predict(&self, order: Order) -> Result<Prediction> {
        predict(self.mode, &self.kernel, &self.selection, self.eps, self.c, order)
    }

    pub fn basal_ratio(&self) -> f64 {
        self.params.mu0 / self.params.beta
    }
}

fn resolve(params: ModelParams, series: usize, s: &Series, kernel: Option<Kernel>, sweep_value: f64) -> Point {
    let s = Series {
        kernel: kernel.or(s.kernel),
        ..s.clone()
    };
    let scaled = params.to_scaled(s.mode);
    Point {
        series,
        label: s.label(),
        sweep_value,
        params,
        mode: s.mode,
        kernel: s.kernel_or_default(),
        selection: params.scale_selection(s.selection),
        eps: scaled.eps,
        c: scaled.c,
    }
}

/// All (series, sweep point) pairs, series-major. z_init sweeps resolve to the
/// base parameters.
pub fn points(cfg: &ExperimentConfig) -> Vec<Point> {
    let mut out = Vec::new();
    for (k, s) in cfg.series.iter().enumerate() {
        match &cfg.sweep {
            Sweep::C { values } => {
                for &c in values {
                    out.push(resolve(ModelParams { c, ..cfg.params }, k, s, None, c));
                }
            }
            Sweep::Alpha { values } => {
                for &alpha in values {
                    out.push(resolve(ModelParams { alpha, ..cfg.params }, k, s, None, alpha));
                }
            }
            Sweep::ZInit { .. } => out.push(resolve(cfg.params, k, s, None, cfg.params.c)),
            Sweep::Kernel { values } => {
                for (j, kern) in values.iter().enumerate() {
                    out.push(resolve(cfg.params, k, s, Some(*kern), j as f64));
                }
            }
        }
    }
    out
}

/// Solver options for one job; nested loops stay sequential under a parallel sweep.
pub fn solver_options(solver: &SolverConfig, basal_ratio: f64, outer_parallel: bool) -> SolverOptions {
    SolverOptions {
        stop_tol: solver.stop_tol,
        max_iters: solver.max_iters,
        advection: solver.advection,
        convolution: solver.convolution,
        execution: if outer_parallel {
            Execution::Sequential
        } else {
            Execution::Parallel
        },
        expand: solver.expand,
        basal_ratio,
        ..SolverOptions::default()
    }
}

pub fn grid_spacing(solver: &SolverConfig, eps: f64) -> f64 {
    solver.dz.unwrap_or(eps / solver.resolution)
}

/// Simulation grid: the configured range, or `width_sd` standard deviations
/// around the predicted lag.
pub fn simulation_grid(solver: &SolverConfig, eps: f64, center: f64, var: f64) -> Result<Grid> {
    let dz = grid_spacing(solver, eps);
    match solver.z_range {
        Some([lo, hi]) => Grid::new(lo, hi, dz),
        None => {
            let half = (solver.width_sd * var.sqrt()).max(20.0 * dz);
            Grid::new(center - half, center + half, dz)
        }
    }
}

/// Outcome of simulating one point from the predicted equilibrium.
#[derive(Debug, Clone)]
pub struct Simulated {
    pub leading: Result<Prediction>,
    pub corrected: Result<Prediction>,
    pub run: Result<Run>,
}

/// Simulates a point from a Gaussian at the best available prediction.
pub fn simulate_point(point: &Point, solver: &SolverConfig, outer_parallel: bool) -> Simulated {
    let leading = point.predict(Order::Leading);
    let corrected = point.predict(Order::FirstCorrection);
    let run = (|| {
        let guess = corrected
            .as_ref()
            .or(leading.as_ref())
            .map_err(|e| Error::Invalid(format!("no prediction to start from: {e}")))?;
        let dz = grid_spacing(solver, point.eps);
        let mut var = guess.var();
        if !(var.is_finite() && var > 0.0) {
            var = point.eps.powi(point.mode.gamma());
        }
        var = var.max(16.0 * dz * dz);
        let grid = simulation_grid(solver, point.eps, guess.zstar(), var)?;
        let init = Distribution::gaussian(grid, guess.zstar(), var)?;
        let opts = solver_options(solver, point.basal_ratio(), outer_parallel);
        simulator::run(&init, &point.problem(), &opts, false)
    })();
    Simulated {
        leading,
        corrected,
        run,
    }
}

fn parallel_sweeps() -> bool {
    Execution::Parallel.is_parallel()
}

/// 17 significant digits, `NaN` for missing values.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

fn opt(x: Option<f64>) -> String {
    num(x.unwrap_or(f64::NAN))
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let io = |e: csv::Error| Error::Invalid(format!("writing {}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    w.flush()
        .map_err(|e| Error::Invalid(format!("writing {}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Invalid(format!("writing {}: {e}", path.display())))
}

fn toml_text<T: Serialize>(v: &T) -> Result<String> {
    toml::to_string(v).map_err(|e| Error::Invalid(format!("summary: {e}")))
}

/// Files written by an experiment and the number of failed points.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub failures: usize,
}

fn prepare(cfg: &ExperimentConfig, out: &Path) -> Result<PathBuf> {
    cfg.validate()?;
    fs::create_dir_all(out).map_err(|e| Error::Invalid(format!("creating {}: {e}", out.display())))?;
    let manifest = out.join("manifest.toml");
    write_text(&manifest, &cfg.to_toml()?)?;
    Ok(manifest)
}

/// Runs the experiment matching `cfg.kind`.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<ExperimentOutput> {
    match cfg.kind {
        ExperimentKind::Compare => run_compare(cfg, out),
        ExperimentKind::Tipping => run_tipping(cfg, out),
        ExperimentKind::Distribution => run_distribution(cfg, out),
    }
}

/// One row of the comparison table, dimensional.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub series: String,
    pub sweep_value: f64,
    pub params: ModelParams,
    pub eps: f64,
    pub c_scaled: f64,
    pub status: String,
    pub message: String,
    pub simulated: Option<EquilibriumReport>,
    pub leading: Option<EquilibriumReport>,
    pub corrected: Option<EquilibriumReport>,
}

impl CompareRow {
    pub fn ok(&self) -> bool {
        self.status == "ok"
    }

    /// |simulated − predicted| for (λ, z*, Var).
    pub fn gaps(&self, order: Order) -> [f64; 3] {
        let pred = match order {
            Order::Leading => &self.leading,
            Order::FirstCorrection => &self.corrected,
        };
        match (&self.simulated, pred) {
            (Some(s), Some(p)) => [
                (s.lambda - p.lambda).abs(),
                (s.zstar - p.zstar).abs(),
                (s.var - p.var).abs(),
            ],
            _ => [f64::NAN; 3],
        }
    }
}

pub fn compare_point(point: &Point, solver: &SolverConfig, outer_parallel: bool) -> CompareRow {
    let p = point.params;
    let basal = point.basal_ratio();
    let dim = |r: EquilibriumReport| p.from_scaled(&r);
    let mut row = CompareRow {
        series: point.label.clone(),
        sweep_value: point.sweep_value,
        params: p,
        eps: point.eps,
        c_scaled: point.c,
        status: "ok".into(),
        message: String::new(),
        simulated: None,
        leading: None,
        corrected: None,
    };
    let mut notes = Vec::new();
    let sim = if solver.simulate {
        simulate_point(point, solver, outer_parallel)
    } else {
        Simulated {
            leading: point.predict(Order::Leading),
            corrected: point.predict(Order::FirstCorrection),
            run: Err(Error::Invalid("simulation disabled".into())),
        }
    };
    match &sim.leading {
        Ok(pr) => row.leading = Some(dim(pr.report(basal))),
        Err(e) => notes.push(format!("leading: {e}")),
    }
    match &sim.corrected {
        Ok(pr) => row.corrected = Some(dim(pr.report(basal))),
        Err(e) => notes.push(format!("correction: {e}")),
    }
    if solver.simulate {
        match &sim.run {
            Ok(r) => {
                row.simulated = Some(dim(r.report(basal)));
                if r.termination != Termination::Converged {
                    row.status = "not_converged".into();
                    notes.push(format!("residual {:e} after {} iterations", r.residual, r.iterations));
                }
            }
            Err(e) => {
                row.status = "simulation_failed".into();
                notes.push(e.to_string());
            }
        }
    }
    if row.ok() && row.leading.is_none() {
        row.status = "prediction_failed".into();
    }
    row.message = notes.join("; ");
    row
}

const COMPARE_HEADER: &[&str] = &[
    "series", "sweep", "c", "alpha", "beta", "sigma", "mu0", "eps", "c_scaled", "status",
    "sim_lambda", "sim_zstar", "sim_var", "sim_skew", "sim_kurt", "sim_rho", "iterations",
    "residual", "clipped", "lead_lambda", "lead_zstar", "lead_var", "corr_lambda",
    "corr_zstar", "corr_var", "gap_lambda_lead", "gap_zstar_lead", "gap_var_lead",
    "gap_lambda_corr", "gap_zstar_corr", "gap_var_corr", "rel_lambda_corr", "rel_zstar_corr",
    "rel_var_corr", "message",
];

fn compare_record(sweep: &Sweep, r: &CompareRow) -> Vec<String> {
    let sweep_text = match sweep {
        Sweep::Kernel { values } => values[r.sweep_value as usize].name(),
        _ => num(r.sweep_value),
    };
    let (iters, residual, clipped) = match r.simulated.as_ref().map(|s| &s.source) {
        Some(crate::report::Source::Simulation {
            iterations,
            residual,
            clipped,
            ..
        }) => (iterations.to_string(), num(*residual), clipped.to_string()),
        _ => (String::new(), num(f64::NAN), String::new()),
    };
    let field = |rep: &Option<EquilibriumReport>, f: fn(&EquilibriumReport) -> f64| {
        num(rep.as_ref().map_or(f64::NAN, f))
    };
    let lead = r.gaps(Order::Leading);
    let corr = r.gaps(Order::FirstCorrection);
    let rel = |g: f64, f: fn(&EquilibriumReport) -> f64| {
        num(r.corrected.as_ref().map_or(f64::NAN, |c| g / f(c).abs()))
    };
    let s = &r.simulated;
    let mut rec = vec![
        r.series.clone(),
        sweep_text,
        num(r.params.c),
        num(r.params.alpha),
        num(r.params.beta),
        num(r.params.sigma),
        num(r.params.mu0),
        num(r.eps),
        num(r.c_scaled),
        r.status.clone(),
        field(s, |x| x.lambda),
        field(s, |x| x.zstar),
        field(s, |x| x.var),
        opt(s.as_ref().and_then(|x| x.skew)),
        opt(s.as_ref().and_then(|x| x.kurt)),
        field(s, |x| x.rho),
        iters,
        residual,
        clipped,
        field(&r.leading, |x| x.lambda),
        field(&r.leading, |x| x.zstar),
        field(&r.leading, |x| x.var),
        field(&r.corrected, |x| x.lambda),
        field(&r.corrected, |x| x.zstar),
        field(&r.corrected, |x| x.var),
    ];
    rec.extend(lead.iter().chain(corr.iter()).map(|g| num(*g)));
    rec.push(rel(corr[0], |x| x.lambda));
    rec.push(rel(corr[1], |x| x.zstar));
    rec.push(rel(corr[2], |x| x.var));
    rec.push(r.message.clone());
    rec
}

#[derive(Debug, Clone, Serialize)]
struct SeriesSummary {
    series: String,
    points: usize,
    failures: usize,
    max_gap_lambda_lead: f64,
    max_gap_zstar_lead: f64,
    max_gap_var_lead: f64,
    max_gap_lambda_corr: f64,
    max_gap_zstar_corr: f64,
    max_gap_var_corr: f64,
}

#[derive(Debug, Clone, Serialize)]
struct CompareSummary {
    experiment: String,
    points: usize,
    failures: usize,
    series: Vec<SeriesSummary>,
}

fn max_finite(v: impl Iterator<Item = f64>) -> f64 {
    v.filter(|x| x.is_finite()).fold(f64::NAN, f64::max)
}

/// Simulated and asymptotic equilibria along the sweep, one row per point.
pub fn compare_rows(cfg: &ExperimentConfig) -> Result<Vec<CompareRow>> {
    cfg.validate()?;
    let pts = points(cfg);
    let parallel = parallel_sweeps();
    let mut rows = simulator::map_jobs(&pts, parallel, |p| Ok(compare_point(p, &cfg.solver, parallel)))?;
    // Series-major, then by sweep value.
    let mut keyed: Vec<(usize, f64, CompareRow)> =
        pts.iter().zip(rows.drain(..)).map(|(p, r)| (p.series, p.sweep_value, r)).collect();
    keyed.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    Ok(keyed.into_iter().map(|(_, _, r)| r).collect())
}

pub fn run_compare(cfg: &ExperimentConfig, out: &Path) -> Result<ExperimentOutput> {
    let manifest = prepare(cfg, out)?;
    let rows = compare_rows(cfg)?;
    let table = out.join("compare.csv");
    let records: Vec<Vec<String>> = rows.iter().map(|r| compare_record(&cfg.sweep, r)).collect();
    write_csv(&table, COMPARE_HEADER, &records)?;

    let mut labels: Vec<String> = Vec::new();
    for r in &rows {
        if !labels.contains(&r.series) {
            labels.push(r.series.clone());
        }
    }
    let series: Vec<SeriesSummary> = labels
        .iter()
        .map(|l| {
            let rs: Vec<&CompareRow> = rows.iter().filter(|r| &r.series == l).collect();
            let g = |order, k: usize| max_finite(rs.iter().map(|r| r.gaps(order)[k]));
            SeriesSummary {
                series: l.clone(),
                points: rs.len(),
                failures: rs.iter().filter(|r| !r.ok()).count(),
                max_gap_lambda_lead: g(Order::Leading, 0),
                max_gap_zstar_lead: g(Order::Leading, 1),
                max_gap_var_lead: g(Order::Leading, 2),
                max_gap_lambda_corr: g(Order::FirstCorrection, 0),
                max_gap_zstar_corr: g(Order::FirstCorrection, 1),
                max_gap_var_corr: g(Order::FirstCorrection, 2),
            }
        })
        .collect();
    let failures = rows.iter().filter(|r| !r.ok()).count();
    let summary = out.join("summary.toml");
    write_text(
        &summary,
        &toml_text(&CompareSummary {
            experiment: cfg.name.clone(),
            points: rows.len(),
            failures,
            series,
        })?,
    )?;
    Ok(ExperimentOutput {
        dir: out.to_path_buf(),
        files: vec![manifest, table, summary],
        failures,
    })
}

/// Stable and unstable leading-order lags and the tipping speed, scaled. The
/// asexual model has no unstable lag.
pub fn tipping_overlay(point: &Point) -> (Option<f64>, Option<f64>, f64) {
    match point.mode {
        Mode::Asexual => {
            let zs = point.predict(Order::Leading).ok().map(|p| p.zstar0);
            let c_tip = asymptotics::asexual_tipping_speed(&point.kernel, &point.selection).unwrap_or(f64::NAN);
            (zs, None, c_tip)
        }
        Mode::Infinitesimal => {
            let zs = point.selection.gradient_inverse_convex(point.c).ok().map(|z| -z);
            let zu = point
                .selection
                .gradient_inverse_concave(point.c)
                .ok()
                .flatten()
                .map(|z| -z);
            let c_tip = asymptotics::infinitesimal_tipping_speed(&point.selection);
            (zs, zu, c_tip)
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct TippingSummary {
    experiment: String,
    runs: usize,
    converged: usize,
    diverged: usize,
    undecided: usize,
}

/// Basin map over (c, z_init) with the analytic lags as overlay columns.
pub fn run_tipping(cfg: &ExperimentConfig, out: &Path) -> Result<ExperimentOutput> {
    let manifest = prepare(cfg, out)?;
    let zinit_dim = &cfg
        .tipping
        .as_ref()
        .ok_or_else(|| Error::Invalid("missing [tipping]".into()))?
        .z_init;
    let parallel = parallel_sweeps();
    let mut rows = Vec::new();
    let mut bounds = Vec::new();
    let (mut conv, mut div, mut und) = (0, 0, 0);
    let pts = points(cfg);
    for (k, _) in cfg.series.iter().enumerate() {
        let sp: Vec<&Point> = pts.iter().filter(|p| p.series == k).collect();
        let first = sp[0];
        let ts = first.params.trait_scale();
        let unit = first.params.speed_scale(first.mode);
        let c_list: Vec<f64> = sp.iter().map(|p| p.c).collect();
        let zinit: Vec<f64> = zinit_dim.iter().map(|z| z / ts).collect();
        let dz = grid_spacing(&cfg.solver, first.eps);
        let [lo, hi] = cfg.solver.z_range.expect("validated");
        let grid = Grid::new(lo, hi, dz)?;
        let mut opts = solver_options(&cfg.solver, first.basal_ratio(), false);
        if !parallel {
            opts.execution = Execution::Sequential;
        }
        let map = simulator::tipping_sweep(
            &first.selection,
            &first.reproduction(),
            first.eps,
            &c_list,
            &zinit,
            grid,
            &opts,
        )?;
        for bp in &map.points {
            let point = sp.iter().find(|p| p.c == bp.c).expect("speed from the list");
            let (zs, zu, c_tip) = tipping_overlay(point);
            let (outcome, z_final, lambda, iters) = match bp.outcome {
                simulator::Outcome::Converged {
                    zstar,
                    lambda,
                    iterations,
                } => {
                    conv += 1;
                    ("converged", zstar, lambda, iterations)
                }
                simulator::Outcome::Diverged { mean, iterations } => {
                    div += 1;
                    ("diverged", mean, f64::NAN, iterations)
                }
                simulator::Outcome::Undecided { mean, iterations, .. } => {
                    und += 1;
                    ("undecided", mean, f64::NAN, iterations)
                }
            };
            rows.push(vec![
                point.label.clone(),
                num(bp.c * unit),
                num(bp.c),
                num(bp.z_init * ts),
                outcome.into(),
                num(z_final * ts),
                num(first.params.lambda_from_scaled(lambda)),
                iters.to_string(),
                opt(zs.map(|z| z * ts)),
                opt(zu.map(|z| z * ts)),
                num(c_tip * unit),
            ]);
        }
        for b in &map.boundaries {
            let point = sp.iter().find(|p| p.c == b.c).expect("speed from the list");
            let (_, zu, _) = tipping_overlay(point);
            bounds.push(vec![
                point.label.clone(),
                num(b.c * unit),
                opt(b.z_boundary.map(|z| z * ts)),
                opt(zu.map(|z| z * ts)),
            ]);
        }
    }
    let basin = out.join("basin.csv");
    write_csv(
        &basin,
        &[
            "series", "c", "c_scaled", "z_init", "outcome", "z_final", "lambda", "iterations",
            "zstar_stable", "zstar_unstable", "c_tip",
        ],
        &rows,
    )?;
    let boundary = out.join("basin_boundary.csv");
    write_csv(&boundary, &["series", "c", "z_boundary", "zstar_unstable"], &bounds)?;
    let summary = out.join("summary.toml");
    write_text(
        &summary,
        &toml_text(&TippingSummary {
            experiment: cfg.name.clone(),
            runs: rows.len(),
            converged: conv,
            diverged: div,
            undecided: und,
        })?,
    )?;
    Ok(ExperimentOutput {
        dir: out.to_path_buf(),
        files: vec![manifest, basin, boundary, summary],
        failures: und,
    })
}

/// Simulated equilibrium with the asymptotic profiles on the same nodes, scaled.
#[derive(Debug, Clone)]
pub struct ProfileComparison {
    pub run: Run,
    pub f0: Result<Vec<f64>>,
    pub f1: Result<Vec<f64>>,
    /// Sup of |log F − log F₀| and |log F − log F₁| over the bulk.
    pub gap0: f64,
    pub gap1: f64,
}

fn renormalized(values: Vec<f64>, dz: f64) -> Vec<f64> {
    let mass = trapezoid(&values, dz);
    values.into_iter().map(|v| v / mass).collect()
}

/// Asymptotic densities sampled on `grid`. The asexual profile is solved on
/// the smallest lattice grid that also straddles the optimum and then cut.
pub fn profile_densities(point: &Point, grid: &Grid) -> (Result<Vec<f64>>, Result<Vec<f64>>) {
    let dz = grid.dz;
    let cut = |full: &Grid, v: Vec<f64>| {
        let start = (grid.offset - full.offset) as usize;
        renormalized(v[start..start + grid.n].to_vec(), dz)
    };
    match point.mode {
        Mode::Asexual => {
            let full = Grid::new(grid.z_min().min(-2.0 * dz), grid.z_max().max(2.0 * dz), dz);
            let full = match full {
                Ok(g) => g,
                Err(e) => return (Err(e.clone()), Err(e)),
            };
            let u0 = match asexual_u0(&point.kernel, &point.selection, point.c, &full) {
                Ok(p) => p,
                Err(e) => return (Err(e.clone()), Err(e)),
            };
            let (f0, _) = u0.densities(point.eps);
            let f1 = asexual_u1(&point.kernel, &point.selection, point.c, &u0)
                .map(|p| cut(&full, p.densities(point.eps).1.expect("corrector present")));
            (Ok(cut(&full, f0)), f1)
        }
        Mode::Infinitesimal => match infinitesimal_u1(&point.selection, point.c, grid) {
            Ok(p) => {
                let (f0, f1) = p.densities(point.eps);
                (Ok(renormalized(f0, dz)), Ok(renormalized(f1.expect("corrector present"), dz)))
            }
            Err(e) => (Err(e.clone()), Err(e)),
        },
    }
}

/// Sup-norm of the log-density gap over |z − mean| ≤ half_sd·sd of `sim`.
pub fn bulk_log_gap(sim: &Distribution, model: &[f64], half_sd: f64) -> f64 {
    let mo = sim.moments();
    let sd = mo.var.sqrt();
    sim.nodes()
        .iter()
        .zip(sim.values.iter().zip(model))
        .filter(|(z, _)| (**z - mo.mean).abs() <= half_sd * sd)
        .map(|(_, (f, g))| (f.ln() - g.ln()).abs())
        .fold(0.0, |a, b| if b.is_nan() { f64::INFINITY } else { a.max(b) })
}

/// Simulates a point and compares it with F₀ and F₁ on the simulation grid.
pub fn compare_profile(point: &Point, solver: &SolverConfig) -> Result<ProfileComparison> {
    let run = simulate_point(point, solver, false).run?;
    let (f0, f1) = profile_densities(point, &run.distribution.grid);
    let gap = |f: &Result<Vec<f64>>| f.as_ref().map_or(f64::NAN, |v| bulk_log_gap(&run.distribution, v, BULK_SD));
    let gap0 = gap(&f0);
    let gap1 = gap(&f1);
    Ok(ProfileComparison {
        run,
        f0,
        f1,
        gap0,
        gap1,
    })
}

#[derive(Debug, Clone, Serialize)]
struct ProfileSummary {
    series: String,
    c: f64,
    status: String,
    converged: bool,
    lambda: f64,
    zstar: f64,
    var: f64,
    skew: f64,
    kurt: f64,
    bulk_log_gap_f0: f64,
    bulk_log_gap_f1: f64,
    poor_fit_f0: bool,
    poor_fit_f1: bool,
    message: String,
}

#[derive(Debug, Clone, Serialize)]
struct DistributionSummary {
    experiment: String,
    poor_fit_gap: f64,
    profiles: Vec<ProfileSummary>,
}

fn file_stem(label: &str) -> String {
    label
        .chars()
        .map(|ch| if ch.is_ascii_alphanumeric() { ch } else { '_' })
        .collect()
}

/// Simulated equilibrium profiles against F₀ and F₁, one CSV per point.
pub fn run_distribution(cfg: &ExperimentConfig, out: &Path) -> Result<ExperimentOutput> {
    let manifest = prepare(cfg, out)?;
    let pts = points(cfg);
    let parallel = parallel_sweeps();
    let results = simulator::map_jobs(&pts, parallel, |p| Ok(compare_profile(p, &cfg.solver)))?;
    let mut files = vec![manifest];
    let mut profiles = Vec::new();
    let mut failures = 0;
    for (j, (point, res)) in pts.iter().zip(results).enumerate() {
        let p = point.params;
        let ts = p.trait_scale();
        let mut summary = ProfileSummary {
            series: point.label.clone(),
            c: p.c,
            status: "ok".into(),
            converged: false,
            lambda: f64::NAN,
            zstar: f64::NAN,
            var: f64::NAN,
            skew: f64::NAN,
            kurt: f64::NAN,
            bulk_log_gap_f0: f64::NAN,
            bulk_log_gap_f1: f64::NAN,
            poor_fit_f0: false,
            poor_fit_f1: false,
            message: String::new(),
        };
        match res {
            Ok(cmp) => {
                let rep = p.from_scaled(&cmp.run.report(point.basal_ratio()));
                summary.converged = cmp.run.termination == Termination::Converged;
                if !summary.converged {
                    summary.status = "not_converged".into();
                    failures += 1;
                }
                summary.lambda = rep.lambda;
                summary.zstar = rep.zstar;
                summary.var = rep.var;
                summary.skew = rep.skew.unwrap_or(f64::NAN);
                summary.kurt = rep.kurt.unwrap_or(f64::NAN);
                summary.bulk_log_gap_f0 = cmp.gap0;
                summary.bulk_log_gap_f1 = cmp.gap1;
                summary.poor_fit_f0 = !(cmp.gap0 <= POOR_FIT_GAP);
                summary.poor_fit_f1 = !(cmp.gap1 <= POOR_FIT_GAP);
                let mut notes = Vec::new();
                if let Err(e) = &cmp.f0 {
                    notes.push(format!("F0: {e}"));
                }
                if let Err(e) = &cmp.f1 {
                    notes.push(format!("F1: {e}"));
                }
                summary.message = notes.join("; ");
                // Dimensional densities: F(z) = F_scaled(z/ts)/ts.
                let col = |v: &Result<Vec<f64>>, i: usize| num(v.as_ref().map_or(f64::NAN, |v| v[i] / ts));
                let d = &cmp.run.distribution;
                let rows: Vec<Vec<String>> = d
                    .nodes()
                    .iter()
                    .enumerate()
                    .map(|(i, z)| vec![num(z * ts), num(d.values[i] / ts), col(&cmp.f0, i), col(&cmp.f1, i)])
                    .collect();
                let path = out.join(format!("profile_{j:02}_{}.csv", file_stem(&point.label)));
                write_csv(&path, &["z", "F_sim", "F0", "F1"], &rows)?;
                files.push(path);
            }
            Err(e) => {
                summary.status = "simulation_failed".into();
                summary.message = e.to_string();
                failures += 1;
            }
        }
        profiles.push(summary);
    }
    let summary = out.join("summary.toml");
    write_text(
        &summary,
        &toml_text(&DistributionSummary {
            experiment: cfg.name.clone(),
            poor_fit_gap: POOR_FIT_GAP,
            profiles,
        })?,
    )?;
    files.push(summary);
    Ok(ExperimentOutput {
        dir: out.to_path_buf(),
        files,
        failures,
    })
}
