use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use moving_optimum::asymptotics::critical_speeds;
use moving_optimum::experiments::{self, num, ExperimentConfig, ExperimentKind, ExperimentOutput, Point};
use moving_optimum::report::{Order, Source};
use moving_optimum::{Kernel, ModelParams, Mode, Selection};

#[derive(Parser)]
#[command(name = "movopt", version, about = "Travelling equilibria under a moving optimum")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate H and L for the mutation kernels.
    Kernels {
        #[arg(long, default_value_t = 0.5)]
        c_max: f64,
        #[arg(long, default_value_t = 11)]
        n: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Closed-form predictions and critical speeds.
    Asymptotics(PointCmd),
    /// Simulate a single equilibrium.
    Simulate(PointCmd),
    /// Simulated against asymptotic equilibria along a sweep.
    Compare(ExperimentArgs),
    /// Basin map over speeds and initial lags.
    Tipping(ExperimentArgs),
    /// Simulated profiles against F0 and F1.
    Distribution(ExperimentArgs),
    /// List the built-in presets.
    Presets,
    /// Print an annotated configuration with all defaults.
    Schema {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Clone)]
struct InputArgs {
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(flatten)]
    source: InputArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, ValueEnum)]
enum SelectionArg {
    Quadratic,
    SuperQuadratic,
    Bounded,
}

#[derive(Args)]
struct PointCmd {
    /// Use the points of an experiment instead of the flags below.
    #[command(flatten)]
    source: InputArgs,
    #[arg(long, default_value = "asexual")]
    mode: String,
    /// diffusion, uniform, gaussian, exponential, gamma or gamma:<shape>.
    #[arg(long, default_value = "gaussian")]
    kernel: String,
    #[arg(long, value_enum, default_value = "quadratic")]
    selection: SelectionArg,
    #[arg(long, default_value_t = moving_optimum::selection::DEFAULT_A6)]
    a6: f64,
    #[arg(long, default_value_t = 0.5)]
    m_inf: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = 0.0)]
    mu0: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 0.1)]
    sigma: f64,
    #[arg(long, default_value_t = 0.05)]
    c: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_kernel(s: &str) -> Result<Kernel> {
    let k = match s.split_once(':') {
        Some(("gamma", shape)) => Kernel::Gamma {
            shape: shape.parse().with_context(|| format!("gamma shape {shape:?}"))?,
        },
        Some(_) => bail!("unknown kernel {s:?}"),
        None => match s {
            "diffusion" => Kernel::Diffusion,
            "uniform" => Kernel::Uniform,
            "gaussian" => Kernel::Gaussian,
            "exponential" => Kernel::Exponential,
            "gamma" => Kernel::gamma_default(),
            _ => bail!("unknown kernel {s:?}"),
        },
    };
    k.validate()?;
    Ok(k)
}

fn parse_mode(s: &str) -> Result<Mode> {
    match s {
        "asexual" => Ok(Mode::Asexual),
        "infinitesimal" => Ok(Mode::Infinitesimal),
        _ => bail!("unknown mode {s:?}"),
    }
}

/// Configuration error: exit code 1.
struct ConfigError(anyhow::Error);

fn load(source: &InputArgs) -> std::result::Result<ExperimentConfig, ConfigError> {
    match (&source.config, &source.preset) {
        (Some(path), _) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(ConfigError)?;
            ExperimentConfig::from_toml(&text).map_err(|e| ConfigError(e.into()))
        }
        (None, Some(name)) => experiments::preset(name).ok_or_else(|| {
            ConfigError(anyhow!(
                "unknown preset {name:?}; available: {}",
                experiments::PRESETS.join(", ")
            ))
        }),
        (None, None) => Err(ConfigError(anyhow!("pass --config PATH or --preset NAME"))),
    }
}

fn out_dir(cfg: &ExperimentConfig, out: &Option<PathBuf>) -> PathBuf {
    out.clone()
        .or_else(|| cfg.out_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| Path::new("out").join(&cfg.name))
}

fn report_output(o: &ExperimentOutput) -> ExitCode {
    for f in &o.files {
        println!("wrote {}", f.display());
    }
    if o.failures > 0 {
        eprintln!("{} point(s) failed; see the status columns", o.failures);
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    }
}

fn experiment(args: &ExperimentArgs, kind: ExperimentKind) -> Result<ExitCode> {
    let cfg = match load(&args.source) {
        Ok(c) => c,
        Err(ConfigError(e)) => return config_failure(e),
    };
    if cfg.kind != kind {
        return config_failure(anyhow!(
            "experiment {:?} is of kind {:?}, not {:?}",
            cfg.name,
            cfg.kind,
            kind
        ));
    }
    if let Err(e) = cfg.validate() {
        return config_failure(e.into());
    }
    let out = out_dir(&cfg, &args.out);
    let o = experiments::run_experiment(&cfg, &out)?;
    Ok(report_output(&o))
}

fn config_failure(e: anyhow::Error) -> Result<ExitCode> {
    eprintln!("config error: {e:#}");
    Ok(ExitCode::from(1))
}

/// The point the flags describe, as a one-point experiment.
fn flag_config(cmd: &PointCmd) -> Result<ExperimentConfig> {
    let mode = parse_mode(&cmd.mode)?;
    let selection = match cmd.selection {
        SelectionArg::Quadratic => Selection::Quadratic,
        SelectionArg::SuperQuadratic => Selection::SuperQuadratic { a6: cmd.a6 },
        SelectionArg::Bounded => Selection::Bounded { m_inf: cmd.m_inf },
    };
    let params = ModelParams {
        beta: cmd.beta,
        mu0: cmd.mu0,
        alpha: cmd.alpha,
        sigma: cmd.sigma,
        c: cmd.c,
    };
    let cfg = ExperimentConfig {
        name: "point".into(),
        kind: ExperimentKind::Compare,
        params,
        series: vec![experiments::Series {
            mode,
            kernel: (mode == Mode::Asexual).then(|| parse_kernel(&cmd.kernel)).transpose()?,
            selection,
        }],
        sweep: experiments::Sweep::C { values: vec![cmd.c] },
        tipping: None,
        solver: Default::default(),
        out_dir: None,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn point_config(cmd: &PointCmd) -> std::result::Result<ExperimentConfig, ConfigError> {
    if cmd.source.config.is_some() || cmd.source.preset.is_some() {
        load(&cmd.source)
    } else {
        flag_config(cmd).map_err(ConfigError)
    }
}

fn write_rows(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    println!("wrote {}", path.display());
    Ok(())
}

fn kernels(c_max: f64, n: usize, out: &Option<PathBuf>) -> Result<ExitCode> {
    if !(c_max > 0.0) || n < 2 {
        return config_failure(anyhow!("need c_max > 0 and n >= 2"));
    }
    let mut rows = Vec::new();
    let mut failures = 0;
    for k in Kernel::all() {
        for i in 0..n {
            let c = c_max * i as f64 / (n - 1) as f64;
            match k.lagrangian(c) {
                Ok(l) => rows.push(vec![
                    k.name(),
                    num(c),
                    num(l.value),
                    num(l.slope),
                    num(l.curvature),
                    num(k.hamiltonian(l.slope).unwrap_or(f64::NAN)),
                ]),
                Err(e) => {
                    failures += 1;
                    eprintln!("{} at c = {c}: {e}", k.name());
                }
            }
        }
    }
    let header = ["kernel", "c", "L", "p0", "L_curvature", "H_p0"];
    match out {
        Some(dir) => write_rows(&dir.join("kernels.csv"), &header, &rows)?,
        None => {
            let mut w = csv::Writer::from_writer(std::io::stdout());
            w.write_record(header)?;
            for r in &rows {
                w.write_record(r)?;
            }
            w.flush()?;
        }
    }
    Ok(if failures > 0 { ExitCode::from(2) } else { ExitCode::SUCCESS })
}

fn asymptotics(cmd: &PointCmd) -> Result<ExitCode> {
    let cfg = match point_config(cmd) {
        Ok(c) => c,
        Err(ConfigError(e)) => return config_failure(e),
    };
    let mut rows = Vec::new();
    let mut failures = 0;
    for p in experiments::points(&cfg) {
        let basal = p.basal_ratio();
        let crit = critical_speeds(p.mode, Some(&p.kernel), &p.selection, &p.params);
        for order in [Order::Leading, Order::FirstCorrection] {
            let (vals, status) = match p.predict(order) {
                Ok(pr) => {
                    let r = p.params.from_scaled(&pr.report(basal));
                    ([r.lambda, r.zstar, r.var, r.rho], "ok".to_string())
                }
                Err(e) => {
                    failures += 1;
                    ([f64::NAN; 4], e.to_string())
                }
            };
            let (c_star, c_corr, c_tip) = match &crit {
                Ok(s) => (s.c_star, s.c_star_corrected.unwrap_or(f64::NAN), s.c_tip),
                Err(_) => (f64::NAN, f64::NAN, f64::NAN),
            };
            let mut row = vec![p.label.clone(), num(p.params.c), num(p.params.alpha), format!("{order:?}")];
            row.extend(vals.iter().map(|v| num(*v)));
            row.extend([num(c_star), num(c_corr), num(c_tip), status]);
            rows.push(row);
        }
    }
    let header = [
        "series", "c", "alpha", "order", "lambda", "zstar", "var", "rho", "c_star",
        "c_star_corrected", "c_tip", "status",
    ];
    let out = cmd.out.clone().unwrap_or_else(|| Path::new("out").join(&cfg.name));
    write_rows(&out.join("asymptotics.csv"), &header, &rows)?;
    Ok(if failures > 0 { ExitCode::from(2) } else { ExitCode::SUCCESS })
}

fn simulate(cmd: &PointCmd) -> Result<ExitCode> {
    let cfg = match point_config(cmd) {
        Ok(c) => c,
        Err(ConfigError(e)) => return config_failure(e),
    };
    let point: Point = experiments::points(&cfg)
        .into_iter()
        .next()
        .ok_or_else(|| anyhow!("experiment has no points"))?;
    let sim = experiments::simulate_point(&point, &cfg.solver, false);
    let run = sim.run?;
    let rep = point.params.from_scaled(&run.report(point.basal_ratio()));
    let (converged, iterations, residual, clipped) = match rep.source {
        Source::Simulation {
            converged,
            iterations,
            residual,
            clipped,
        } => (converged, iterations, residual, clipped),
        Source::Asymptotic(_) => unreachable!("simulation report"),
    };
    let out = cmd.out.clone().unwrap_or_else(|| Path::new("out").join("simulate"));
    let kv = vec![
        vec!["series".into(), point.label.clone()],
        vec!["c".into(), num(point.params.c)],
        vec!["lambda".into(), num(rep.lambda)],
        vec!["zstar".into(), num(rep.zstar)],
        vec!["var".into(), num(rep.var)],
        vec!["skew".into(), num(rep.skew.unwrap_or(f64::NAN))],
        vec!["kurt".into(), num(rep.kurt.unwrap_or(f64::NAN))],
        vec!["rho".into(), num(rep.rho)],
        vec!["converged".into(), converged.to_string()],
        vec!["iterations".into(), iterations.to_string()],
        vec!["residual".into(), num(residual)],
        vec!["clipped".into(), clipped.to_string()],
    ];
    write_rows(&out.join("report.csv"), &["key", "value"], &kv)?;
    let ts = point.params.trait_scale();
    let d = &run.distribution;
    let rows: Vec<Vec<String>> = d
        .nodes()
        .iter()
        .zip(&d.values)
        .map(|(z, f)| vec![num(z * ts), num(f / ts)])
        .collect();
    write_rows(&out.join("distribution.csv"), &["z", "density"], &rows)?;
    Ok(if converged { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn schema(out: &Option<PathBuf>) -> Result<ExitCode> {
    let text = experiments::schema();
    match out {
        Some(path) => {
            fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
            println!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Kernels { c_max, n, out } => kernels(*c_max, *n, out),
        Command::Asymptotics(cmd) => asymptotics(cmd),
        Command::Simulate(cmd) => simulate(cmd),
        Command::Compare(a) => experiment(a, ExperimentKind::Compare),
        Command::Tipping(a) => experiment(a, ExperimentKind::Tipping),
        Command::Distribution(a) => experiment(a, ExperimentKind::Distribution),
        Command::Presets => {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            // A closed pipe (e.g. `| head`) ends the listing quietly.
            let _ = experiments::PRESETS.iter().try_for_each(|name| writeln!(out, "{name}"));
            Ok(ExitCode::SUCCESS)
        }
        Command::Schema { out } => schema(out),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
