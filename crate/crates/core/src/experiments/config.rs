use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::scaling::{ModelParams, Mode};
use crate::selection::Selection;
use crate::simulator::{Advection, ConvolutionMethod, Reproduction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Compare,
    Tipping,
    Distribution,
}

/// One curve of an experiment: an inheritance rule and a selection function.
/// Selection constants are dimensional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Series {
    pub mode: Mode,
    /// Required for the asexual mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<Kernel>,
    pub selection: Selection,
}

impl Series {
    pub fn reproduction(&self) -> Result<Reproduction> {
        match (self.mode, self.kernel) {
            (Mode::Asexual, Some(kernel)) => Ok(Reproduction::Asexual { kernel }),
            (Mode::Asexual, None) => Err(Error::Invalid("asexual series needs a kernel".into())),
            (Mode::Infinitesimal, _) => Ok(Reproduction::Infinitesimal),
        }
    }

    /// Kernel used by the asymptotic formulas; the infinitesimal ones ignore it.
    pub fn kernel_or_default(&self) -> Kernel {
        self.kernel.unwrap_or(Kernel::Gaussian)
    }

    pub fn label(&self) -> String {
        match (self.mode, self.kernel) {
            (Mode::Asexual, Some(k)) => format!("asexual/{}/{}", k.name(), self.selection.name()),
            _ => format!("{}/{}", self.mode.name(), self.selection.name()),
        }
    }
}

/// The single swept quantity. Speeds, traits and α are dimensional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "axis", rename_all = "snake_case", deny_unknown_fields)]
pub enum Sweep {
    C { values: Vec<f64> },
    Alpha { values: Vec<f64> },
    ZInit { values: Vec<f64> },
    Kernel { values: Vec<Kernel> },
}

impl Sweep {
    pub fn name(&self) -> &'static str {
        match self {
            Sweep::C { .. } => "c",
            Sweep::Alpha { .. } => "alpha",
            Sweep::ZInit { .. } => "z_init",
            Sweep::Kernel { .. } => "kernel",
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Sweep::C { values } | Sweep::Alpha { values } | Sweep::ZInit { values } => values.len(),
            Sweep::Kernel { values } => values.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Grid and stopping overrides. Lengths are in scaled trait units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Grid spacing; ε/resolution when absent.
    pub dz: Option<f64>,
    pub resolution: f64,
    /// Fixed domain; otherwise centred on the predicted lag.
    pub z_range: Option<[f64; 2]>,
    /// Half-width of the automatic domain in predicted standard deviations.
    pub width_sd: f64,
    pub stop_tol: f64,
    pub max_iters: usize,
    pub advection: Advection,
    pub convolution: ConvolutionMethod,
    pub expand: bool,
    /// Skip the simulation and emit asymptotics only.
    pub simulate: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            dz: None,
            resolution: 20.0,
            z_range: None,
            width_sd: 12.0,
            stop_tol: 1e-9,
            max_iters: 2_000_000,
            advection: Advection::SecondOrder,
            convolution: ConvolutionMethod::Direct,
            expand: true,
            simulate: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TippingConfig {
    /// Initial lags, dimensional.
    pub z_init: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub kind: ExperimentKind,
    /// Base dimensional parameters; the swept one is overridden per point.
    pub params: ModelParams,
    pub series: Vec<Series>,
    pub sweep: Sweep,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tipping: Option<TippingConfig>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Invalid(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Invalid(format!("config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.series.is_empty() {
            return Err(Error::Invalid("at least one series is required".into()));
        }
        for s in &self.series {
            s.reproduction()?;
            s.selection.validate()?;
            if let Some(k) = s.kernel {
                k.validate()?;
            }
        }
        if self.sweep.is_empty() {
            return Err(Error::Invalid("sweep has no values".into()));
        }
        let bad = |ok: bool, what: &str| -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(Error::Invalid(format!("sweep: {what}")))
            }
        };
        match &self.sweep {
            Sweep::C { values } => {
                bad(values.iter().all(|c| c.is_finite() && *c >= 0.0), "speeds must be >= 0")?
            }
            Sweep::Alpha { values } => {
                bad(values.iter().all(|a| a.is_finite() && *a > 0.0), "alpha must be > 0")?
            }
            Sweep::ZInit { values } => bad(values.iter().all(|z| z.is_finite()), "z_init must be finite")?,
            Sweep::Kernel { values } => {
                for k in values {
                    k.validate()?;
                }
                bad(
                    self.series.iter().all(|s| s.mode == Mode::Asexual),
                    "a kernel sweep needs asexual series",
                )?
            }
        }
        let s = &self.solver;
        let ok = s.resolution >= crate::simulator::MIN_RESOLUTION
            && s.width_sd > 0.0
            && s.stop_tol > 0.0
            && s.max_iters > 0
            && s.dz.is_none_or(|d| d > 0.0)
            && s.z_range.is_none_or(|r| r[0] < r[1]);
        if !ok {
            return Err(Error::Invalid(format!("solver settings out of range: {s:?}")));
        }
        match self.kind {
            ExperimentKind::Tipping => {
                let t = self
                    .tipping
                    .as_ref()
                    .ok_or_else(|| Error::Invalid("tipping experiment needs [tipping]".into()))?;
                if t.z_init.is_empty() {
                    return Err(Error::Invalid("tipping needs z_init values".into()));
                }
                if !matches!(self.sweep, Sweep::C { .. }) {
                    return Err(Error::Invalid("tipping sweeps the speed c".into()));
                }
                if self.solver.z_range.is_none() {
                    return Err(Error::Invalid("tipping needs a fixed solver.z_range".into()));
                }
                if !self.series.iter().all(|s| matches!(s.selection, Selection::Bounded { .. })) {
                    return Err(Error::Invalid("tipping needs bounded selection".into()));
                }
            }
            _ => {
                if matches!(self.sweep, Sweep::ZInit { .. }) {
                    return Err(Error::Invalid("z_init sweeps belong to tipping experiments".into()));
                }
            }
        }
        Ok(())
    }
}

fn base(beta: f64, c: f64) -> ModelParams {
    ModelParams {
        beta,
        mu0: 0.0,
        alpha: 1.0,
        sigma: 0.1,
        c,
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn three_selections(mode: Mode, kernel: Option<Kernel>, m_inf: f64) -> Vec<Series> {
    [
        Selection::Quadratic,
        Selection::super_quadratic_default(),
        Selection::Bounded { m_inf },
    ]
    .into_iter()
    .map(|selection| Series {
        mode,
        kernel,
        selection,
    })
    .collect()
}

fn config(name: &str, kind: ExperimentKind, params: ModelParams, series: Vec<Series>, sweep: Sweep) -> ExperimentConfig {
    ExperimentConfig {
        name: name.into(),
        kind,
        params,
        series,
        sweep,
        tipping: None,
        solver: SolverConfig::default(),
        out_dir: None,
    }
}

fn profile(name: &str, mode: Mode, selection: Selection, c: f64) -> ExperimentConfig {
    let kernel = (mode == Mode::Asexual).then_some(Kernel::Gaussian);
    config(
        name,
        ExperimentKind::Distribution,
        base(1.0, c),
        vec![Series {
            mode,
            kernel,
            selection,
        }],
        Sweep::C { values: vec![c] },
    )
}

/// Names accepted by [`preset`].
pub const PRESETS: &[&str] = &[
    "kernel-speed",
    "selection-speed-asexual",
    "selection-speed-infinitesimal",
    "selection-strength-asexual",
    "selection-strength-infinitesimal",
    "tipping-asexual",
    "tipping-infinitesimal",
    "profile-asexual-quadratic",
    "profile-asexual-super-quadratic",
    "profile-asexual-bounded",
    "profile-infinitesimal-quadratic",
    "profile-infinitesimal-super-quadratic",
    "profile-infinitesimal-bounded",
    "shape-moments-asexual",
    "shape-moments-infinitesimal",
];

/// Built-in experiment. Unless noted, α = β = 1, σ = 0.1 and μ₀ = 0; the
/// basal mortality is never given with the reference parameter sets, so zero
/// is assumed and recorded in the manifest.
pub fn preset(name: &str) -> Option<ExperimentConfig> {
    use ExperimentKind::*;
    let a = Mode::Asexual;
    let i = Mode::Infinitesimal;
    let g = Some(Kernel::Gaussian);
    let cfg = match name {
        // Five kernels of equal variance, β = 2; the scaled speed runs over
        // (0, 0.5], i.e. c = c_scaled·σβ.
        "kernel-speed" => {
            let p = base(2.0, 0.0);
            let unit = p.speed_scale(a);
            config(
                name,
                Compare,
                p,
                Kernel::all()
                    .into_iter()
                    .map(|k| Series {
                        mode: a,
                        kernel: Some(k),
                        selection: Selection::Quadratic,
                    })
                    .collect(),
                Sweep::C {
                    values: linspace(0.05, 0.5, 10).into_iter().map(|c| c * unit).collect(),
                },
            )
        }
        "selection-speed-asexual" => config(
            name,
            Compare,
            base(1.0, 0.0),
            three_selections(a, g, 0.5),
            Sweep::C {
                values: linspace(0.005, 0.08, 16),
            },
        ),
        "selection-speed-infinitesimal" => config(
            name,
            Compare,
            base(1.0, 0.0),
            three_selections(i, None, 1.0),
            Sweep::C {
                values: linspace(0.0005, 0.0055, 11),
            },
        ),
        "selection-strength-asexual" | "selection-strength-infinitesimal" => {
            let (mode, kernel, m_inf) = if name.ends_with("asexual") {
                (a, g, 0.5)
            } else {
                (i, None, 1.0)
            };
            let mut cfg = config(
                name,
                Compare,
                base(1.0, 0.05),
                three_selections(mode, kernel, m_inf),
                Sweep::Alpha {
                    values: vec![0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 4.0],
                },
            );
            cfg.solver.max_iters = 400_000;
            cfg
        }
        "tipping-asexual" | "tipping-infinitesimal" => {
            let asexual = name.ends_with("asexual");
            let (mode, kernel, m_inf) = if asexual { (a, g, 0.5) } else { (i, None, 1.0) };
            let p = base(1.0, 0.0);
            let selection = Selection::Bounded { m_inf };
            let series = vec![Series {
                mode,
                kernel,
                selection,
            }];
            // Speeds as fractions of the tipping point, dimensional.
            let scaled = p.scale_selection(selection);
            let c_tip = if asexual {
                crate::asymptotics::asexual_tipping_speed(&Kernel::Gaussian, &scaled).ok()?
            } else {
                crate::asymptotics::infinitesimal_tipping_speed(&scaled)
            } * p.speed_scale(mode);
            let mut cfg = config(
                name,
                Tipping,
                p,
                series,
                Sweep::C {
                    values: [0.1, 0.3, 0.5, 0.7, 0.9, 1.1, 1.3, 1.5].iter().map(|f| f * c_tip).collect(),
                },
            );
            cfg.tipping = Some(TippingConfig {
                z_init: vec![0.0, -0.5, -1.0, -1.5, -2.0, -2.5, -3.0],
            });
            if asexual {
                cfg.solver.z_range = Some([-40.0, 40.0]);
                cfg.solver.dz = Some(0.02);
            } else {
                cfg.solver.z_range = Some([-6.0, 6.0]);
                cfg.solver.dz = Some(0.01);
            }
            cfg
        }
        "profile-asexual-quadratic" => {
            let mut cfg = profile(name, a, Selection::Quadratic, 0.09);
            cfg.solver.z_range = Some([-4.0, 3.0]);
            cfg.solver.dz = Some(0.005);
            cfg
        }
        "profile-asexual-super-quadratic" => profile(name, a, Selection::super_quadratic_default(), 0.09),
        "profile-asexual-bounded" => profile(name, a, Selection::Bounded { m_inf: 0.5 }, 0.09),
        "profile-infinitesimal-quadratic" => {
            // Scaled speed 5, lag near −5.1; a narrow co-moving window keeps the
            // optimum, whose fitness advantage amplifies any round-off, off the grid.
            let mut cfg = profile(name, i, Selection::Quadratic, 0.05);
            cfg.solver.z_range = Some([-6.0, -4.0]);
            cfg.solver.dz = Some(0.0025);
            cfg.solver.stop_tol = 1e-8;
            cfg.solver.expand = false;
            cfg
        }
        "profile-infinitesimal-super-quadratic" => {
            profile(name, i, Selection::super_quadratic_default(), 0.05)
        }
        "profile-infinitesimal-bounded" => profile(name, i, Selection::Bounded { m_inf: 1.0 }, 0.05),
        "shape-moments-asexual" => {
            let mut cfg = preset("selection-speed-asexual")?;
            cfg.name = name.into();
            cfg
        }
        "shape-moments-infinitesimal" => {
            let mut cfg = preset("selection-speed-infinitesimal")?;
            cfg.name = name.into();
            cfg
        }
        _ => return None,
    };
    Some(cfg)
}
