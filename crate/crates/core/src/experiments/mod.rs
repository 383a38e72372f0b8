//! Declarative experiments: configuration, built-in presets and the runners
//! that emit comparison tables, basin maps and profile CSVs.

mod config;
mod run;

pub use config::{
    preset, ExperimentConfig, ExperimentKind, Series, SolverConfig, Sweep, TippingConfig, PRESETS,
};
pub use run::{
    bulk_log_gap, compare_point, compare_profile, compare_rows, grid_spacing, num, points,
    profile_densities, run_compare, run_distribution, run_experiment, run_tipping,
    simulate_point, simulation_grid, solver_options, tipping_overlay, CompareRow,
    ExperimentOutput, Point, ProfileComparison, Simulated, BULK_SD, POOR_FIT_GAP,
};

/// Annotated configuration listing every field with its default.
pub fn schema() -> String {
    let mut cfg = preset("selection-speed-asexual").expect("built-in preset");
    cfg.name = "example".into();
    cfg.sweep = Sweep::C {
        values: vec![0.01, 0.02, 0.04],
    };
    cfg.tipping = Some(TippingConfig { z_init: vec![0.0, -1.0] });
    cfg.out_dir = Some("out/example".into());
    let body = cfg.to_toml().expect("serialisable");
    format!("{SCHEMA_HEADER}\n{body}")
}

const SCHEMA_HEADER: &str = "\
# Experiment configuration. Units: params and selection constants are
# dimensional; solver lengths (dz, z_range) are in scaled trait units.
#
# name          experiment name, also the default output directory out/<name>
# kind          compare | tipping | distribution
# [params]      beta (birth rate), mu0 (basal mortality, default 0 in presets),
#               alpha (selection curvature), sigma (mutational sd), c (speed)
# [[series]]    mode = asexual | infinitesimal
#               kernel = { family = diffusion | uniform | gaussian | exponential | gamma (shape) }
#               selection = { family = quadratic | super_quadratic (a6) | bounded (m_inf) }
# [sweep]       axis = c | alpha | z_init | kernel, values = [...]
# [tipping]     z_init = [...] dimensional initial lags (tipping only)
# [solver]      dz (default eps/resolution), resolution = 20, z_range (fixed domain,
#               required for tipping), width_sd = 12 (automatic domain half-width in
#               predicted sd), stop_tol = 1e-9, max_iters = 2000000,
#               advection = second_order | first_order, convolution = direct | fft,
#               expand = true (grow the domain when the tails reach an end),
#               simulate = true (false emits asymptotics only)
# out_dir       output directory
";
