use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use filmctl_core::actuators::ActuatorConfig;
use filmctl_core::config::{parse_with_overrides, write_config, ConfigError, RunConfig};
use filmctl_core::control::{
    design_gain, find_min_actuators, run_controlled, spin_up, ControlError, ControlPlan, RunOptions,
};
use filmctl_core::io::{
    dispersion_csv, snapshots_csv, stability_map_csv, termination_label, time_series_csv, Provenance, StabilityCell,
};
use filmctl_core::linear::{count_unstable_modes, critical_wavenumber, LinearSystem};
use filmctl_core::lqr::{cost_weights, read_gain, reduce_wr_gain, synthesize_with, write_gain, GainMatrix, LqrError};
use filmctl_core::model::{from_physical, FlowParameters, Grid, ModelKind, PhysicalFluid};
use filmctl_core::solver::{initial_condition, InitialCondition};

use crate::{Cli, CliError, Command};

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(format!("config: {e}"))
    }
}

impl From<LqrError> for CliError {
    fn from(e: LqrError) -> Self {
        match e {
            LqrError::GainFormat { .. } | LqrError::InvalidWeights(_) | LqrError::Dimension(_) => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<ControlError> for CliError {
    fn from(e: ControlError) -> Self {
        match e {
            ControlError::Lqr(l) => l.into(),
            ControlError::InvalidPlan(_) | ControlError::Model(_) => CliError::Usage(e.to_string()),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

/// Fully resolved configuration plus its provenance.
struct Context {
    config: RunConfig,
    canonical: String,
    force: bool,
}

impl Context {
    fn provenance(&self, command: &str) -> Provenance {
        let seed = match self.config.initial {
            InitialCondition::MultiMode { seed, .. } => seed.to_string(),
            InitialCondition::SingleMode { .. } => "none".into(),
        };
        Provenance::new()
            .with("program", "filmctl")
            .with("version", env!("CARGO_PKG_VERSION"))
            .with("command", command)
            .with("config_sha256", hex::encode(Sha256::digest(self.canonical.as_bytes())))
            .with("seed", seed)
    }

    fn output_path(&self, explicit: Option<PathBuf>, default_name: &str) -> PathBuf {
        explicit.unwrap_or_else(|| Path::new(&self.config.output.directory).join(default_name))
    }

    fn check_free(&self, path: &Path) -> Result<(), CliError> {
        if path.exists() && !self.force {
            return Err(CliError::Io(format!("{} exists; pass --force to overwrite", path.display())));
        }
        Ok(())
    }

    fn write(&self, path: &Path, content: &str) -> Result<(), CliError> {
        self.check_free(path)?;
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        }
        fs::write(path, content).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }

    fn flow(&self) -> Result<FlowParameters, CliError> {
        Ok(self.config.flow()?)
    }

    fn grid(&self) -> Result<Grid, CliError> {
        Ok(self.config.grid()?)
    }

    fn actuators(&self, grid: &Grid) -> Result<ActuatorConfig, CliError> {
        ActuatorConfig::new(self.config.actuators, self.config.width, grid).map_err(|e| CliError::Usage(e.to_string()))
    }
}

fn load(cli: &Cli) -> Result<Context, CliError> {
    let text = match &cli.config {
        Some(path) => fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?,
        None => String::new(),
    };
    let config = parse_with_overrides(&text, &cli.overrides)?;
    let canonical = write_config(&config);
    Ok(Context {
        config,
        canonical,
        force: cli.force,
    })
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let ctx = load(&cli)?;
    match cli.command {
        Command::Gain { out, reduced } => cmd_gain(&ctx, out, reduced),
        Command::Simulate {
            gain_file,
            uncontrolled,
            out,
        } => cmd_simulate(&ctx, gain_file, uncontrolled, out),
        Command::Dispersion {
            model,
            k_max,
            samples,
            out,
        } => cmd_dispersion(&ctx, model.map(Into::into), k_max, samples, out),
        Command::MinActuators { jobs, out } => cmd_min_actuators(&ctx, jobs, out),
        Command::Preset { name, out } => cmd_preset(&ctx, name, out),
    }
}

fn cmd_gain(ctx: &Context, out: Option<PathBuf>, reduced: bool) -> Result<(), CliError> {
    let c = &ctx.config;
    let params = ctx.flow()?;
    let grid = ctx.grid()?;
    let actuators = ctx.actuators(&grid)?;
    let model = c.control.design_model;
    let system = LinearSystem::new(model, &params, &grid, &actuators);
    let weights = cost_weights(c.control.beta, &grid, model, actuators.count())?;
    let mut gain = synthesize_with(&system, &weights, c.control.solver)?;
    if reduced {
        if model != ModelKind::WeightedResidual {
            return Err(CliError::Usage("--reduced applies to weighted-residual gains only".into()));
        }
        gain = reduce_wr_gain(&gain)?;
    }
    let text = write_gain(&gain, &ctx.provenance("gain").lines())?;
    let path = ctx.output_path(out, "gain.txt");
    ctx.write(&path, &text)?;
    eprintln!("wrote {} ({}x{})", path.display(), gain.rows(), gain.cols());
    Ok(())
}

/// Loads a stored gain and checks it against the configured layout.
fn stored_gain(path: &Path, ctx: &Context, grid: &Grid, actuators: &ActuatorConfig) -> Result<GainMatrix, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let gain = read_gain(&text)?;
    let meta = gain
        .metadata
        .as_ref()
        .ok_or_else(|| CliError::Usage("gain file carries no metadata".into()))?;
    if meta.grid_points != grid.len() || meta.actuators != actuators.count() || meta.width != actuators.width() {
        return Err(CliError::Usage(format!(
            "gain file was built for N={}, M={}, width={}; configuration has N={}, M={}, width={}",
            meta.grid_points,
            meta.actuators,
            meta.width,
            grid.len(),
            actuators.count(),
            actuators.width()
        )));
    }
    let controlled = ctx.config.control.controlled_model;
    if meta.model == ModelKind::WeightedResidual && !meta.reduced && controlled == ModelKind::Benney {
        return Ok(reduce_wr_gain(&gain)?);
    }
    Ok(gain)
}

fn cmd_simulate(ctx: &Context, gain_file: Option<PathBuf>, uncontrolled: bool, out: Option<PathBuf>) -> Result<(), CliError> {
    let c = &ctx.config;
    let params = ctx.flow()?;
    let grid = ctx.grid()?;
    let actuators = ctx.actuators(&grid)?;
    let controlled = c.control.controlled_model;
    let path = ctx.output_path(out, "timeseries.csv");
    let dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let mut snapshot_paths = Vec::new();
    if c.output.every > 0 {
        snapshot_paths.push((dir.join("snapshots_h.csv"), false));
        if controlled == ModelKind::WeightedResidual {
            snapshot_paths.push((dir.join("snapshots_q.csv"), true));
        }
    }
    ctx.check_free(&path)?;
    for (p, _) in &snapshot_paths {
        ctx.check_free(p)?;
    }
    let plan = if uncontrolled {
        ControlPlan::uncontrolled(actuators, &grid, controlled)
    } else {
        let gain = match &gain_file {
            Some(path) => stored_gain(path, ctx, &grid, &actuators)?,
            None => design_gain(
                c.control.design_model,
                controlled,
                &params,
                &grid,
                &actuators,
                c.control.beta,
                c.control.solver,
            )?,
        };
        ControlPlan::new(gain, actuators, controlled, c.control.activation_time, c.control.beta)?
    };
    let ic = initial_condition(c.initial, &grid, c.control.spin_model).map_err(|e| CliError::Usage(e.to_string()))?;
    let start = spin_up(c.control.spin_model, params, grid.clone(), &ic, c.control.spin_up, c.solver)?;
    let options = RunOptions {
        solver: c.solver,
        snapshot_every: (c.output.every > 0).then_some(c.output.every),
    };
    let result = run_controlled(plan, params, grid.clone(), &start.state, c.control.t_end, options)?;
    let provenance = ctx
        .provenance("simulate")
        .with("spin_up_duration", start.duration)
        .with("spin_up_saturated", start.saturated);
    ctx.write(&path, &time_series_csv(&result, &provenance))?;
    for (p, flux) in &snapshot_paths {
        ctx.write(p, &snapshots_csv(&result.snapshots, &grid, *flux, &provenance))?;
    }
    eprintln!(
        "wrote {}: {} samples, final norm {:.3e}, cost {:.6e}, {}",
        path.display(),
        result.len(),
        result.deviation_norms.last().copied().unwrap_or(f64::NAN),
        result.accumulated_cost,
        termination_label(&result.termination)
    );
    Ok(())
}

fn cmd_dispersion(
    ctx: &Context,
    model: Option<ModelKind>,
    k_max: f64,
    samples: usize,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    if !(k_max > 0.0 && k_max.is_finite()) || samples == 0 {
        return Err(CliError::Usage("--k-max must be positive and --samples at least 1".into()));
    }
    let params = ctx.flow()?;
    let model = model.unwrap_or(ctx.config.control.design_model);
    let provenance = ctx
        .provenance("dispersion")
        .with("model", model.tag())
        .with("critical_wavenumber", critical_wavenumber(&params))
        .with("unstable_modes", count_unstable_modes(&params));
    let path = ctx.output_path(out, "dispersion.csv");
    ctx.write(&path, &dispersion_csv(model, &params, k_max, samples, &provenance))
}

fn cmd_min_actuators(ctx: &Context, jobs: usize, out: Option<PathBuf>) -> Result<(), CliError> {
    let c = &ctx.config;
    if jobs == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    let mut cells: Vec<(f64, f64)> = c
        .scan
        .re_values
        .iter()
        .flat_map(|&re| c.scan.ca_values.iter().map(move |&ca| (re, ca)))
        .collect();
    cells.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    cells.dedup();
    let protocol = c.protocol();
    let (theta, aspect) = (c.parameters.theta, c.parameters.aspect);
    let (design, controlled, m_max) = (c.control.design_model, c.control.controlled_model, c.scan.m_max);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Io(format!("thread pool: {e}")))?;
    let results: Vec<Result<StabilityCell, CliError>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(re, ca)| {
                let started = Instant::now();
                let params = FlowParameters::new(re, ca, theta, aspect).map_err(|e| CliError::Usage(e.to_string()))?;
                let unstable_modes = count_unstable_modes(&params);
                let (m_min, verdict) = match find_min_actuators(design, controlled, &params, m_max, &protocol) {
                    Ok(r) => (r.m_min, if r.m_min.is_some() { "stabilised" } else { "not-stabilised" }.to_string()),
                    Err(e @ (ControlError::SpinUpBlowUp { .. } | ControlError::SpinUpNewtonFailure { .. })) => {
                        (None, format!("spin-up failed: {e}").replace(',', ";"))
                    }
                    Err(e) => return Err(e.into()),
                };
                Ok(StabilityCell {
                    reynolds: re,
                    capillary: ca,
                    m_min,
                    unstable_modes,
                    verdict,
                    runtime: started.elapsed().as_secs_f64(),
                })
            })
            .collect()
    });
    let cells = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let provenance = ctx
        .provenance("min-actuators")
        .with("design_model", design.tag())
        .with("controlled_model", controlled.tag());
    let path = ctx.output_path(out, "min_actuators.csv");
    ctx.write(&path, &stability_map_csv(&cells, &provenance))
}

fn cmd_preset(ctx: &Context, name: Option<String>, out: Option<PathBuf>) -> Result<(), CliError> {
    let names: Vec<String> = match name {
        Some(n) => vec![n],
        None => PhysicalFluid::PRESETS.iter().map(|s| s.to_string()).collect(),
    };
    let mut text = String::new();
    for line in ctx.provenance("preset").lines() {
        text.push_str(&format!("# {line}\n"));
    }
    text.push_str("preset,reynolds,capillary,theta,aspect\n");
    for n in names {
        let mut fluid = PhysicalFluid::preset(&n).map_err(|e| CliError::Usage(e.to_string()))?;
        fluid.theta = ctx.config.parameters.theta;
        let p = from_physical(&fluid, ctx.config.parameters.aspect).map_err(|e| CliError::Usage(e.to_string()))?;
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            n.to_ascii_lowercase(),
            filmctl_core::io::num(p.reynolds()),
            filmctl_core::io::num(p.capillary()),
            filmctl_core::io::num(p.theta()),
            filmctl_core::io::num(p.aspect())
        ));
    }
    match out {
        Some(path) => ctx.write(&path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
