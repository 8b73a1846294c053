//! Run configuration: a flat TOML file of `section.key = value` lines.
//!
//! Every key has a default, unknown keys are rejected, and [`write_config`]
//! emits a canonical text that parses back to the same configuration.

use std::f64::consts::PI;
use std::fmt::Write as _;

use thiserror::Error;
use toml::{Table, Value};

use crate::actuators::{DEFAULT_ACTUATOR_COUNT, DEFAULT_WIDTH};
use crate::control::{ScanProtocol, DEFAULT_SPIN_UP};
use crate::lqr::SolverTag;
use crate::model::{
    from_physical, FlowParameters, Grid, ModelKind, PhysicalFluid, DEFAULT_ASPECT, DEFAULT_GRID_POINTS, DEFAULT_THETA,
};
use crate::solver::{
    InitialCondition, SolverConfig, DEFAULT_BLOWUP_THRESHOLD, DEFAULT_DT, DEFAULT_NEWTON_MAX_ITER, DEFAULT_NEWTON_TOL,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("`{key}`: {message}")]
    Invalid { key: String, message: String },
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        message: message.into(),
    }
}

/// Where the flow parameters come from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParameterSource {
    Direct { reynolds: f64, capillary: f64 },
    Preset(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParametersSection {
    pub source: ParameterSource,
    pub theta: f64,
    pub aspect: f64,
}

impl ParametersSection {
    pub fn flow(&self) -> Result<FlowParameters, ConfigError> {
        let map = |e: crate::model::ModelError| invalid("parameters", e.to_string());
        match self.source {
            ParameterSource::Direct { reynolds, capillary } => {
                FlowParameters::new(reynolds, capillary, self.theta, self.aspect).map_err(map)
            }
            ParameterSource::Preset(name) => {
                let mut fluid = PhysicalFluid::preset(name).map_err(map)?;
                fluid.theta = self.theta;
                from_physical(&fluid, self.aspect).map_err(map)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlSection {
    pub design_model: ModelKind,
    pub controlled_model: ModelKind,
    pub beta: f64,
    pub activation_time: f64,
    pub spin_up: f64,
    pub spin_model: ModelKind,
    pub t_end: f64,
    pub solver: SolverTag,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSection {
    pub directory: String,
    /// Snapshot cadence in steps; 0 disables snapshots.
    pub every: usize,
}

/// Parameter sweep driving `min-actuators`.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityMapSpec {
    pub re_values: Vec<f64>,
    pub ca_values: Vec<f64>,
    pub m_max: usize,
    pub check_every: f64,
    pub min_abort_time: f64,
    pub reduction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub parameters: ParametersSection,
    pub grid_points: usize,
    pub actuators: usize,
    pub width: f64,
    pub control: ControlSection,
    pub initial: InitialCondition,
    pub solver: SolverConfig,
    pub output: OutputSection,
    pub scan: StabilityMapSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            parameters: ParametersSection {
                source: ParameterSource::Direct {
                    reynolds: 5.0,
                    capillary: 0.05,
                },
                theta: DEFAULT_THETA,
                aspect: DEFAULT_ASPECT,
            },
            grid_points: DEFAULT_GRID_POINTS,
            actuators: DEFAULT_ACTUATOR_COUNT,
            width: DEFAULT_WIDTH,
            control: ControlSection {
                design_model: ModelKind::Benney,
                controlled_model: ModelKind::WeightedResidual,
                beta: 0.5,
                activation_time: 0.0,
                spin_up: DEFAULT_SPIN_UP,
                spin_model: ModelKind::WeightedResidual,
                t_end: 300.0,
                solver: SolverTag::Schur,
            },
            initial: InitialCondition::SingleMode {
                amplitude: 0.01,
                mode: 1,
            },
            solver: SolverConfig::default(),
            output: OutputSection {
                directory: ".".into(),
                every: 0,
            },
            scan: StabilityMapSpec {
                re_values: vec![1.0, 5.0],
                ca_values: vec![0.05],
                m_max: 8,
                check_every: 10.0,
                min_abort_time: 50.0,
                reduction: 1e3,
            },
        }
    }
}

impl RunConfig {
    pub fn flow(&self) -> Result<FlowParameters, ConfigError> {
        self.parameters.flow()
    }

    pub fn grid(&self) -> Result<Grid, ConfigError> {
        Grid::new(self.grid_points, self.parameters.aspect).map_err(|e| invalid("grid.points", e.to_string()))
    }

    /// Protocol for the minimum-actuator scan.
    pub fn protocol(&self) -> ScanProtocol {
        ScanProtocol {
            grid_points: self.grid_points,
            width: self.width,
            beta: self.control.beta,
            initial: self.initial,
            spin_up: self.control.spin_up,
            spin_model: self.control.spin_model,
            t_end: self.control.t_end,
            check_every: self.scan.check_every,
            min_abort_time: self.scan.min_abort_time,
            reduction: self.scan.reduction,
            solver: self.solver,
        }
    }
}

/// Byte offset to 1-based line number.
fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

/// Parses a configuration, applying defaults for absent keys.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    parse_with_overrides(text, &[])
}

/// Parses `text`, then applies `section.key=value` overrides on top.
pub fn parse_with_overrides(text: &str, overrides: &[String]) -> Result<RunConfig, ConfigError> {
    let mut table: Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse {
        line: e.span().map_or(0, |s| line_of(text, s.start)),
        message: e.message().trim().to_string(),
    })?;
    for raw in overrides {
        apply_override(&mut table, raw)?;
    }
    from_table(&table)
}

/// Merges one `section.key=value` assignment into `table`. The value uses
/// TOML syntax; bare words are taken as strings.
pub fn apply_override(table: &mut Table, raw: &str) -> Result<(), ConfigError> {
    let (key, value) = raw
        .split_once('=')
        .ok_or_else(|| invalid(raw, "override must look like `section.key=value`"))?;
    let key = key.trim();
    let (section, field) = key
        .split_once('.')
        .ok_or_else(|| invalid(key, "override key must be `section.key`"))?;
    let value_text = value.trim();
    let value = format!("v = {value_text}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(value_text.to_string()));
    let entry = table
        .entry(section.to_string())
        .or_insert_with(|| Value::Table(Table::new()));
    match entry {
        Value::Table(t) => {
            t.insert(field.to_string(), value);
            Ok(())
        }
        _ => Err(invalid(section, "is not a section")),
    }
}

struct Section<'a> {
    name: &'static str,
    table: Option<&'a Table>,
}

impl<'a> Section<'a> {
    fn path(&self, key: &str) -> String {
        format!("{}.{key}", self.name)
    }

    fn get(&self, key: &str) -> Option<&'a Value> {
        self.table.and_then(|t| t.get(key))
    }

    fn float(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some(Value::Float(v)) => Ok(*v),
            Some(Value::Integer(v)) => Ok(*v as f64),
            Some(other) => Err(invalid(&self.path(key), format!("expected a number, found {}", other.type_str()))),
        }
    }

    fn count(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some(Value::Integer(v)) if *v >= 0 => Ok(*v as usize),
            Some(other) => Err(invalid(&self.path(key), format!("expected a non-negative integer, found {other}"))),
        }
    }

    fn string(&self, key: &str) -> Result<Option<&'a str>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.as_str())),
            Some(other) => Err(invalid(&self.path(key), format!("expected a string, found {}", other.type_str()))),
        }
    }

    fn model(&self, key: &str, default: ModelKind) -> Result<ModelKind, ConfigError> {
        match self.string(key)? {
            None => Ok(default),
            Some(s) => s.parse().map_err(|_| invalid(&self.path(key), format!("unknown model `{s}`"))),
        }
    }

    fn floats(&self, key: &str, default: &[f64]) -> Result<Vec<f64>, ConfigError> {
        match self.get(key) {
            None => Ok(default.to_vec()),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| match v {
                    Value::Float(f) => Ok(*f),
                    Value::Integer(i) => Ok(*i as f64),
                    other => Err(invalid(&self.path(key), format!("expected numbers, found {}", other.type_str()))),
                })
                .collect(),
            Some(other) => Err(invalid(&self.path(key), format!("expected a list, found {}", other.type_str()))),
        }
    }

    fn check_keys(&self, known: &[&str]) -> Result<(), ConfigError> {
        if let Some(t) = self.table {
            for key in t.keys() {
                if !known.contains(&key.as_str()) {
                    return Err(invalid(&self.path(key), "unknown key"));
                }
            }
        }
        Ok(())
    }
}

const SECTIONS: [(&str, &[&str]); 8] = [
    ("parameters", &["preset", "reynolds", "capillary", "theta", "aspect"]),
    ("grid", &["points"]),
    ("actuators", &["count", "width"]),
    (
        "control",
        &[
            "design_model",
            "controlled_model",
            "beta",
            "activation_time",
            "spin_up",
            "spin_model",
            "t_end",
            "solver",
        ],
    ),
    ("initial", &["kind", "amplitude", "mode", "seed"]),
    ("solver", &["dt", "newton_tol", "newton_max_iter", "blowup_threshold"]),
    ("output", &["directory", "every"]),
    ("scan", &["re_values", "ca_values", "m_max", "check_every", "min_abort_time", "reduction"]),
];

fn section<'a>(table: &'a Table, name: &'static str) -> Result<Section<'a>, ConfigError> {
    let inner = match table.get(name) {
        None => None,
        Some(Value::Table(t)) => Some(t),
        Some(_) => return Err(invalid(name, "must be a section")),
    };
    let s = Section { name, table: inner };
    let known = SECTIONS.iter().find(|(n, _)| *n == name).map(|(_, k)| *k).unwrap_or(&[]);
    s.check_keys(known)?;
    Ok(s)
}

fn positive(key: &str, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(invalid(key, format!("must be positive, got {v}")))
    }
}

fn from_table(table: &Table) -> Result<RunConfig, ConfigError> {
    for key in table.keys() {
        if !SECTIONS.iter().any(|(n, _)| n == key) {
            return Err(invalid(key, "unknown section"));
        }
    }
    let d = RunConfig::default();

    let p = section(table, "parameters")?;
    let preset = p.string("preset")?;
    let has_direct = p.get("reynolds").is_some() || p.get("capillary").is_some();
    let source = match preset {
        Some(name) => {
            if has_direct {
                return Err(invalid(
                    "parameters.preset",
                    "cannot be combined with parameters.reynolds or parameters.capillary",
                ));
            }
            let canonical = PhysicalFluid::PRESETS
                .iter()
                .find(|p| p.eq_ignore_ascii_case(name.trim()))
                .ok_or_else(|| invalid("parameters.preset", format!("unknown preset `{name}`")))?;
            ParameterSource::Preset(canonical)
        }
        None => ParameterSource::Direct {
            reynolds: positive("parameters.reynolds", p.float("reynolds", 5.0)?)?,
            capillary: positive("parameters.capillary", p.float("capillary", 0.05)?)?,
        },
    };
    let theta = p.float("theta", d.parameters.theta)?;
    if !(theta > 0.0 && theta < PI / 2.0) {
        return Err(invalid("parameters.theta", format!("must lie in (0, pi/2), got {theta}")));
    }
    let parameters = ParametersSection {
        source,
        theta,
        aspect: positive("parameters.aspect", p.float("aspect", d.parameters.aspect)?)?,
    };

    let g = section(table, "grid")?;
    let grid_points = g.count("points", d.grid_points)?;
    if grid_points < 8 || grid_points % 2 != 0 {
        return Err(invalid("grid.points", format!("must be even and at least 8, got {grid_points}")));
    }

    let a = section(table, "actuators")?;
    let actuators = a.count("count", d.actuators)?;
    if actuators == 0 {
        return Err(invalid("actuators.count", "must be at least 1"));
    }
    let width = positive("actuators.width", a.float("width", d.width)?)?;

    let c = section(table, "control")?;
    let beta = c.float("beta", d.control.beta)?;
    if !(beta > 0.0 && beta < 1.0) {
        return Err(invalid("control.beta", format!("must lie in (0, 1), got {beta}")));
    }
    let activation_time = c.float("activation_time", d.control.activation_time)?;
    if !(activation_time.is_finite() && activation_time >= 0.0) {
        return Err(invalid("control.activation_time", "must be finite and non-negative"));
    }
    let spin_up = c.float("spin_up", d.control.spin_up)?;
    if !(spin_up.is_finite() && spin_up >= 0.0) {
        return Err(invalid("control.spin_up", "must be finite and non-negative"));
    }
    let solver_tag = match c.string("solver")? {
        None => d.control.solver,
        Some(s) => s.parse().map_err(|e: String| invalid("control.solver", e))?,
    };
    let control = ControlSection {
        design_model: c.model("design_model", d.control.design_model)?,
        controlled_model: c.model("controlled_model", d.control.controlled_model)?,
        beta,
        activation_time,
        spin_up,
        spin_model: c.model("spin_model", d.control.spin_model)?,
        t_end: positive("control.t_end", c.float("t_end", d.control.t_end)?)?,
        solver: solver_tag,
    };

    let i = section(table, "initial")?;
    let amplitude = i.float("amplitude", 0.01)?;
    if !(amplitude > 0.0 && amplitude < 1.0) {
        return Err(invalid("initial.amplitude", format!("must lie in (0, 1), got {amplitude}")));
    }
    let initial = match i.string("kind")?.unwrap_or("single") {
        "single" => {
            if i.get("seed").is_some() {
                return Err(invalid("initial.seed", "only used with kind = \"multi\""));
            }
            let mode = i.count("mode", 1)?;
            if mode == 0 || 2 * mode >= grid_points {
                return Err(invalid("initial.mode", format!("must lie in 1..{}", grid_points / 2)));
            }
            InitialCondition::SingleMode {
                amplitude,
                mode: mode as u32,
            }
        }
        "multi" => {
            if i.get("mode").is_some() {
                return Err(invalid("initial.mode", "only used with kind = \"single\""));
            }
            InitialCondition::MultiMode {
                amplitude,
                seed: i.count("seed", 0)? as u64,
            }
        }
        other => return Err(invalid("initial.kind", format!("expected `single` or `multi`, got `{other}`"))),
    };

    let s = section(table, "solver")?;
    let solver = SolverConfig {
        dt_max: s.float("dt", DEFAULT_DT)?,
        newton_tol: s.float("newton_tol", DEFAULT_NEWTON_TOL)?,
        newton_max_iter: s.count("newton_max_iter", DEFAULT_NEWTON_MAX_ITER)?,
        blowup_threshold: s.float("blowup_threshold", DEFAULT_BLOWUP_THRESHOLD)?,
    };
    solver.validate().map_err(|e| match e {
        crate::solver::SolverError::InvalidSetting { name, reason } => {
            let key = match name {
                "solver.dt_max" => "solver.dt",
                other => other,
            };
            invalid(key, reason)
        }
        other => invalid("solver", other.to_string()),
    })?;

    let o = section(table, "output")?;
    let output = OutputSection {
        directory: o.string("directory")?.unwrap_or(&d.output.directory).to_string(),
        every: o.count("every", d.output.every)?,
    };

    let sc = section(table, "scan")?;
    let scan = StabilityMapSpec {
        re_values: sc.floats("re_values", &d.scan.re_values)?,
        ca_values: sc.floats("ca_values", &d.scan.ca_values)?,
        m_max: sc.count("m_max", d.scan.m_max)?,
        check_every: positive("scan.check_every", sc.float("check_every", d.scan.check_every)?)?,
        min_abort_time: sc.float("min_abort_time", d.scan.min_abort_time)?,
        reduction: sc.float("reduction", d.scan.reduction)?,
    };
    for (key, list) in [("scan.re_values", &scan.re_values), ("scan.ca_values", &scan.ca_values)] {
        if list.is_empty() {
            return Err(invalid(key, "must not be empty"));
        }
        if let Some(bad) = list.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(invalid(key, format!("entries must be positive, got {bad}")));
        }
    }
    if scan.m_max == 0 {
        return Err(invalid("scan.m_max", "must be at least 1"));
    }
    if !(scan.reduction > 1.0) {
        return Err(invalid("scan.reduction", "must exceed 1"));
    }
    if !(scan.min_abort_time >= 0.0) {
        return Err(invalid("scan.min_abort_time", "must be non-negative"));
    }

    let config = RunConfig {
        parameters,
        grid_points,
        actuators,
        width,
        control,
        initial,
        solver,
        output,
        scan,
    };
    config.flow()?;
    Ok(config)
}

/// Shortest text that parses back to exactly `v` as a TOML float.
fn float(v: f64) -> String {
    let s = format!("{v:?}");
    if s.contains(['.', 'e', 'i', 'n']) {
        s
    } else {
        format!("{s}.0")
    }
}

fn quoted(s: &str) -> String {
    Value::String(s.to_string()).to_string()
}

/// Canonical text of `config`: every key, fixed order, one per line.
pub fn write_config(config: &RunConfig) -> String {
    let mut out = String::new();
    let mut line = |k: &str, v: String| {
        let _ = writeln!(out, "{k} = {v}");
    };
    match config.parameters.source {
        ParameterSource::Preset(name) => line("parameters.preset", quoted(name)),
        ParameterSource::Direct { reynolds, capillary } => {
            line("parameters.reynolds", float(reynolds));
            line("parameters.capillary", float(capillary));
        }
    }
    line("parameters.theta", float(config.parameters.theta));
    line("parameters.aspect", float(config.parameters.aspect));
    line("grid.points", config.grid_points.to_string());
    line("actuators.count", config.actuators.to_string());
    line("actuators.width", float(config.width));
    let c = &config.control;
    line("control.design_model", quoted(c.design_model.tag()));
    line("control.controlled_model", quoted(c.controlled_model.tag()));
    line("control.beta", float(c.beta));
    line("control.activation_time", float(c.activation_time));
    line("control.spin_up", float(c.spin_up));
    line("control.spin_model", quoted(c.spin_model.tag()));
    line("control.t_end", float(c.t_end));
    line("control.solver", quoted(c.solver.as_str()));
    match config.initial {
        InitialCondition::SingleMode { amplitude, mode } => {
            line("initial.kind", quoted("single"));
            line("initial.amplitude", float(amplitude));
            line("initial.mode", mode.to_string());
        }
        InitialCondition::MultiMode { amplitude, seed } => {
            line("initial.kind", quoted("multi"));
            line("initial.amplitude", float(amplitude));
            line("initial.seed", seed.to_string());
        }
    }
    let s = &config.solver;
    line("solver.dt", float(s.dt_max));
    line("solver.newton_tol", float(s.newton_tol));
    line("solver.newton_max_iter", s.newton_max_iter.to_string());
    line("solver.blowup_threshold", float(s.blowup_threshold));
    line("output.directory", quoted(&config.output.directory));
    line("output.every", config.output.every.to_string());
    let list = |v: &[f64]| format!("[{}]", v.iter().map(|x| float(*x)).collect::<Vec<_>>().join(", "));
    line("scan.re_values", list(&config.scan.re_values));
    line("scan.ca_values", list(&config.scan.ca_values));
    line("scan.m_max", config.scan.m_max.to_string());
    line("scan.check_every", float(config.scan.check_every));
    line("scan.min_abort_time", float(config.scan.min_abort_time));
    line("scan.reduction", float(config.scan.reduction));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = parse_config("").unwrap();
        assert_eq!(c, RunConfig::default());
        let p = c.flow().unwrap();
        assert_eq!((p.reynolds(), p.capillary(), p.theta(), p.aspect()), (5.0, 0.05, PI / 3.0, 30.0));
        assert_eq!((c.grid_points, c.actuators, c.width, c.control.beta), (256, 5, 0.1, 0.5));
        assert_eq!(c.solver.dt_max, 0.05);
    }

    #[test]
    fn water_preset() {
        let c = parse_config("parameters.preset = \"water\"\n").unwrap();
        let p = c.flow().unwrap();
        assert!((p.reynolds() / 28.2 - 1.0).abs() < 0.03);
        assert!((p.capillary() / 0.0018 - 1.0).abs() < 0.03);
    }

    #[test]
    fn errors_name_the_key_or_line() {
        let err = parse_config("control.beta = 1.5\n").unwrap_err();
        assert!(matches!(&err, ConfigError::Invalid { key, .. } if key == "control.beta"), "{err}");
        let err = parse_config("[grid]\npoints = 64\nbogus = 1\n").unwrap_err();
        assert!(matches!(&err, ConfigError::Invalid { key, .. } if key == "grid.bogus"), "{err}");
        let err = parse_config("# ok\n\ngrid.points = = 3\n").unwrap_err();
        assert!(matches!(err, ConfigError::Parse { line: 3, .. }), "{err}");
        let err = parse_config("parameters.preset = \"water\"\nparameters.reynolds = 3\n").unwrap_err();
        assert!(matches!(&err, ConfigError::Invalid { key, .. } if key == "parameters.preset"));
    }

    #[test]
    fn canonical_roundtrip() {
        let text = "[parameters]\nreynolds = 7\ncapillary = 0.01\n[control]\ndesign_model = \"wr\"\n\
                    [initial]\nkind = \"multi\"\nseed = 42\n[scan]\nre_values = [1, 5, 10.5]\n";
        let c = parse_config(text).unwrap();
        let canon = write_config(&c);
        let again = parse_config(&canon).unwrap();
        assert_eq!(again, c);
        assert_eq!(write_config(&again), canon);
    }

    #[test]
    fn overrides_take_precedence() {
        let c = parse_with_overrides(
            "control.beta = 0.3\n",
            &["control.beta=0.7".into(), "control.design_model=wr".into()],
        )
        .unwrap();
        assert_eq!(c.control.beta, 0.7);
        assert_eq!(c.control.design_model, ModelKind::WeightedResidual);
        assert!(parse_with_overrides("", &["nosection=1".into()]).is_err());
    }
}
