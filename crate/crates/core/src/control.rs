//! Closed-loop simulation, damping-rate fits, cost accounting and the
//! minimum-actuator scan.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::actuators::{ActuatorConfig, ControlAmplitudes};
use crate::linear::{count_unstable_modes, LinearSystem};
use crate::lqr::{cost_weights, reduce_wr_gain, synthesize_with, GainMatrix, LqrError, SolverTag};
use crate::model::{deviation_norm_of, FlowParameters, Grid, InterfaceState, ModelError, ModelKind, NUSSELT_FLUX};
use crate::solver::{
    initial_condition, local_nusselt_flux, InitialCondition, Integrator, SolverConfig, SolverError, StepStatus,
};

/// Default spin-up length.
pub const DEFAULT_SPIN_UP: f64 = 200.0;
/// Spin-up stops early once the deviation norm varies by less than this
/// fraction over [`SATURATION_WINDOW`].
pub const SATURATION_TOLERANCE: f64 = 0.05;
pub const SATURATION_WINDOW: f64 = 50.0;
/// Norms below this are round-off and excluded from rate fits.
pub const NOISE_FLOOR: f64 = 1e-11;
/// Fraction of the post-activation record treated as transient.
pub const TRANSIENT_FRACTION: f64 = 0.1;
pub const MIN_FIT_SAMPLES: usize = 20;

#[derive(Debug, Error)]
pub enum ControlError {
    #[error("invalid control plan: {0}")]
    InvalidPlan(String),
    #[error("spin-up blew up at t = {time:.4}")]
    SpinUpBlowUp { time: f64 },
    #[error("spin-up Newton failure at t = {time:.4}")]
    SpinUpNewtonFailure { time: f64 },
    #[error("only {found} usable samples for a rate fit, need {MIN_FIT_SAMPLES}")]
    InsufficientData { found: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Lqr(#[from] LqrError),
}

/// Feedback law applied to a nonlinear model.
#[derive(Debug, Clone)]
pub struct ControlPlan {
    pub gain: GainMatrix,
    pub actuators: ActuatorConfig,
    pub controlled_model: ModelKind,
    /// Feedback is switched on at the first step starting at or after this.
    pub activation_time: f64,
    /// Weight of the deviation term in the accumulated cost.
    pub beta: f64,
}

impl ControlPlan {
    pub fn new(
        gain: GainMatrix,
        actuators: ActuatorConfig,
        controlled_model: ModelKind,
        activation_time: f64,
        beta: f64,
    ) -> Result<Self, ControlError> {
        if gain.rows() != actuators.count() {
            return Err(ControlError::InvalidPlan(format!(
                "gain has {} rows for {} actuators",
                gain.rows(),
                actuators.count()
            )));
        }
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(ControlError::InvalidPlan(format!("beta must lie in (0, 1], got {beta}")));
        }
        if !gain.is_finite() {
            return Err(ControlError::InvalidPlan("gain has non-finite entries".into()));
        }
        Ok(ControlPlan {
            gain,
            actuators,
            controlled_model,
            activation_time,
            beta,
        })
    }

    /// Uncontrolled plan: zero gain, never activated.
    pub fn uncontrolled(actuators: ActuatorConfig, grid: &Grid, model: ModelKind) -> Self {
        ControlPlan {
            gain: GainMatrix::zeros(actuators.count(), grid.len()),
            actuators,
            controlled_model: model,
            activation_time: f64::INFINITY,
            beta: 0.5,
        }
    }

    fn check_grid(&self, grid: &Grid) -> Result<(), ControlError> {
        let n = grid.len();
        let full = self.controlled_model == ModelKind::WeightedResidual && self.gain.cols() == 2 * n;
        if self.gain.cols() != n && !full {
            return Err(ControlError::InvalidPlan(format!(
                "gain has {} columns; expected {n}{}",
                self.gain.cols(),
                if self.controlled_model == ModelKind::WeightedResidual {
                    format!(" or {}", 2 * n)
                } else {
                    String::new()
                }
            )));
        }
        if (self.actuators.aspect() - grid.aspect()).abs() > 1e-12 * grid.aspect() {
            return Err(ControlError::InvalidPlan("actuators were laid out for another domain".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Termination {
    Completed,
    BlowUp(f64),
    NewtonFailure(f64),
}

impl Termination {
    pub fn is_failure(&self) -> bool {
        !matches!(self, Termination::Completed)
    }
}

/// Recorded time series of one run. Sample `i` is taken at the start of the
/// step beginning at `times[i]`, together with the control applied over it.
#[derive(Debug, Clone)]
pub struct SimulationResult {
    pub times: Vec<f64>,
    pub deviation_norms: Vec<f64>,
    pub control_history: Vec<ControlAmplitudes>,
    /// `∫ f² dx` at each sample.
    pub forcing_energy: Vec<f64>,
    /// Running cost at each sample.
    pub cost_history: Vec<f64>,
    pub accumulated_cost: f64,
    pub termination: Termination,
    pub snapshots: Vec<InterfaceState>,
    pub final_state: InterfaceState,
    pub activation_time: f64,
    pub beta: f64,
}

impl SimulationResult {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Deviation norm at the first sample at or after activation.
    pub fn norm_at_activation(&self) -> Option<f64> {
        let i = self.times.iter().position(|&t| t >= self.activation_time)?;
        Some(self.deviation_norms[i])
    }
}

/// Options for [`run_controlled`] beyond the plan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub solver: SolverConfig,
    /// Keep every `n`-th state (plus the last one).
    pub snapshot_every: Option<usize>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            solver: SolverConfig::default(),
            snapshot_every: None,
        }
    }
}

/// Converts a state to the unknowns of `model`: drops the flux, or starts
/// it at the local Nusselt value.
pub fn convert_state(state: &InterfaceState, model: ModelKind) -> InterfaceState {
    let q = match (model, &state.q) {
        (ModelKind::Benney, _) => None,
        (ModelKind::WeightedResidual, Some(q)) => Some(q.clone()),
        (ModelKind::WeightedResidual, None) => Some(local_nusselt_flux(state.h.as_slice())),
    };
    InterfaceState {
        h: state.h.clone(),
        q,
        time: state.time,
    }
}

/// A closed-loop simulation that can be advanced piecewise.
pub struct ControlledRun {
    plan: ControlPlan,
    integrator: Integrator,
    bumps: DMatrix<f64>,
    dx: f64,
    forcing: Vec<f64>,
    snapshot_every: Option<usize>,
    result: SimulationResult,
}

impl ControlledRun {
    pub fn new(
        plan: ControlPlan,
        params: FlowParameters,
        grid: Grid,
        start: &InterfaceState,
        options: RunOptions,
    ) -> Result<Self, ControlError> {
        plan.check_grid(&grid)?;
        let start = convert_state(start, plan.controlled_model);
        let integrator = Integrator::new(plan.controlled_model, params, grid.clone(), &start, options.solver)?;
        let result = SimulationResult {
            times: Vec::new(),
            deviation_norms: Vec::new(),
            control_history: Vec::new(),
            forcing_energy: Vec::new(),
            cost_history: Vec::new(),
            accumulated_cost: 0.0,
            termination: Termination::Completed,
            snapshots: Vec::new(),
            final_state: start.clone(),
            activation_time: plan.activation_time,
            beta: plan.beta,
        };
        let mut run = ControlledRun {
            bumps: plan.actuators.sampled_bumps(&grid),
            dx: grid.spacing(),
            forcing: vec![0.0; grid.len()],
            plan,
            integrator,
            snapshot_every: options.snapshot_every,
            result,
        };
        run.record(&start);
        Ok(run)
    }

    pub fn time(&self) -> f64 {
        self.integrator.time()
    }

    pub fn result(&self) -> &SimulationResult {
        &self.result
    }

    pub fn is_terminated(&self) -> bool {
        self.result.termination.is_failure()
    }

    pub fn into_result(mut self) -> SimulationResult {
        if let Some(every) = self.snapshot_every {
            let last = self.result.final_state.clone();
            if self.result.snapshots.last().map(|s| s.time) != Some(last.time) && every > 0 {
                self.result.snapshots.push(last);
            }
        }
        self.result
    }

    fn amplitudes(&self, state: &InterfaceState) -> DVector<f64> {
        let m = self.plan.actuators.count();
        if state.time < self.plan.activation_time {
            return DVector::zeros(m);
        }
        let k = &self.plan.gain.k;
        let n = state.len();
        let mut u = k.columns(0, n) * state.deviation();
        if k.ncols() == 2 * n {
            if let Some(q) = &state.q {
                u += k.columns(n, n) * q.add_scalar(-NUSSELT_FLUX);
            }
        }
        u
    }

    fn record(&mut self, state: &InterfaceState) {
        let u = self.amplitudes(state);
        let f = &self.bumps * &u;
        self.forcing.copy_from_slice(f.as_slice());
        let energy = f.iter().map(|v| v * v).sum::<f64>() * self.dx;
        let norm = deviation_norm_of(state.h.as_slice(), self.dx);
        let r = &mut self.result;
        if let (Some(&t_prev), Some(&n_prev), Some(&e_prev)) =
            (r.times.last(), r.deviation_norms.last(), r.forcing_energy.last())
        {
            if t_prev >= r.activation_time {
                let g = |n: f64, e: f64| r.beta * n * n + (1.0 - r.beta) * e;
                r.accumulated_cost += 0.5 * (state.time - t_prev) * (g(n_prev, e_prev) + g(norm, energy));
            }
        }
        r.times.push(state.time);
        r.deviation_norms.push(norm);
        r.control_history.push(ControlAmplitudes(u));
        r.forcing_energy.push(energy);
        r.cost_history.push(r.accumulated_cost);
        if let Some(every) = self.snapshot_every {
            if every > 0 && (r.times.len() - 1) % every == 0 {
                r.snapshots.push(state.clone());
            }
        }
        r.final_state = state.clone();
    }

    /// Steps until `t_end` or a failure.
    pub fn advance_to(&mut self, t_end: f64) {
        let tol = 1e-9 * self.integrator.grid().spacing().min(1.0);
        while !self.is_terminated() && self.integrator.time() < t_end - tol {
            let remaining = t_end - self.integrator.time();
            let outcome = self.integrator.step(&self.forcing, remaining);
            match outcome.status {
                StepStatus::Ok => self.record(&outcome.state),
                StepStatus::BlowUp(t) => self.result.termination = Termination::BlowUp(t),
                StepStatus::NewtonFailure(t) => self.result.termination = Termination::NewtonFailure(t),
            }
        }
    }
}

/// Runs `plan` from `start` to `t_end`. Failures end the series early and
/// are reported in [`SimulationResult::termination`].
pub fn run_controlled(
    plan: ControlPlan,
    params: FlowParameters,
    grid: Grid,
    start: &InterfaceState,
    t_end: f64,
    options: RunOptions,
) -> Result<SimulationResult, ControlError> {
    let mut run = ControlledRun::new(plan, params, grid, start, options)?;
    run.advance_to(t_end);
    Ok(run.into_result())
}

/// Outcome of a spin-up.
#[derive(Debug, Clone)]
pub struct SpinUp {
    /// Final state, relabelled to `t = 0`.
    pub state: InterfaceState,
    /// Time actually simulated.
    pub duration: f64,
    pub saturated: bool,
}

/// True when the norm varied by less than `SATURATION_TOLERANCE` of its
/// maximum over the trailing window ending at `times.last()`.
fn saturated(times: &[f64], norms: &[f64]) -> bool {
    let Some(&t_last) = times.last() else {
        return false;
    };
    if t_last - times[0] < SATURATION_WINDOW {
        return false;
    }
    let start = times.partition_point(|&t| t < t_last - SATURATION_WINDOW);
    let (lo, hi) = norms[start..]
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    hi > 0.0 && (hi - lo) <= SATURATION_TOLERANCE * hi
}

/// Uncontrolled evolution for up to `t_spin`, stopping early once the wave
/// has saturated.
pub fn spin_up(
    model: ModelKind,
    params: FlowParameters,
    grid: Grid,
    ic: &InterfaceState,
    t_spin: f64,
    solver: SolverConfig,
) -> Result<SpinUp, ControlError> {
    if !(t_spin >= 0.0) {
        return Err(ModelError::InvalidParameter {
            name: "control.spin_up",
            reason: format!("must be non-negative, got {t_spin}"),
        }
        .into());
    }
    let ic = convert_state(ic, model);
    if t_spin == 0.0 {
        return Ok(SpinUp {
            state: ic.relabelled(0.0),
            duration: 0.0,
            saturated: false,
        });
    }
    let t0 = ic.time;
    let dx = grid.spacing();
    let mut integrator = Integrator::new(model, params, grid, &ic, solver)?;
    let mut times = vec![t0];
    let mut norms = vec![deviation_norm_of(ic.h.as_slice(), dx)];
    let zero = vec![0.0; ic.len()];
    let mut state = ic;
    let mut is_saturated = false;
    while integrator.time() < t0 + t_spin - 1e-9 {
        let outcome = integrator.step(&zero, t0 + t_spin - integrator.time());
        match outcome.status {
            StepStatus::Ok => {}
            StepStatus::BlowUp(time) => return Err(ControlError::SpinUpBlowUp { time }),
            StepStatus::NewtonFailure(time) => return Err(ControlError::SpinUpNewtonFailure { time }),
        }
        state = outcome.state;
        times.push(state.time);
        norms.push(deviation_norm_of(state.h.as_slice(), dx));
        if saturated(&times, &norms) {
            is_saturated = true;
            break;
        }
    }
    Ok(SpinUp {
        duration: state.time - t0,
        state: state.relabelled(0.0),
        saturated: is_saturated,
    })
}

/// Least-squares exponential rate of the deviation norm.
#[derive(Debug, Clone, PartialEq)]
pub struct DampingFit {
    /// Slope of `ln ‖ĥ‖₂`; negative means decay.
    pub rate: f64,
    pub fit_window: (f64, f64),
    /// RMS residual of the log-linear fit.
    pub residual: f64,
    /// Sign agrees across the 60%, 80% and 100% expanding windows.
    pub confident: bool,
    pub samples: usize,
}

fn line_fit(t: &[f64], y: &[f64]) -> (f64, f64) {
    let n = t.len() as f64;
    let tm = t.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (a, b) in t.iter().zip(y) {
        sxy += (a - tm) * (b - ym);
        sxx += (a - tm) * (a - tm);
    }
    let slope = sxy / sxx;
    let rms = (t
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let e = b - (ym + slope * (a - tm));
            e * e
        })
        .sum::<f64>()
        / n)
        .sqrt();
    (slope, rms)
}

/// Fits `ln ‖ĥ‖₂` against time after activation, skipping the first 10% of
/// the record and any samples under the round-off floor.
pub fn fit_damping_rate(result: &SimulationResult) -> Result<DampingFit, ControlError> {
    fit_series(&result.times, &result.deviation_norms, result.activation_time)
}

/// [`fit_damping_rate`] on raw series.
pub fn fit_series(times: &[f64], norms: &[f64], activation_time: f64) -> Result<DampingFit, ControlError> {
    let after: Vec<(f64, f64)> = times
        .iter()
        .zip(norms)
        .filter(|(&t, _)| t >= activation_time)
        .map(|(&t, &n)| (t, n))
        .collect();
    let (Some(first), Some(last)) = (after.first(), after.last()) else {
        return Err(ControlError::InsufficientData { found: 0 });
    };
    let t_skip = first.0 + TRANSIENT_FRACTION * (last.0 - first.0);
    let (t, y): (Vec<f64>, Vec<f64>) = after
        .iter()
        .filter(|(t, n)| *t >= t_skip && *n >= NOISE_FLOOR && n.is_finite())
        .map(|&(t, n)| (t, n.ln()))
        .unzip();
    if t.len() < MIN_FIT_SAMPLES {
        return Err(ControlError::InsufficientData { found: t.len() });
    }
    let (rate, residual) = line_fit(&t, &y);
    let (ta, tb) = (t[0], t[t.len() - 1]);
    let signs: Vec<f64> = [0.6, 0.8]
        .iter()
        .filter_map(|&frac| {
            let end = t.partition_point(|&s| s <= ta + frac * (tb - ta));
            (end >= MIN_FIT_SAMPLES / 2).then(|| line_fit(&t[..end], &y[..end]).0.signum())
        })
        .collect();
    let confident = rate != 0.0 && signs.len() == 2 && signs.iter().all(|&s| s == rate.signum());
    Ok(DampingFit {
        rate,
        fit_window: (ta, tb),
        residual,
        confident,
        samples: t.len(),
    })
}

/// Finite-horizon cost with a bound on the neglected tail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostEstimate {
    pub kappa: f64,
    pub horizon: (f64, f64),
    /// `g(T)/(2|rate|)` for an exponentially decaying integrand, `None` when
    /// no decay rate can be fitted.
    pub tail_bound: Option<f64>,
}

/// Trapezoid rule for `∫ β‖ĥ‖² + (1-β)‖f‖² dt` from activation to the last
/// sample.
pub fn evaluate_cost(result: &SimulationResult, beta: f64) -> CostEstimate {
    evaluate_cost_until(result, beta, f64::INFINITY)
}

/// [`evaluate_cost`] truncated at `horizon`.
pub fn evaluate_cost_until(result: &SimulationResult, beta: f64, horizon: f64) -> CostEstimate {
    let g: Vec<f64> = result
        .deviation_norms
        .iter()
        .zip(&result.forcing_energy)
        .map(|(n, e)| beta * n * n + (1.0 - beta) * e)
        .collect();
    let mut kappa = 0.0;
    let mut start = None;
    let mut end = None;
    for i in 1..result.times.len() {
        let (t0, t1) = (result.times[i - 1], result.times[i]);
        if t0 < result.activation_time || t1 > horizon {
            continue;
        }
        start.get_or_insert(t0);
        end = Some((t1, g[i]));
        kappa += 0.5 * (t1 - t0) * (g[i - 1] + g[i]);
    }
    let tail_bound = end.and_then(|(_, g_end)| {
        fit_damping_rate(result)
            .ok()
            .filter(|fit| fit.rate < 0.0)
            .map(|fit| g_end / (2.0 * fit.rate.abs()))
    });
    CostEstimate {
        kappa,
        horizon: (start.unwrap_or(result.activation_time), end.map_or(result.activation_time, |e| e.0)),
        tail_bound,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Stabilised,
    NotStabilised,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Stabilised => "stabilised",
            Verdict::NotStabilised => "not-stabilised",
        }
    }
}

/// Settings shared by every run of a minimum-actuator scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanProtocol {
    pub grid_points: usize,
    pub width: f64,
    pub beta: f64,
    pub initial: InitialCondition,
    pub spin_up: f64,
    /// Model used for the uncontrolled spin-up; the Benney model may blow up
    /// before a wave develops.
    pub spin_model: ModelKind,
    pub t_end: f64,
    /// Interval between verdict checks.
    pub check_every: f64,
    /// No early "not stabilised" verdict before this much controlled time.
    pub min_abort_time: f64,
    /// Required reduction of `‖ĥ‖₂` from activation.
    pub reduction: f64,
    pub solver: SolverConfig,
}

impl Default for ScanProtocol {
    fn default() -> Self {
        ScanProtocol {
            grid_points: 256,
            width: crate::actuators::DEFAULT_WIDTH,
            beta: 0.5,
            initial: InitialCondition::SingleMode {
                amplitude: 0.01,
                mode: 1,
            },
            spin_up: DEFAULT_SPIN_UP,
            spin_model: ModelKind::WeightedResidual,
            t_end: 500.0,
            check_every: 10.0,
            min_abort_time: 50.0,
            reduction: 1e3,
            solver: SolverConfig::default(),
        }
    }
}

/// Verdict for one actuator count.
#[derive(Debug, Clone, PartialEq)]
pub struct ActuatorTrial {
    pub actuators: usize,
    pub verdict: Verdict,
    /// Why the verdict was reached.
    pub reason: String,
    pub fit: Option<DampingFit>,
    pub simulated_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinActuatorResult {
    /// Smallest stabilising count, `None` when none up to `m_max` works.
    pub m_min: Option<usize>,
    pub m_max: usize,
    pub unstable_modes: usize,
    pub trials: Vec<ActuatorTrial>,
}

/// Designs the feedback for `m` actuators: the full gain when both levels
/// use the weighted-residual model, the height-only reduction when it drives
/// the Benney model.
pub fn design_gain(
    design_model: ModelKind,
    controlled_model: ModelKind,
    params: &FlowParameters,
    grid: &Grid,
    actuators: &ActuatorConfig,
    beta: f64,
    solver: SolverTag,
) -> Result<GainMatrix, ControlError> {
    let system = LinearSystem::new(design_model, params, grid, actuators);
    let weights = cost_weights(beta, grid, design_model, actuators.count())?;
    let gain = synthesize_with(&system, &weights, solver)?;
    match (design_model, controlled_model) {
        (ModelKind::WeightedResidual, ModelKind::Benney) => Ok(reduce_wr_gain(&gain)?),
        _ => Ok(gain),
    }
}

/// Runs `plan` in chunks and stops as soon as the stabilisation verdict is
/// settled.
pub fn classify_run(
    plan: ControlPlan,
    params: FlowParameters,
    grid: Grid,
    start: &InterfaceState,
    protocol: &ScanProtocol,
) -> Result<(Verdict, String, Option<DampingFit>, f64), ControlError> {
    let mut run = ControlledRun::new(plan, params, grid, start, RunOptions {
        solver: protocol.solver,
        snapshot_every: None,
    })?;
    let t0 = run.time();
    let initial = run.result().norm_at_activation().unwrap_or(f64::NAN);
    let mut t = t0;
    loop {
        t = (t + protocol.check_every).min(t0 + protocol.t_end);
        run.advance_to(t);
        let res = run.result();
        let elapsed = run.time() - t0;
        match res.termination {
            Termination::BlowUp(at) => {
                return Ok((Verdict::NotStabilised, format!("blow-up at t={at:.3}"), None, elapsed));
            }
            Termination::NewtonFailure(at) => {
                return Ok((Verdict::NotStabilised, format!("Newton failure at t={at:.3}"), None, elapsed));
            }
            Termination::Completed => {}
        }
        let last = *res.deviation_norms.last().unwrap_or(&f64::NAN);
        let fit = fit_damping_rate(res).ok();
        if last < NOISE_FLOOR {
            return Ok((Verdict::Stabilised, "reached the round-off floor".into(), fit, elapsed));
        }
        if let Some(fit) = &fit {
            if fit.confident && fit.rate < 0.0 && initial / last >= protocol.reduction {
                return Ok((
                    Verdict::Stabilised,
                    format!("decay rate {:.4e}, reduction {:.2e}", fit.rate, initial / last),
                    Some(fit.clone()),
                    elapsed,
                ));
            }
            if fit.confident && fit.rate > 0.0 && elapsed >= protocol.min_abort_time {
                return Ok((
                    Verdict::NotStabilised,
                    format!("growth rate {:.4e}", fit.rate),
                    Some(fit.clone()),
                    elapsed,
                ));
            }
        }
        if elapsed >= protocol.t_end - 1e-9 {
            return Ok((
                Verdict::NotStabilised,
                format!("reduction only {:.2e} by t={:.1}", initial / last, elapsed),
                fit,
                elapsed,
            ));
        }
    }
}

/// Developed wave used as the common starting point of a scan.
pub fn scan_start(params: &FlowParameters, grid: &Grid, protocol: &ScanProtocol) -> Result<InterfaceState, ControlError> {
    let ic = initial_condition(protocol.initial, grid, protocol.spin_model)?;
    Ok(spin_up(protocol.spin_model, *params, grid.clone(), &ic, protocol.spin_up, protocol.solver)?.state)
}

/// Ascending scan over `M = 1..=m_max`; the first stabilising count wins.
/// Gains that cannot be designed count as not stabilising.
pub fn find_min_actuators(
    design_model: ModelKind,
    controlled_model: ModelKind,
    params: &FlowParameters,
    m_max: usize,
    protocol: &ScanProtocol,
) -> Result<MinActuatorResult, ControlError> {
    if m_max == 0 {
        return Err(ModelError::InvalidParameter {
            name: "scan.m_max",
            reason: "must be at least 1".into(),
        }
        .into());
    }
    let grid = Grid::new(protocol.grid_points, params.aspect())?;
    let start = scan_start(params, &grid, protocol)?;
    let mut trials = Vec::new();
    let mut m_min = None;
    for m in 1..=m_max {
        let actuators = ActuatorConfig::new(m, protocol.width, &grid)?;
        let trial = match design_gain(design_model, controlled_model, params, &grid, &actuators, protocol.beta, SolverTag::Schur) {
            Err(ControlError::Lqr(e)) => ActuatorTrial {
                actuators: m,
                verdict: Verdict::NotStabilised,
                reason: format!("no gain: {e}"),
                fit: None,
                simulated_time: 0.0,
            },
            Err(e) => return Err(e),
            Ok(gain) => {
                let plan = ControlPlan::new(gain, actuators, controlled_model, 0.0, protocol.beta)?;
                let (verdict, reason, fit, simulated_time) =
                    classify_run(plan, *params, grid.clone(), &start, protocol)?;
                ActuatorTrial {
                    actuators: m,
                    verdict,
                    reason,
                    fit,
                    simulated_time,
                }
            }
        };
        let done = trial.verdict == Verdict::Stabilised;
        trials.push(trial);
        if done {
            m_min = Some(m);
            break;
        }
    }
    Ok(MinActuatorResult {
        m_min,
        m_max,
        unstable_modes: count_unstable_modes(params),
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pure_exponential_fit() {
        let times: Vec<f64> = (0..=400).map(|i| i as f64 * 0.05).collect();
        let norms: Vec<f64> = times.iter().map(|t| (-0.3 * t).exp()).collect();
        let fit = fit_series(&times, &norms, 0.0).unwrap();
        assert!((fit.rate + 0.3).abs() < 1e-6);
        assert!(fit.confident);
        assert!(fit.fit_window.0 >= 2.0 - 1e-12);
    }

    #[test]
    fn oscillating_decay_fit() {
        let times: Vec<f64> = (0..=2000).map(|i| i as f64 * 0.05).collect();
        let norms: Vec<f64> = times.iter().map(|t| (-0.3 * t).exp() * (2.0 + (5.0 * t).cos())).collect();
        let fit = fit_series(&times, &norms, 0.0).unwrap();
        assert!((fit.rate + 0.3).abs() < 0.02, "rate {}", fit.rate);
    }

    #[test]
    fn floor_and_short_series() {
        let times: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let norms: Vec<f64> = times.iter().map(|t| (-2.0 * t).exp()).collect();
        // Only ~12 samples stay above 1e-11 once the transient is dropped.
        assert!(matches!(
            fit_series(&times, &norms, 0.0),
            Err(ControlError::InsufficientData { .. })
        ));
    }

    #[test]
    fn saturation_detector() {
        let times: Vec<f64> = (0..=100).map(|i| i as f64).collect();
        let flat: Vec<f64> = times.iter().map(|t| 1.0 + 0.01 * (t * 0.3).sin()).collect();
        assert!(saturated(&times, &flat));
        let growing: Vec<f64> = times.iter().map(|t| (0.01 * t).exp()).collect();
        assert!(!saturated(&times, &growing));
        assert!(!saturated(&times[..40], &flat[..40]));
    }
}
