//! Implicit time integration of the nonlinear film models: variable-step
//! BDF2 with a backward-Euler start, Newton iteration on an exact banded
//! Jacobian, blow-up detection and initial conditions.

pub mod benney;
mod newton;
pub mod wr;

use std::f64::consts::PI;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{FlowParameters, Grid, InterfaceState, ModelError, ModelKind};

pub use benney::benney_flux;
pub use newton::{newton_solve, NewtonError, NewtonMatrix, NewtonSolution};

pub const DEFAULT_DT: f64 = 0.05;
pub const DEFAULT_NEWTON_TOL: f64 = 1e-10;
pub const DEFAULT_NEWTON_MAX_ITER: usize = 25;
pub const DEFAULT_BLOWUP_THRESHOLD: f64 = 10.0;

/// A Newton failure with `max h` above this counts as blow-up.
const DIVERGENCE_HEIGHT: f64 = 2.0;
/// Step-size reductions allowed before a Newton failure is final.
const MAX_HALVINGS: u32 = 12;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid solver setting `{name}`: {reason}")]
    InvalidSetting { name: &'static str, reason: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub dt_max: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub blowup_threshold: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            dt_max: DEFAULT_DT,
            newton_tol: DEFAULT_NEWTON_TOL,
            newton_max_iter: DEFAULT_NEWTON_MAX_ITER,
            blowup_threshold: DEFAULT_BLOWUP_THRESHOLD,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |name, reason: String| Err(SolverError::InvalidSetting { name, reason });
        if !(self.dt_max.is_finite() && self.dt_max > 0.0) {
            return bad("solver.dt", format!("must be positive, got {}", self.dt_max));
        }
        if !(self.newton_tol.is_finite() && self.newton_tol > 0.0) {
            return bad("solver.newton_tol", format!("must be positive, got {}", self.newton_tol));
        }
        if self.newton_max_iter == 0 {
            return bad("solver.newton_max_iter", "must be at least 1".into());
        }
        if !(self.blowup_threshold > 1.0) {
            return bad("solver.blowup_threshold", format!("must exceed 1, got {}", self.blowup_threshold));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepStatus {
    Ok,
    BlowUp(f64),
    NewtonFailure(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: InterfaceState,
    pub newton_iters: usize,
    pub dt: f64,
    pub status: StepStatus,
}

/// Time integrator for one simulation. Owns its history and scratch space.
#[derive(Debug, Clone)]
pub struct Integrator {
    model: ModelKind,
    params: FlowParameters,
    grid: Grid,
    config: SolverConfig,
    /// Interleaved unknowns at the current time.
    current: Vec<f64>,
    /// Previous unknowns and the step that led from them to `current`.
    previous: Option<(Vec<f64>, f64)>,
    time: f64,
    dt: f64,
    steps: usize,
}

impl Integrator {
    pub fn new(
        model: ModelKind,
        params: FlowParameters,
        grid: Grid,
        start: &InterfaceState,
        config: SolverConfig,
    ) -> Result<Self, SolverError> {
        config.validate()?;
        if start.len() != grid.len() {
            return Err(ModelError::LengthMismatch {
                expected: grid.len(),
                found: start.len(),
            }
            .into());
        }
        let current = pack(model, start)?;
        Ok(Integrator {
            model,
            params,
            grid,
            config,
            current,
            previous: None,
            time: start.time,
            dt: config.dt_max,
            steps: 0,
        })
    }

    pub fn model(&self) -> ModelKind {
        self.model
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn params(&self) -> &FlowParameters {
        &self.params
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn state(&self) -> InterfaceState {
        unpack(self.model, &self.current, self.time)
    }

    /// Current nodal heights.
    pub fn heights(&self) -> Vec<f64> {
        match self.model {
            ModelKind::Benney => self.current.clone(),
            ModelKind::WeightedResidual => self.current.iter().step_by(2).copied().collect(),
        }
    }

    /// Advances by one accepted step of at most `max_dt` (and at most the
    /// current adaptive step), with nodal forcing `f` held fixed over the
    /// step. On Newton failure the step is halved and retried; after a
    /// success the step grows back towards `dt_max`.
    pub fn step(&mut self, f: &[f64], max_dt: f64) -> StepOutcome {
        assert_eq!(f.len(), self.grid.len(), "forcing length must match the grid");
        let mut dt = self.dt.min(max_dt).min(self.config.dt_max);
        let mut halvings = 0;
        loop {
            match self.try_step(f, dt) {
                Ok((next, iters)) => {
                    let prev = std::mem::replace(&mut self.current, next);
                    self.previous = Some((prev, dt));
                    self.time += dt;
                    let status = self.classify(&self.current);
                    self.steps += 1;
                    if halvings == 0 {
                        self.dt = (self.dt * 2.0).min(self.config.dt_max);
                    } else {
                        self.dt = dt;
                    }
                    return StepOutcome {
                        state: self.state(),
                        newton_iters: iters,
                        dt,
                        status,
                    };
                }
                Err(last) => {
                    let peak = max_height(self.model, &last).max(max_height(self.model, &self.current));
                    let finite = last.iter().all(|v| v.is_finite());
                    if halvings >= MAX_HALVINGS {
                        let t = self.time;
                        let status = if !finite || peak > DIVERGENCE_HEIGHT {
                            StepStatus::BlowUp(t)
                        } else {
                            StepStatus::NewtonFailure(t)
                        };
                        return StepOutcome {
                            state: self.state(),
                            newton_iters: 0,
                            dt,
                            status,
                        };
                    }
                    halvings += 1;
                    dt *= 0.5;
                }
            }
        }
    }

    fn classify(&self, z: &[f64]) -> StepStatus {
        let mut peak = f64::NEG_INFINITY;
        let mut trough = f64::INFINITY;
        let stride = self.model.fields();
        for &h in z.iter().step_by(stride) {
            if !h.is_finite() {
                return StepStatus::BlowUp(self.time);
            }
            peak = peak.max(h);
            trough = trough.min(h);
        }
        if peak > self.config.blowup_threshold || trough <= 0.0 {
            StepStatus::BlowUp(self.time)
        } else {
            StepStatus::Ok
        }
    }

    /// BDF coefficients `(c₀, history)` for a step of size `dt`.
    fn time_derivative(&self, dt: f64) -> (f64, Vec<f64>) {
        match &self.previous {
            None => (1.0 / dt, self.current.iter().map(|v| -v / dt).collect()),
            Some((prev, dt_prev)) => {
                let w = dt / dt_prev;
                let c0 = (1.0 + 2.0 * w) / ((1.0 + w) * dt);
                let c1 = -(1.0 + w) / dt;
                let c2 = w * w / ((1.0 + w) * dt);
                let hist = self.current.iter().zip(prev).map(|(a, b)| c1 * a + c2 * b).collect();
                (c0, hist)
            }
        }
    }

    fn guess(&self, dt: f64) -> Vec<f64> {
        match &self.previous {
            None => self.current.clone(),
            Some((prev, dt_prev)) => {
                let w = dt / dt_prev;
                self.current.iter().zip(prev).map(|(a, b)| a + w * (a - b)).collect()
            }
        }
    }

    /// Newton solve for one step; on failure returns the extrapolated guess.
    fn try_step(&self, f: &[f64], dt: f64) -> Result<(Vec<f64>, usize), Vec<f64>> {
        let (c0, hist) = self.time_derivative(dt);
        let dx = self.grid.spacing();
        let params = self.params;
        let guess = self.guess(dt);
        let fallback = guess.clone();
        let result = match self.model {
            ModelKind::Benney => newton_solve(
                |h: &[f64], out: &mut [f64]| benney::residual(h, c0, &hist, f, &params, dx, out),
                |h: &[f64]| benney::jacobian(h, c0, f, &params, dx),
                guess,
                self.config.newton_tol,
                self.config.newton_max_iter,
            ),
            ModelKind::WeightedResidual => newton_solve(
                |z: &[f64], out: &mut [f64]| wr::residual(z, c0, &hist, f, &params, dx, out),
                |z: &[f64]| wr::jacobian(z, c0, &hist, f, &params, dx),
                guess,
                self.config.newton_tol,
                self.config.newton_max_iter,
            ),
        };
        result.map(|s| (s.x, s.iterations)).map_err(|_| fallback)
    }
}

fn max_height(model: ModelKind, z: &[f64]) -> f64 {
    z.iter()
        .step_by(model.fields())
        .fold(f64::NEG_INFINITY, |m, &v| if v.is_finite() { m.max(v) } else { f64::INFINITY })
}

fn pack(model: ModelKind, state: &InterfaceState) -> Result<Vec<f64>, ModelError> {
    match model {
        ModelKind::Benney => Ok(state.h.as_slice().to_vec()),
        ModelKind::WeightedResidual => {
            let q = state.q.as_ref().ok_or(ModelError::InvalidParameter {
                name: "state.q",
                reason: "the weighted-residual model needs a flux field".into(),
            })?;
            Ok(wr::interleave(state.h.as_slice(), q.as_slice()))
        }
    }
}

fn unpack(model: ModelKind, z: &[f64], time: f64) -> InterfaceState {
    match model {
        ModelKind::Benney => InterfaceState {
            h: DVector::from_column_slice(z),
            q: None,
            time,
        },
        ModelKind::WeightedResidual => {
            let (h, q) = wr::split(z);
            InterfaceState {
                h: DVector::from_vec(h),
                q: Some(DVector::from_vec(q)),
                time,
            }
        }
    }
}

/// Starting perturbation of the flat film.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialCondition {
    /// `amplitude · sin(2π·mode·x/L)`.
    SingleMode { amplitude: f64, mode: u32 },
    /// Random-phase sum of the first few modes, scaled so the largest
    /// deviation equals `amplitude`.
    MultiMode { amplitude: f64, seed: u64 },
}

const MULTI_MODE_COUNT: u32 = 6;

/// `h = 1 + perturbation` with zero mean; for the weighted-residual model the
/// flux starts at the local Nusselt value `2h³/3` on the half points.
pub fn initial_condition(kind: InitialCondition, grid: &Grid, model: ModelKind) -> Result<InterfaceState, ModelError> {
    let xs = grid.coordinates();
    let l = grid.aspect();
    let mut p: Vec<f64> = match kind {
        InitialCondition::SingleMode { amplitude, mode } => {
            check_amplitude(amplitude)?;
            if mode == 0 || 2 * mode as usize >= grid.len() {
                return Err(ModelError::InvalidParameter {
                    name: "initial.mode",
                    reason: format!("mode must lie in 1..{}, got {mode}", grid.len() / 2),
                });
            }
            xs.iter().map(|x| amplitude * (2.0 * PI * mode as f64 * x / l).sin()).collect()
        }
        InitialCondition::MultiMode { amplitude, seed } => {
            check_amplitude(amplitude)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let modes: Vec<(f64, f64)> = (0..MULTI_MODE_COUNT)
                .map(|_| (rng.gen_range(0.2..1.0), rng.gen_range(0.0..2.0 * PI)))
                .collect();
            let raw: Vec<f64> = xs
                .iter()
                .map(|x| {
                    modes
                        .iter()
                        .enumerate()
                        .map(|(m, (a, phi))| a * (2.0 * PI * (m + 1) as f64 * x / l + phi).sin())
                        .sum()
                })
                .collect();
            let peak = raw.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            raw.iter().map(|v| amplitude * v / peak).collect()
        }
    };
    let mean = p.iter().sum::<f64>() / p.len() as f64;
    p.iter_mut().for_each(|v| *v -= mean);
    let h = DVector::from_iterator(p.len(), p.iter().map(|v| 1.0 + v));
    let q = match model {
        ModelKind::Benney => None,
        ModelKind::WeightedResidual => Some(local_nusselt_flux(h.as_slice())),
    };
    InterfaceState::new(h, q, 0.0)
}

/// `2h̄³/3` at the half points.
pub fn local_nusselt_flux(h: &[f64]) -> DVector<f64> {
    let n = h.len();
    DVector::from_fn(n, |j, _| {
        let hm = 0.5 * (h[j] + h[(j + 1) % n]);
        2.0 * hm * hm * hm / 3.0
    })
}

fn check_amplitude(a: f64) -> Result<(), ModelError> {
    if a.is_finite() && a > 0.0 && a < 1.0 {
        Ok(())
    } else {
        Err(ModelError::InvalidParameter {
            name: "initial.amplitude",
            reason: format!("must lie in (0, 1), got {a}"),
        })
    }
}
