//! Linear-quadratic regulator synthesis for the linearised film: cost
//! weights, the algebraic Riccati equation, gain matrices and closed-loop
//! spectra, plus controllability diagnostics.

mod care;
mod diagnostics;
mod fourier;
mod gain_file;

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::linalg::{self, LinalgError};
use crate::linear::LinearSystem;
use crate::model::{FlowParameters, Grid, ModelError, ModelKind};

pub use care::{care_residual, solve_care, solve_care_matrices, solve_care_with, CareMethod, CareOptions, CareSolution};
pub use diagnostics::{kalman_controllable, stabilisable, KalmanReport, StabilisabilityReport};
pub use fourier::{fourier_restricted_gain, left_unstable_basis, unstable_fourier_basis};
pub use gain_file::{read_gain, write_gain, GAIN_FORMAT_VERSION};

/// Relative tolerance for every numerical-rank decision.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum LqrError {
    #[error("invalid cost weights: {0}")]
    InvalidWeights(String),
    #[error("system is not stabilisable: {0}")]
    NonStabilisable(String),
    #[error("Riccati solve is ill-conditioned: {0}")]
    IllConditioned(String),
    #[error("{actuators} actuator(s) give rank {rank} on an unstable block of dimension {required}")]
    InsufficientActuators {
        required: usize,
        rank: usize,
        actuators: usize,
    },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("gain file line {line}: {message}")]
    GainFormat { line: usize, message: String },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Diagonal LQR weights `U = u I`, `V = v I`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostWeights {
    beta: f64,
    u_diag: f64,
    v_diag: f64,
    state_dim: usize,
    inputs: usize,
}

impl CostWeights {
    /// The discrete analogue of `β∫ĥ² dx + (1-β)Σu²`: `U = (βL/N) I` and
    /// `V = (1-β) I`.
    pub fn new(beta: f64, grid: &Grid, model: ModelKind, inputs: usize) -> Result<Self, LqrError> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(LqrError::InvalidWeights(format!("beta must lie in (0, 1), got {beta}")));
        }
        Ok(CostWeights {
            beta,
            u_diag: beta * grid.aspect() / grid.len() as f64,
            v_diag: 1.0 - beta,
            state_dim: model.fields() * grid.len(),
            inputs,
        })
    }

    /// Arbitrary positive diagonal weights.
    pub fn custom(u_diag: f64, v_diag: f64, state_dim: usize, inputs: usize) -> Result<Self, LqrError> {
        if !(u_diag > 0.0 && v_diag > 0.0 && u_diag.is_finite() && v_diag.is_finite()) {
            return Err(LqrError::InvalidWeights(format!(
                "diagonal weights must be positive, got u = {u_diag}, v = {v_diag}"
            )));
        }
        Ok(CostWeights {
            beta: u_diag / (u_diag + v_diag),
            u_diag,
            v_diag,
            state_dim,
            inputs,
        })
    }

    /// Both weights multiplied by `alpha`.
    pub fn scaled(&self, alpha: f64) -> Result<Self, LqrError> {
        let mut w = CostWeights::custom(self.u_diag * alpha, self.v_diag * alpha, self.state_dim, self.inputs)?;
        w.beta = self.beta;
        Ok(w)
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn u_diag(&self) -> f64 {
        self.u_diag
    }

    pub fn v_diag(&self) -> f64 {
        self.v_diag
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn u_matrix(&self) -> DMatrix<f64> {
        DMatrix::identity(self.state_dim, self.state_dim) * self.u_diag
    }

    pub fn v_matrix(&self) -> DMatrix<f64> {
        DMatrix::identity(self.inputs, self.inputs) * self.v_diag
    }
}

pub fn cost_weights(beta: f64, grid: &Grid, model: ModelKind, inputs: usize) -> Result<CostWeights, LqrError> {
    CostWeights::new(beta, grid, model, inputs)
}

/// How a gain was synthesised.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverTag {
    Schur,
    Eigenvector,
    FourierRestricted,
}

impl SolverTag {
    pub fn as_str(self) -> &'static str {
        match self {
            SolverTag::Schur => "schur",
            SolverTag::Eigenvector => "eigenvector",
            SolverTag::FourierRestricted => "fourier-restricted",
        }
    }
}

impl fmt::Display for SolverTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SolverTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "schur" => Ok(SolverTag::Schur),
            "eigenvector" => Ok(SolverTag::Eigenvector),
            "fourier-restricted" => Ok(SolverTag::FourierRestricted),
            other => Err(format!("unknown solver tag `{other}`")),
        }
    }
}

impl From<CareMethod> for SolverTag {
    fn from(m: CareMethod) -> Self {
        match m {
            CareMethod::Schur => SolverTag::Schur,
            CareMethod::Eigenvector => SolverTag::Eigenvector,
        }
    }
}

/// Where a gain came from.
#[derive(Debug, Clone, PartialEq)]
pub struct GainMetadata {
    pub model: ModelKind,
    pub params: FlowParameters,
    pub beta: f64,
    pub actuators: usize,
    pub width: f64,
    pub grid_points: usize,
    pub solver: SolverTag,
    /// True once a weighted-residual gain has been folded onto `ĥ` alone.
    pub reduced: bool,
}

/// Feedback gain `u = K x`.
#[derive(Debug, Clone, PartialEq)]
pub struct GainMatrix {
    pub k: DMatrix<f64>,
    pub metadata: Option<GainMetadata>,
}

impl GainMatrix {
    pub fn rows(&self) -> usize {
        self.k.nrows()
    }

    pub fn cols(&self) -> usize {
        self.k.ncols()
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        GainMatrix {
            k: DMatrix::zeros(rows, cols),
            metadata: None,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.k.iter().all(|v| v.is_finite())
    }
}

fn metadata_for(system: &LinearSystem, weights: &CostWeights, solver: SolverTag) -> Option<GainMetadata> {
    match (system.model, system.params, &system.grid, &system.actuators) {
        (Some(model), Some(params), Some(grid), Some(act)) => Some(GainMetadata {
            model,
            params,
            beta: weights.beta(),
            actuators: act.count(),
            width: act.width(),
            grid_points: grid.len(),
            solver,
            reduced: false,
        }),
        _ => None,
    }
}

fn check_dims(system: &LinearSystem, weights: &CostWeights) -> Result<(), LqrError> {
    if weights.state_dim() != system.state_dim() || weights.inputs() != system.input_dim() {
        return Err(LqrError::Dimension(format!(
            "weights sized {}x{} for a system with {} states and {} inputs",
            weights.state_dim(),
            weights.inputs(),
            system.state_dim(),
            system.input_dim()
        )));
    }
    Ok(())
}

/// `K = -V⁻¹ΨᵀP`.
pub fn gain(solution: &CareSolution, system: &LinearSystem, weights: &CostWeights) -> GainMatrix {
    let k = system.actuation.transpose() * &solution.p * (-1.0 / weights.v_diag());
    GainMatrix {
        k,
        metadata: metadata_for(system, weights, solution.method.into()),
    }
}

/// Solves the Riccati equation and forms the optimal gain.
pub fn synthesize(system: &LinearSystem, weights: &CostWeights) -> Result<(GainMatrix, CareSolution), LqrError> {
    let solution = solve_care(system, weights)?;
    Ok((gain(&solution, system, weights), solution))
}

/// Gain by the requested route. A CARE route may fall back to the other
/// subspace method; the metadata records the one that succeeded.
pub fn synthesize_with(system: &LinearSystem, weights: &CostWeights, solver: SolverTag) -> Result<GainMatrix, LqrError> {
    let method = match solver {
        SolverTag::FourierRestricted => return fourier_restricted_gain(system, weights),
        SolverTag::Schur => CareMethod::Schur,
        SolverTag::Eigenvector => CareMethod::Eigenvector,
    };
    let options = CareOptions {
        method,
        ..CareOptions::default()
    };
    let solution = care::solve_care_with(system, weights, options)?;
    Ok(gain(&solution, system, weights))
}

/// Folds a weighted-residual gain `[K_h | K_q]` onto the height alone using
/// `q̂ ≈ 2ĥ`: `K_eff = K_h + 2K_q`.
pub fn reduce_wr_gain(full: &GainMatrix) -> Result<GainMatrix, LqrError> {
    if let Some(meta) = &full.metadata {
        if meta.model != ModelKind::WeightedResidual || meta.reduced {
            return Err(LqrError::Dimension("only a full weighted-residual gain can be reduced".into()));
        }
    }
    let cols = full.cols();
    if cols % 2 != 0 {
        return Err(LqrError::Dimension(format!("gain has an odd column count {cols}")));
    }
    let n = cols / 2;
    let k = full.k.columns(0, n) + full.k.columns(n, n) * 2.0;
    let metadata = full.metadata.clone().map(|mut m| {
        m.reduced = true;
        m
    });
    Ok(GainMatrix { k, metadata })
}

/// Closed-loop matrix `A = J + ΨKΦ` and its spectral abscissa.
#[derive(Debug, Clone)]
pub struct ClosedLoop {
    pub a: DMatrix<f64>,
    pub spectral_abscissa: f64,
}

/// Assembles `A` for a gain acting on the full state, or for an `N`-column
/// gain on a `2N`-state system, in which case only `ĥ` is fed back.
pub fn closed_loop_matrix(system: &LinearSystem, gain: &GainMatrix) -> Result<DMatrix<f64>, LqrError> {
    let n = system.state_dim();
    if gain.rows() != system.input_dim() {
        return Err(LqrError::Dimension(format!(
            "gain has {} rows but the system has {} actuators",
            gain.rows(),
            system.input_dim()
        )));
    }
    let mut a = system.jacobian.clone();
    if gain.cols() == n {
        a += &system.actuation * &gain.k;
    } else if 2 * gain.cols() == n {
        let feedback = &system.actuation * &gain.k;
        let mut left = a.columns_mut(0, gain.cols());
        left += feedback;
    } else {
        return Err(LqrError::Dimension(format!(
            "gain has {} columns for a system with {n} states",
            gain.cols()
        )));
    }
    Ok(a)
}

pub fn closed_loop(system: &LinearSystem, gain: &GainMatrix) -> Result<ClosedLoop, LqrError> {
    let a = closed_loop_matrix(system, gain)?;
    let spectral_abscissa = linalg::spectral_abscissa(&a)?;
    Ok(ClosedLoop { a, spectral_abscissa })
}
