//! Periodic blowing/suction actuators: the smooth bump profile, its
//! normalisation, forcing assembly and the linearised actuator matrices.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::linear::DiffOps;
use crate::model::{FlowParameters, Grid, ModelError, ModelKind};

pub const DEFAULT_ACTUATOR_COUNT: usize = 5;
pub const DEFAULT_WIDTH: f64 = 0.1;

/// `M` evenly spaced actuators of width `ω` on a periodic domain.
#[derive(Debug, Clone, PartialEq)]
pub struct ActuatorConfig {
    count: usize,
    width: f64,
    aspect: f64,
    positions: Vec<f64>,
    amplitude_norm: f64,
}

impl ActuatorConfig {
    /// Places `count` actuators at `x_i = (i - 1/2) L / M` and normalises the
    /// bump so that its trapezoid sum on `grid` equals one.
    pub fn new(count: usize, width: f64, grid: &Grid) -> Result<Self, ModelError> {
        if count == 0 {
            return Err(ModelError::InvalidParameter {
                name: "actuators.count",
                reason: "at least one actuator is required".into(),
            });
        }
        if !(width.is_finite() && width > 0.0) {
            return Err(ModelError::InvalidParameter {
                name: "actuators.width",
                reason: format!("must be positive, got {width}"),
            });
        }
        let aspect = grid.aspect();
        let spacing = aspect / count as f64;
        let positions = (0..count).map(|i| (i as f64 + 0.5) * spacing).collect();
        let raw: f64 = (0..grid.len())
            .map(|j| unnormalised_bump(grid.coordinate(j), width, aspect))
            .sum::<f64>()
            * grid.spacing();
        Ok(ActuatorConfig {
            count,
            width,
            aspect,
            positions,
            amplitude_norm: 1.0 / raw,
        })
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn aspect(&self) -> f64 {
        self.aspect
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    /// Normalisation constant `A`.
    pub fn amplitude_norm(&self) -> f64 {
        self.amplitude_norm
    }

    /// `N × M` matrix whose column `i` samples `d(x - x_i)` on the grid.
    /// Actuators sitting on a grid point use integer offsets, so their
    /// columns are exact cyclic shifts of each other.
    pub fn sampled_bumps(&self, grid: &Grid) -> DMatrix<f64> {
        let n = grid.len();
        let dx = grid.spacing();
        let offsets: Vec<Option<usize>> = self
            .positions
            .iter()
            .map(|&x| {
                let s = x / dx;
                ((s - s.round()).abs() < 1e-9).then(|| s.round() as usize % n)
            })
            .collect();
        DMatrix::from_fn(n, self.count, |j, i| match offsets[i] {
            Some(o) => bump(grid.coordinate((j + n - o) % n), self),
            None => bump(grid.coordinate(j) - self.positions[i], self),
        })
    }
}

#[inline]
fn unnormalised_bump(x: f64, width: f64, aspect: f64) -> f64 {
    (((2.0 * PI * x / aspect).cos() - 1.0) / (width * width)).exp()
}

/// `A exp[(cos(2πx/L) - 1)/ω²]`, periodic with period `L`.
pub fn bump(x: f64, config: &ActuatorConfig) -> f64 {
    config.amplitude_norm * unnormalised_bump(x, config.width, config.aspect)
}

/// Individual actuator amplitudes `u_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlAmplitudes(pub DVector<f64>);

impl ControlAmplitudes {
    pub fn zeros(count: usize) -> Self {
        ControlAmplitudes(DVector::zeros(count))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `f_j = Σ_i u_i d(x_j - x_i)`.
pub fn assemble_forcing(u: &ControlAmplitudes, config: &ActuatorConfig, grid: &Grid) -> DVector<f64> {
    assert_eq!(u.len(), config.count(), "amplitude count must match actuators");
    config.sampled_bumps(grid) * &u.0
}

/// Linearised actuator matrix `Ψ`.
///
/// Benney: column `i` is `d_i + (2Re/3) D₁ d_i`. Weighted-residual: the
/// stacked `[d_i; d_i / 3]`, with the lower block averaged onto the half
/// points where the flux is stored.
pub fn actuator_matrix(
    model: ModelKind,
    params: &FlowParameters,
    config: &ActuatorConfig,
    grid: &Grid,
) -> DMatrix<f64> {
    let bumps = config.sampled_bumps(grid);
    let n = grid.len();
    match model {
        ModelKind::Benney => {
            let ops = DiffOps::new(grid);
            let mut psi = bumps.clone();
            let coeff = 2.0 * params.reynolds() / 3.0;
            for (mut col, src) in psi.column_iter_mut().zip(bumps.column_iter()) {
                let deriv = ops.d1.apply(src.as_slice());
                for (c, d) in col.iter_mut().zip(deriv) {
                    *c += coeff * d;
                }
            }
            psi
        }
        ModelKind::WeightedResidual => {
            let mut psi = DMatrix::zeros(2 * n, config.count());
            psi.rows_mut(0, n).copy_from(&bumps);
            for (c, col) in bumps.column_iter().enumerate() {
                for j in 0..n {
                    psi[(n + j, c)] = (col[j] + col[(j + 1) % n]) / 6.0;
                }
            }
            psi
        }
    }
}
