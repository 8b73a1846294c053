//! Dimensionless flow parameters, fluid presets, the periodic grid and the
//! interface state shared by every other module.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use thiserror::Error;

/// Inclination used throughout unless configured otherwise.
pub const DEFAULT_THETA: f64 = PI / 3.0;
/// Domain length in units of the Nusselt film height.
pub const DEFAULT_ASPECT: f64 = 30.0;
pub const DEFAULT_GRAVITY: f64 = 9.807;
/// Nusselt film height shared by the fluid presets (m).
pub const PRESET_FILM_HEIGHT: f64 = 175e-6;
pub const DEFAULT_GRID_POINTS: usize = 256;

/// Flux of the flat film, `h³/3 · 2` at `h = 1`.
pub const NUSSELT_FLUX: f64 = 2.0 / 3.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("unknown fluid preset `{0}`")]
    UnknownPreset(String),
    #[error("unknown model `{0}` (expected `benney` or `wr`)")]
    UnknownModel(String),
    #[error("state length {found} does not match grid size {expected}")]
    LengthMismatch { expected: usize, found: usize },
}

fn invalid(name: &'static str, reason: impl Into<String>) -> ModelError {
    ModelError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

/// Which long-wave model closes the mass-conservation equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelKind {
    /// Flux slaved to the interface height.
    Benney,
    /// First-order weighted-residual model with its own flux equation.
    WeightedResidual,
}

impl ModelKind {
    /// Number of state fields per grid point.
    pub fn fields(self) -> usize {
        match self {
            ModelKind::Benney => 1,
            ModelKind::WeightedResidual => 2,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            ModelKind::Benney => "benney",
            ModelKind::WeightedResidual => "wr",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for ModelKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "benney" => Ok(ModelKind::Benney),
            "wr" | "weighted-residual" | "weighted_residual" | "weightedresidual" => {
                Ok(ModelKind::WeightedResidual)
            }
            other => Err(ModelError::UnknownModel(other.to_string())),
        }
    }
}

/// Dimensionless numbers describing one film configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowParameters {
    reynolds: f64,
    capillary: f64,
    theta: f64,
    aspect: f64,
}

impl FlowParameters {
    pub fn new(reynolds: f64, capillary: f64, theta: f64, aspect: f64) -> Result<Self, ModelError> {
        if !(reynolds.is_finite() && reynolds > 0.0) {
            return Err(invalid("reynolds", format!("must be positive, got {reynolds}")));
        }
        if !(capillary.is_finite() && capillary > 0.0) {
            return Err(invalid("capillary", format!("must be positive, got {capillary}")));
        }
        if !(theta.is_finite() && theta > 0.0 && theta < PI / 2.0) {
            return Err(invalid("theta", format!("must lie in (0, pi/2), got {theta}")));
        }
        if !(aspect.is_finite() && aspect > 0.0) {
            return Err(invalid("aspect", format!("must be positive, got {aspect}")));
        }
        Ok(FlowParameters {
            reynolds,
            capillary,
            theta,
            aspect,
        })
    }

    /// `Re`, `Ca` with the default inclination and domain length.
    pub fn with_defaults(reynolds: f64, capillary: f64) -> Result<Self, ModelError> {
        Self::new(reynolds, capillary, DEFAULT_THETA, DEFAULT_ASPECT)
    }

    pub fn reynolds(&self) -> f64 {
        self.reynolds
    }

    pub fn capillary(&self) -> f64 {
        self.capillary
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn aspect(&self) -> f64 {
        self.aspect
    }

    pub fn cot_theta(&self) -> f64 {
        1.0 / self.theta.tan()
    }
}

impl Default for FlowParameters {
    fn default() -> Self {
        FlowParameters {
            reynolds: 5.0,
            capillary: 0.05,
            theta: DEFAULT_THETA,
            aspect: DEFAULT_ASPECT,
        }
    }
}

/// Physical properties of a liquid film in SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalFluid {
    pub density: f64,
    pub viscosity: f64,
    pub surface_tension: f64,
    pub film_height: f64,
    pub gravity: f64,
    pub theta: f64,
}

impl PhysicalFluid {
    pub fn validate(&self) -> Result<(), ModelError> {
        let checks: [(&'static str, f64); 5] = [
            ("density", self.density),
            ("viscosity", self.viscosity),
            ("surface_tension", self.surface_tension),
            ("film_height", self.film_height),
            ("gravity", self.gravity),
        ];
        for (name, value) in checks {
            if !(value.is_finite() && value > 0.0) {
                return Err(invalid(name, format!("must be positive, got {value}")));
            }
        }
        if !(self.theta > 0.0 && self.theta < PI / 2.0) {
            return Err(invalid("theta", format!("must lie in (0, pi/2), got {}", self.theta)));
        }
        Ok(())
    }

    /// Surface velocity of the Nusselt film, `ρ g h_s² sinθ / (2μ)`.
    pub fn surface_velocity(&self) -> f64 {
        self.density * self.gravity * self.film_height.powi(2) * self.theta.sin()
            / (2.0 * self.viscosity)
    }

    /// Looks up one of the shipped presets (`water`, `ethanol`, `pentane`,
    /// `nitrogen`) at the shared film height and default inclination.
    pub fn preset(name: &str) -> Result<Self, ModelError> {
        let (density, viscosity, surface_tension) = match name.trim().to_ascii_lowercase().as_str()
        {
            "water" => (999.8, 8.91e-4, 0.072),
            "ethanol" => (789.5, 1.06e-3, 0.022),
            "pentane" => (626.0, 2.24e-4, 0.018),
            "nitrogen" => (3.44, 6.88e-6, 0.0085),
            _ => return Err(ModelError::UnknownPreset(name.to_string())),
        };
        Ok(PhysicalFluid {
            density,
            viscosity,
            surface_tension,
            film_height: PRESET_FILM_HEIGHT,
            gravity: DEFAULT_GRAVITY,
            theta: DEFAULT_THETA,
        })
    }

    pub const PRESETS: [&'static str; 4] = ["water", "ethanol", "pentane", "nitrogen"];
}

/// Converts a physical fluid into dimensionless numbers on a domain of
/// length `aspect` film heights.
pub fn from_physical(fluid: &PhysicalFluid, aspect: f64) -> Result<FlowParameters, ModelError> {
    fluid.validate()?;
    let velocity = fluid.surface_velocity();
    let reynolds = fluid.density * velocity * fluid.film_height / fluid.viscosity;
    let capillary = fluid.viscosity * velocity / fluid.surface_tension;
    FlowParameters::new(reynolds, capillary, fluid.theta, aspect)
}

/// Uniform periodic grid on `[0, L)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    n: usize,
    aspect: f64,
    spacing: f64,
}

impl Grid {
    pub fn new(n: usize, aspect: f64) -> Result<Self, ModelError> {
        if n < 8 || n % 2 != 0 {
            return Err(invalid("grid.points", format!("must be even and at least 8, got {n}")));
        }
        if !(aspect.is_finite() && aspect > 0.0) {
            return Err(invalid("aspect", format!("must be positive, got {aspect}")));
        }
        Ok(Grid {
            n,
            aspect,
            spacing: aspect / n as f64,
        })
    }

    pub fn for_params(n: usize, params: &FlowParameters) -> Result<Self, ModelError> {
        Self::new(n, params.aspect())
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn aspect(&self) -> f64 {
        self.aspect
    }

    pub fn coordinate(&self, i: usize) -> f64 {
        i as f64 * self.spacing
    }

    pub fn coordinates(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.coordinate(i)).collect()
    }

    /// Index `i + offset` wrapped onto the periodic grid.
    #[inline]
    pub fn wrap(&self, i: usize, offset: isize) -> usize {
        (i as isize + offset).rem_euclid(self.n as isize) as usize
    }

    /// Wavenumber of Fourier mode `m` on this domain.
    pub fn wavenumber(&self, m: i64) -> f64 {
        2.0 * PI * m as f64 / self.aspect
    }
}

/// Interface height (and flux for the weighted-residual model) at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceState {
    pub h: DVector<f64>,
    pub q: Option<DVector<f64>>,
    pub time: f64,
}

impl InterfaceState {
    pub fn new(h: DVector<f64>, q: Option<DVector<f64>>, time: f64) -> Result<Self, ModelError> {
        if let Some(q) = &q {
            if q.len() != h.len() {
                return Err(ModelError::LengthMismatch {
                    expected: h.len(),
                    found: q.len(),
                });
            }
        }
        Ok(InterfaceState { h, q, time })
    }

    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }

    /// `h - 1`.
    pub fn deviation(&self) -> DVector<f64> {
        self.h.add_scalar(-1.0)
    }

    /// `q - 2/3`, if a flux is carried.
    pub fn flux_deviation(&self) -> Option<DVector<f64>> {
        self.q.as_ref().map(|q| q.add_scalar(-NUSSELT_FLUX))
    }

    pub fn max_height(&self) -> f64 {
        self.h.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_height(&self) -> f64 {
        self.h.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn mean_height(&self) -> f64 {
        self.h.mean()
    }

    /// True when every height is positive and finite.
    pub fn is_physical(&self) -> bool {
        self.h.iter().all(|&v| v.is_finite() && v > 0.0)
    }

    /// Same state with the clock reset.
    pub fn relabelled(mut self, time: f64) -> Self {
        self.time = time;
        self
    }
}

/// The flat Nusselt film: `h ≡ 1`, `q ≡ 2/3` (flux only for the
/// weighted-residual model), `t = 0`.
pub fn nusselt_state(grid: &Grid, model: ModelKind) -> InterfaceState {
    let h = DVector::from_element(grid.len(), 1.0);
    let q = match model {
        ModelKind::Benney => None,
        ModelKind::WeightedResidual => Some(DVector::from_element(grid.len(), NUSSELT_FLUX)),
    };
    InterfaceState { h, q, time: 0.0 }
}

/// Discrete L2 norm of `h - 1`: `(Σ (h_i - 1)² dx)^{1/2}`.
pub fn deviation_norm(state: &InterfaceState, grid: &Grid) -> f64 {
    deviation_norm_of(state.h.as_slice(), grid.spacing())
}

pub(crate) fn deviation_norm_of(h: &[f64], dx: f64) -> f64 {
    (h.iter().map(|&v| (v - 1.0) * (v - 1.0)).sum::<f64>() * dx).sqrt()
}
