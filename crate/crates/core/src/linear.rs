//! Periodic finite-difference operators, the linearised Benney and
//! weighted-residual Jacobians, and the analytic dispersion relations used to
//! predict how many modes are unstable.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::actuators::{actuator_matrix, ActuatorConfig};
use crate::model::{FlowParameters, Grid, ModelKind};

/// Constant-coefficient stencil on a periodic grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicStencil {
    n: usize,
    dx: f64,
    taps: Vec<(isize, f64)>,
}

impl PeriodicStencil {
    fn new(n: usize, dx: f64, taps: Vec<(isize, f64)>) -> Self {
        PeriodicStencil { n, dx, taps }
    }

    pub fn taps(&self) -> &[(isize, f64)] {
        &self.taps
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n as isize;
        (0..self.n)
            .map(|i| {
                self.taps
                    .iter()
                    .map(|&(d, c)| c * v[(i as isize + d).rem_euclid(n) as usize])
                    .sum()
            })
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n as isize;
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for &(d, c) in &self.taps {
                m[(i, (i as isize + d).rem_euclid(n) as usize)] += c;
            }
        }
        m
    }

    pub fn row_sum(&self) -> f64 {
        self.taps.iter().map(|&(_, c)| c).sum()
    }

    /// Discrete Fourier symbol: `(S e^{ikx})_j = σ(k) e^{ikx_j}`.
    pub fn symbol(&self, k: f64) -> Complex64 {
        self.taps
            .iter()
            .map(|&(d, c)| c * Complex64::from_polar(1.0, k * d as f64 * self.dx))
            .sum()
    }
}

/// Second-order periodic difference operators for the first four derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffOps {
    pub d1: PeriodicStencil,
    pub d2: PeriodicStencil,
    pub d3: PeriodicStencil,
    pub d4: PeriodicStencil,
    dx: f64,
    n: usize,
}

impl DiffOps {
    /// Central 3-point `D₁`, `D₂` and central 5-point `D₃`, `D₄`.
    pub fn new(grid: &Grid) -> Self {
        let n = grid.len();
        let dx = grid.spacing();
        let (dx2, dx3, dx4) = (dx * dx, dx * dx * dx, dx * dx * dx * dx);
        DiffOps {
            d1: PeriodicStencil::new(n, dx, vec![(-1, -0.5 / dx), (1, 0.5 / dx)]),
            d2: PeriodicStencil::new(n, dx, vec![(-1, 1.0 / dx2), (0, -2.0 / dx2), (1, 1.0 / dx2)]),
            d3: PeriodicStencil::new(
                n,
                dx,
                vec![(-2, -0.5 / dx3), (-1, 1.0 / dx3), (1, -1.0 / dx3), (2, 0.5 / dx3)],
            ),
            d4: PeriodicStencil::new(
                n,
                dx,
                vec![
                    (-2, 1.0 / dx4),
                    (-1, -4.0 / dx4),
                    (0, 6.0 / dx4),
                    (1, -4.0 / dx4),
                    (2, 1.0 / dx4),
                ],
            ),
            dx,
            n,
        }
    }

    pub fn spacing(&self) -> f64 {
        self.dx
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Symbols of `D₁…D₄` at wavenumber `k`, written in cancellation-free form.
    pub fn symbols(&self, k: f64) -> [Complex64; 4] {
        let kappa = k * self.dx;
        let s = (0.5 * kappa).sin();
        let s2 = s * s;
        let dx = self.dx;
        [
            Complex64::new(0.0, kappa.sin() / dx),
            Complex64::new(-4.0 * s2 / (dx * dx), 0.0),
            Complex64::new(0.0, -4.0 * kappa.sin() * s2 / (dx * dx * dx)),
            Complex64::new(16.0 * s2 * s2 / (dx * dx * dx * dx), 0.0),
        ]
    }
}

/// Operators between the nodes `x_j` and the half points `x_{j+1/2}`.
///
/// The weighted-residual flux lives on the half points. Row `j` of
/// `average`, `forward` and `third` produces a value at `x_{j+1/2}` from
/// nodal data; row `j` of `backward` produces a nodal value at `x_j` from
/// half-point data indexed so that `q_j ≡ q(x_{j+1/2})`.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfPointOps {
    pub average: PeriodicStencil,
    pub forward: PeriodicStencil,
    pub backward: PeriodicStencil,
    pub third: PeriodicStencil,
    dx: f64,
}

impl HalfPointOps {
    pub fn new(grid: &Grid) -> Self {
        let n = grid.len();
        let dx = grid.spacing();
        let dx3 = dx * dx * dx;
        HalfPointOps {
            average: PeriodicStencil::new(n, dx, vec![(0, 0.5), (1, 0.5)]),
            forward: PeriodicStencil::new(n, dx, vec![(0, -1.0 / dx), (1, 1.0 / dx)]),
            backward: PeriodicStencil::new(n, dx, vec![(-1, -1.0 / dx), (0, 1.0 / dx)]),
            third: PeriodicStencil::new(
                n,
                dx,
                vec![(-1, -1.0 / dx3), (0, 3.0 / dx3), (1, -3.0 / dx3), (2, 1.0 / dx3)],
            ),
            dx,
        }
    }

    /// Phase-aligned symbols `[average, difference, third]`: with nodal data
    /// `e^{ikx_j}` and half-point data `e^{ikx_{j+1/2}}`, the averaging gives
    /// `cos(κ/2)`, both one-cell differences give `2i sin(κ/2)/dx` and the
    /// third difference gives the cube of that.
    pub fn symbols(&self, k: f64) -> [Complex64; 3] {
        half_point_symbols(k, self.dx)
    }
}

fn half_point_symbols(k: f64, dx: f64) -> [Complex64; 3] {
    let half = 0.5 * k * dx;
    let diff = Complex64::new(0.0, 2.0 * half.sin() / dx);
    [Complex64::new(half.cos(), 0.0), diff, diff * diff * diff]
}

/// Entry point mirroring the operator-construction step.
pub fn build_diff_ops(grid: &Grid) -> DiffOps {
    DiffOps::new(grid)
}

/// Coefficients of the linearised Benney operator
/// `-2∂ₓ + c₂∂ₓₓ - c₄∂ₓₓₓₓ`.
#[derive(Debug, Clone, Copy)]
struct BenneyCoefficients {
    c2: f64,
    c4: f64,
}

fn benney_coefficients(params: &FlowParameters) -> BenneyCoefficients {
    BenneyCoefficients {
        c2: 2.0 * params.cot_theta() / 3.0 - 8.0 * params.reynolds() / 15.0,
        c4: 1.0 / (3.0 * params.capillary()),
    }
}

/// Coefficients of the linearised flux equation,
/// `q̂_t = [α + a₁∂ₓ + a₃∂ₓₓₓ] ĥ - [β + b₁∂ₓ] q̂`.
#[derive(Debug, Clone, Copy)]
struct WrCoefficients {
    alpha: f64,
    a1: f64,
    a3: f64,
    beta: f64,
    b1: f64,
}

fn wr_coefficients(params: &FlowParameters) -> WrCoefficients {
    let re = params.reynolds();
    WrCoefficients {
        alpha: 5.0 / re,
        a1: 4.0 / 7.0 - 5.0 * params.cot_theta() / (3.0 * re),
        a3: 5.0 / (6.0 * re * params.capillary()),
        beta: 5.0 / (2.0 * re),
        b1: 34.0 / 21.0,
    }
}

/// Dense Jacobian of the discretised linearisation about the Nusselt film.
///
/// Benney: `N × N`. Weighted-residual: `2N × 2N`, ordered `[ĥ; q̂]`.
pub fn jacobian_matrix(model: ModelKind, params: &FlowParameters, grid: &Grid) -> DMatrix<f64> {
    let ops = DiffOps::new(grid);
    let n = grid.len();
    match model {
        ModelKind::Benney => {
            let c = benney_coefficients(params);
            ops.d1.to_dense() * -2.0 + ops.d2.to_dense() * c.c2 - ops.d4.to_dense() * c.c4
        }
        ModelKind::WeightedResidual => {
            let c = wr_coefficients(params);
            let half = HalfPointOps::new(grid);
            let mut j = DMatrix::zeros(2 * n, 2 * n);
            j.view_mut((0, n), (n, n)).copy_from(&(-half.backward.to_dense()));
            let lower_left = half.average.to_dense() * c.alpha
                + half.forward.to_dense() * c.a1
                + half.third.to_dense() * c.a3;
            j.view_mut((n, 0), (n, n)).copy_from(&lower_left);
            let lower_right = DMatrix::identity(n, n) * -c.beta - ops.d1.to_dense() * c.b1;
            j.view_mut((n, n), (n, n)).copy_from(&lower_right);
            j
        }
    }
}

/// Discretised linear control system `ẋ = J x + Ψ u`, fully observed.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    pub jacobian: DMatrix<f64>,
    pub actuation: DMatrix<f64>,
    pub model: Option<ModelKind>,
    pub params: Option<FlowParameters>,
    pub grid: Option<Grid>,
    pub actuators: Option<ActuatorConfig>,
}

impl LinearSystem {
    /// Jacobian and actuator matrix for a film model.
    pub fn new(
        model: ModelKind,
        params: &FlowParameters,
        grid: &Grid,
        actuators: &ActuatorConfig,
    ) -> Self {
        LinearSystem {
            jacobian: jacobian_matrix(model, params, grid),
            actuation: actuator_matrix(model, params, actuators, grid),
            model: Some(model),
            params: Some(*params),
            grid: Some(grid.clone()),
            actuators: Some(actuators.clone()),
        }
    }

    /// Generic system from raw matrices.
    pub fn from_matrices(jacobian: DMatrix<f64>, actuation: DMatrix<f64>) -> Self {
        assert_eq!(jacobian.nrows(), jacobian.ncols(), "J must be square");
        assert_eq!(jacobian.nrows(), actuation.nrows(), "Ψ rows must match J");
        LinearSystem {
            jacobian,
            actuation,
            model: None,
            params: None,
            grid: None,
            actuators: None,
        }
    }

    pub fn state_dim(&self) -> usize {
        self.jacobian.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.actuation.ncols()
    }

    /// Observation matrix `Φ`; the full state is observed.
    pub fn observation(&self) -> DMatrix<f64> {
        DMatrix::identity(self.state_dim(), self.state_dim())
    }
}

/// Linearised system without actuators (`Ψ` has zero columns).
pub fn build_jacobian(model: ModelKind, params: &FlowParameters, grid: &Grid) -> LinearSystem {
    let jacobian = jacobian_matrix(model, params, grid);
    let rows = jacobian.nrows();
    LinearSystem {
        jacobian,
        actuation: DMatrix::zeros(rows, 0),
        model: Some(model),
        params: Some(*params),
        grid: Some(grid.clone()),
        actuators: None,
    }
}

/// Growth rate of a single Fourier mode of the linearised Benney equation.
pub fn dispersion_benney(k: f64, params: &FlowParameters) -> Complex64 {
    let c = benney_coefficients(params);
    Complex64::new(-c.c2 * k * k - c.c4 * k.powi(4), -2.0 * k)
}

fn quadratic_roots(b: Complex64, c: Complex64) -> (Complex64, Complex64) {
    // λ² + bλ + c = 0, evaluated without cancellation.
    let disc = (b * b - 4.0 * c).sqrt();
    let plus = b + disc;
    let minus = b - disc;
    let big = if plus.norm() >= minus.norm() { plus } else { minus };
    if big.norm() == 0.0 {
        return (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
    }
    let r1 = -big / 2.0;
    let r2 = c / r1;
    order_pair(r1, r2)
}

fn order_pair(a: Complex64, b: Complex64) -> (Complex64, Complex64) {
    if a.re >= b.re {
        (a, b)
    } else {
        (b, a)
    }
}

/// Coefficients `(b, c)` of the weighted-residual dispersion quadratic
/// `λ² + bλ + c = 0` at wavenumber `k`.
pub fn wr_quadratic(k: f64, params: &FlowParameters) -> (Complex64, Complex64) {
    let c = wr_coefficients(params);
    let i = Complex64::i();
    let b = c.beta + c.b1 * i * k;
    let constant = c.alpha * i * k - c.a1 * k * k + c.a3 * k.powi(4);
    (b, constant)
}

/// Both roots of the weighted-residual dispersion relation, ordered by
/// decreasing real part.
pub fn dispersion_wr(k: f64, params: &FlowParameters) -> (Complex64, Complex64) {
    let (b, c) = wr_quadratic(k, params);
    quadratic_roots(b, c)
}

/// Marginal wavenumber `√(Ca(8Re/5 - 2cotθ))`, or 0 when the film is stable.
pub fn critical_wavenumber(params: &FlowParameters) -> f64 {
    let radicand =
        params.capillary() * (1.6 * params.reynolds() - 2.0 * params.cot_theta());
    if radicand > 0.0 {
        radicand.sqrt()
    } else {
        0.0
    }
}

/// Number of linearly unstable (or neutral) Fourier modes on the periodic
/// domain: the mass mode plus a `±k` pair for every `k < k₀`.
pub fn count_unstable_modes(params: &FlowParameters) -> usize {
    let x = params.aspect() * critical_wavenumber(params) / (2.0 * PI);
    let pairs = if x <= 0.0 {
        0
    } else if x.fract() == 0.0 {
        x as usize - 1
    } else {
        x.floor() as usize
    };
    1 + 2 * pairs
}

/// Eigenvalues of the discrete Jacobian for one Fourier mode, obtained from
/// the stencil symbols (exact for the circulant operators).
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSpectrum {
    pub mode: i64,
    pub wavenumber: f64,
    pub values: Vec<Complex64>,
}

/// Discrete spectrum of the model Jacobian, mode by mode, for
/// `m = -N/2+1 … N/2`.
pub fn fourier_spectrum(model: ModelKind, params: &FlowParameters, grid: &Grid) -> Vec<ModeSpectrum> {
    let ops = DiffOps::new(grid);
    let half = grid.len() as i64 / 2;
    (-half + 1..=half)
        .map(|m| {
            let k = grid.wavenumber(m);
            ModeSpectrum {
                mode: m,
                wavenumber: k,
                values: mode_eigenvalues(model, params, &ops, k),
            }
        })
        .collect()
}

/// Per-mode symbol of the Jacobian: `1×1` for Benney, `2×2` (acting on
/// `[ĥ, q̂]`) for the weighted-residual model.
pub fn mode_symbol(model: ModelKind, params: &FlowParameters, ops: &DiffOps, k: f64) -> Vec<Vec<Complex64>> {
    let [s1, s2, _, s4] = ops.symbols(k);
    match model {
        ModelKind::Benney => {
            let c = benney_coefficients(params);
            vec![vec![-2.0 * s1 + c.c2 * s2 - c.c4 * s4]]
        }
        ModelKind::WeightedResidual => {
            let c = wr_coefficients(params);
            let [avg, diff, third] = half_point_symbols(k, ops.dx);
            vec![
                vec![Complex64::new(0.0, 0.0), -diff],
                vec![c.alpha * avg + c.a1 * diff + c.a3 * third, -c.beta - c.b1 * s1],
            ]
        }
    }
}

/// Eigenvalues of a `1×1` or `2×2` symbol, ordered by decreasing real part.
pub fn symbol_eigenvalues(m: &[Vec<Complex64>]) -> Vec<Complex64> {
    if m.len() == 1 {
        return vec![m[0][0]];
    }
    let trace = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let (a, b) = quadratic_roots(-trace, det);
    vec![a, b]
}

/// Eigenvalues of the per-mode symbol matrix at wavenumber `k`.
pub fn mode_eigenvalues(model: ModelKind, params: &FlowParameters, ops: &DiffOps, k: f64) -> Vec<Complex64> {
    symbol_eigenvalues(&mode_symbol(model, params, ops, k))
}

/// Positions at which each state field is stored: nodes for `h`, half
/// points for the weighted-residual `q`.
pub fn field_coordinates(model: ModelKind, grid: &Grid) -> Vec<Vec<f64>> {
    let nodes = grid.coordinates();
    match model {
        ModelKind::Benney => vec![nodes],
        ModelKind::WeightedResidual => {
            let half = nodes.iter().map(|x| x + 0.5 * grid.spacing()).collect();
            vec![nodes, half]
        }
    }
}

/// `max Re λ` over a set of eigenvalues.
pub fn max_real_part(values: &[Complex64]) -> f64 {
    values.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}
