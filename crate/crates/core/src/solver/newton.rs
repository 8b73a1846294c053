//! Newton iteration with an analytic Jacobian.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::banded::PeriodicBanded;
use crate::linalg::{LinalgError, Lu};

/// A Jacobian that can solve `J δ = r` in place.
pub trait NewtonMatrix {
    fn solve_in_place(&self, rhs: &mut [f64]) -> Result<(), LinalgError>;
}

impl NewtonMatrix for PeriodicBanded {
    fn solve_in_place(&self, rhs: &mut [f64]) -> Result<(), LinalgError> {
        PeriodicBanded::solve_in_place(self, rhs)
    }
}

impl NewtonMatrix for DMatrix<f64> {
    fn solve_in_place(&self, rhs: &mut [f64]) -> Result<(), LinalgError> {
        Lu::new(self)?.solve_vec_in_place(rhs)
    }
}

impl NewtonMatrix for f64 {
    fn solve_in_place(&self, rhs: &mut [f64]) -> Result<(), LinalgError> {
        if *self == 0.0 {
            return Err(LinalgError::Singular);
        }
        rhs[0] /= *self;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NewtonError {
    #[error("Newton iteration diverged after {iterations} iterations (residual {residual:.3e})")]
    Diverged { iterations: usize, residual: f64 },
    #[error("Newton iteration did not converge in {iterations} iterations (residual {residual:.3e})")]
    MaxIterations { iterations: usize, residual: f64 },
    #[error("Newton linear solve failed: {0}")]
    Linear(#[from] LinalgError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonSolution {
    pub x: Vec<f64>,
    /// Number of Jacobian solves performed.
    pub iterations: usize,
    /// Max-norm of the final residual.
    pub residual: f64,
    /// Max-norm residual before each update (useful for convergence checks).
    pub history: Vec<f64>,
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| if x.is_nan() { f64::NAN } else { m.max(x.abs()) })
}

/// Relative update size below which the iterate is considered converged even
/// if the residual sits above `tol`: fine grids put the round-off floor of
/// high-order difference terms near `1e-10`.
pub const STEP_FLOOR: f64 = 1e-12;

/// Solves `R(x) = 0` from `guess` until `‖R‖∞ <= tol`, or until the Newton
/// update drops below `STEP_FLOOR·(1 + ‖x‖∞)`.
///
/// At least one update is applied unless the guess is exact, so a guess that
/// already meets `tol` is still polished. The iteration is abandoned once the
/// residual has grown on three consecutive iterations, or turns non-finite.
pub fn newton_solve<M, R, J>(
    mut residual: R,
    mut jacobian: J,
    guess: Vec<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<NewtonSolution, NewtonError>
where
    M: NewtonMatrix,
    R: FnMut(&[f64], &mut [f64]),
    J: FnMut(&[f64]) -> M,
{
    let mut x = guess;
    let mut r = vec![0.0; x.len()];
    let mut history = Vec::new();
    let mut growth = 0;
    let mut iterations = 0;
    loop {
        residual(&x, &mut r);
        let norm = max_norm(&r);
        if !norm.is_finite() {
            return Err(NewtonError::Diverged { iterations, residual: norm });
        }
        if let Some(&prev) = history.last() {
            if norm > prev {
                growth += 1;
                if growth >= 3 {
                    return Err(NewtonError::Diverged { iterations, residual: norm });
                }
            } else {
                growth = 0;
            }
        }
        history.push(norm);
        if norm <= tol && (iterations > 0 || norm == 0.0) {
            return Ok(NewtonSolution {
                x,
                iterations,
                residual: norm,
                history,
            });
        }
        if iterations >= max_iter {
            return Err(NewtonError::MaxIterations { iterations, residual: norm });
        }
        let jac = jacobian(&x);
        for v in r.iter_mut() {
            *v = -*v;
        }
        jac.solve_in_place(&mut r)?;
        for (xi, di) in x.iter_mut().zip(&r) {
            *xi += di;
        }
        iterations += 1;
        if max_norm(&r) <= STEP_FLOOR * (1.0 + max_norm(&x)) {
            residual(&x, &mut r);
            let norm = max_norm(&r);
            history.push(norm);
            if norm.is_finite() && norm <= 1e3 * tol {
                return Ok(NewtonSolution {
                    x,
                    iterations,
                    residual: norm,
                    history,
                });
            }
            history.pop();
        }
    }
}
