//! Gain synthesis restricted to the unstable Fourier modes.
//!
//! The gain is built as `K = K_u Wᵀ`, where the columns of `W` span the left
//! eigenvectors of the unstable eigenvalues. Every right eigenvector of a
//! stable eigenvalue is orthogonal to `W`, so `K` annihilates it and those
//! eigenvalues of `J + ΨK` are exactly those of `J`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{
    care::{solve_care_matrices, CareOptions},
    check_dims, metadata_for, CostWeights, GainMatrix, LqrError, SolverTag, RANK_TOLERANCE,
};
use crate::linalg::{self, Selection};
use crate::linear::{field_coordinates, mode_symbol, symbol_eigenvalues, DiffOps, LinearSystem};
use crate::model::{FlowParameters, Grid, ModelKind};

/// Real-part threshold above which a mode counts as unstable (the neutral
/// mass mode is included).
const UNSTABLE_TOL: f64 = 1e-10;

/// Left eigenvector `w` with `wᵀ(M - λI) = 0` of a 1×1 or 2×2 symbol.
fn left_null(m: &[Vec<Complex64>], lambda: Complex64) -> Vec<Complex64> {
    if m.len() == 1 {
        return vec![Complex64::new(1.0, 0.0)];
    }
    let a00 = m[0][0] - lambda;
    let a01 = m[0][1];
    let a10 = m[1][0];
    let a11 = m[1][1] - lambda;
    // w must be orthogonal (bilinearly) to both columns; use the larger one.
    if a00.norm() + a10.norm() >= a01.norm() + a11.norm() {
        vec![a10, -a00]
    } else {
        vec![a11, -a01]
    }
}

/// Orthonormal real basis of the left eigenvectors belonging to the
/// unstable (and neutral) Fourier modes of a film model's Jacobian.
pub fn unstable_fourier_basis(model: ModelKind, params: &FlowParameters, grid: &Grid) -> DMatrix<f64> {
    let ops = DiffOps::new(grid);
    let n = grid.len();
    let fields = model.fields();
    let coords = field_coordinates(model, grid);
    let mut columns: Vec<DVector<f64>> = Vec::new();
    for m in 0..=(n as i64 / 2) {
        let k = grid.wavenumber(m);
        let symbol = mode_symbol(model, params, &ops, k);
        for lambda in symbol_eigenvalues(&symbol) {
            if lambda.re < -UNSTABLE_TOL {
                continue;
            }
            let w = left_null(&symbol, lambda);
            let mut re = DVector::zeros(fields * n);
            let mut im = DVector::zeros(fields * n);
            for (f, wf) in w.iter().enumerate() {
                for (j, &x) in coords[f].iter().enumerate() {
                    let v = wf * Complex64::from_polar(1.0, -k * x);
                    re[f * n + j] = v.re;
                    im[f * n + j] = v.im;
                }
            }
            let self_conjugate = m == 0 || 2 * m == n as i64;
            columns.push(re);
            if !self_conjugate {
                columns.push(im);
            }
        }
    }
    if columns.is_empty() {
        return DMatrix::zeros(fields * n, 0);
    }
    linalg::orthonormal_columns(&DMatrix::from_columns(&columns))
}

/// Orthonormal basis of the left invariant subspace of `J` belonging to
/// eigenvalues with `Re λ >= -ε`, from an ordered Schur form of `Jᵀ`.
pub fn left_unstable_basis(j: &DMatrix<f64>) -> Result<DMatrix<f64>, LqrError> {
    let scale = linalg::one_norm(j).max(1.0);
    let schur = linalg::ordered_schur(&j.transpose(), Selection::RealPartAtLeast(-UNSTABLE_TOL * scale))?;
    Ok(schur.z.columns(0, schur.selected).into_owned())
}

/// LQR gain designed on the unstable block only and lifted back with zero
/// action on the stable modes.
///
/// Systems built from a film model use the exact Fourier basis; generic
/// systems fall back to the Schur basis of `Jᵀ`.
pub fn fourier_restricted_gain(system: &LinearSystem, weights: &CostWeights) -> Result<GainMatrix, LqrError> {
    check_dims(system, weights)?;
    let basis = match (system.model, system.params, &system.grid) {
        (Some(model), Some(params), Some(grid)) => unstable_fourier_basis(model, &params, grid),
        _ => left_unstable_basis(&system.jacobian)?,
    };
    let n = system.state_dim();
    let m = system.input_dim();
    let nu = basis.ncols();
    let metadata = metadata_for(system, weights, SolverTag::FourierRestricted);
    if nu == 0 {
        return Ok(GainMatrix {
            k: DMatrix::zeros(m, n),
            metadata,
        });
    }
    let psi_u = basis.transpose() * &system.actuation;
    let sv = linalg::singular_values(&psi_u)?;
    let rank = linalg::numerical_rank(&sv, RANK_TOLERANCE);
    if rank < nu {
        return Err(LqrError::InsufficientActuators {
            required: nu,
            rank,
            actuators: m,
        });
    }
    let j_u = basis.transpose() * &system.jacobian * &basis;
    let g_u = &psi_u * psi_u.transpose() / weights.v_diag();
    let u_u = DMatrix::identity(nu, nu) * weights.u_diag();
    let sol = solve_care_matrices(&j_u, &g_u, &u_u, CareOptions::default())?;
    let k_u = psi_u.transpose() * &sol.p * (-1.0 / weights.v_diag());
    Ok(GainMatrix {
        k: k_u * basis.transpose(),
        metadata,
    })
}
