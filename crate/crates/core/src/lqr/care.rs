//! Continuous algebraic Riccati equation
//! `JᵀP + PJ + U - PGP = 0` with `G = ΨV⁻¹Ψᵀ`.

use nalgebra::DMatrix;

use super::{check_dims, stabilisable, CostWeights, LqrError};
use crate::linalg::{self, Lu, Selection};
use crate::linear::LinearSystem;

/// Route to the stable invariant subspace of the Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CareMethod {
    /// Ordered real Schur form.
    Schur,
    /// Eigenvectors of the stable eigenvalues.
    Eigenvector,
}

impl CareMethod {
    fn alternate(self) -> Self {
        match self {
            CareMethod::Schur => CareMethod::Eigenvector,
            CareMethod::Eigenvector => CareMethod::Schur,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CareOptions {
    pub method: CareMethod,
    /// Newton correction steps allowed after the subspace solve.
    pub max_refinements: usize,
}

impl Default for CareOptions {
    fn default() -> Self {
        CareOptions {
            method: CareMethod::Schur,
            max_refinements: 6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CareSolution {
    pub p: DMatrix<f64>,
    pub method: CareMethod,
    /// Frobenius norm of the Riccati residual.
    pub residual: f64,
    pub refinements: usize,
}

impl CareSolution {
    /// Acceptance threshold `1e-8 (1 + ‖P‖_F)`.
    pub fn tolerance(&self) -> f64 {
        residual_tolerance(&self.p)
    }
}

fn residual_tolerance(p: &DMatrix<f64>) -> f64 {
    1e-8 * (1.0 + p.norm())
}

/// `JᵀP + PJ + U - PGP`.
pub fn care_residual(j: &DMatrix<f64>, g: &DMatrix<f64>, u: &DMatrix<f64>, p: &DMatrix<f64>) -> DMatrix<f64> {
    let pj = p * j;
    let mut r = &pj + pj.transpose() + u;
    r -= p * g * p;
    r
}

fn symmetrise(p: &mut DMatrix<f64>) {
    let n = p.nrows();
    for i in 0..n {
        for k in (i + 1)..n {
            let v = 0.5 * (p[(i, k)] + p[(k, i)]);
            p[(i, k)] = v;
            p[(k, i)] = v;
        }
    }
}

fn hamiltonian(j: &DMatrix<f64>, g: &DMatrix<f64>, u: &DMatrix<f64>) -> DMatrix<f64> {
    let n = j.nrows();
    let mut h = DMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(j);
    h.view_mut((0, n), (n, n)).copy_from(&(-g));
    h.view_mut((n, 0), (n, n)).copy_from(&(-u));
    h.view_mut((n, n), (n, n)).copy_from(&(-j.transpose()));
    h
}

/// `P = X₂X₁⁻¹` from a basis of the stable subspace.
fn riccati_from_basis(x1: &DMatrix<f64>, x2: &DMatrix<f64>) -> Result<DMatrix<f64>, LqrError> {
    let lu = Lu::new(x1).map_err(|_| LqrError::IllConditioned("stable basis X1 is singular".into()))?;
    let rcond = lu.rcond();
    if rcond < 1e-13 {
        return Err(LqrError::IllConditioned(format!("stable basis X1 has rcond {rcond:.2e}")));
    }
    let mut pt = x2.transpose();
    lu.solve_in_place(&mut pt, true)?;
    let mut p = pt.transpose();
    symmetrise(&mut p);
    Ok(p)
}

fn axis_tolerance(h: &DMatrix<f64>) -> f64 {
    1e-12 * linalg::one_norm(h).max(1.0)
}

fn schur_solve(j: &DMatrix<f64>, g: &DMatrix<f64>, u: &DMatrix<f64>) -> Result<DMatrix<f64>, LqrError> {
    let n = j.nrows();
    let h = hamiltonian(j, g, u);
    let schur = linalg::ordered_schur(&h, Selection::Stable)?;
    let tol = axis_tolerance(&h);
    if let Some(z) = schur.values.iter().find(|z| z.re.abs() <= tol) {
        return Err(LqrError::NonStabilisable(format!(
            "Hamiltonian eigenvalue {z} lies on the imaginary axis"
        )));
    }
    if schur.selected != n {
        return Err(LqrError::NonStabilisable(format!(
            "stable subspace has dimension {} instead of {n}",
            schur.selected
        )));
    }
    let x1 = schur.z.view((0, 0), (n, n)).into_owned();
    let x2 = schur.z.view((n, 0), (n, n)).into_owned();
    riccati_from_basis(&x1, &x2)
}

fn eigenvector_solve(j: &DMatrix<f64>, g: &DMatrix<f64>, u: &DMatrix<f64>) -> Result<DMatrix<f64>, LqrError> {
    let n = j.nrows();
    let h = hamiltonian(j, g, u);
    let e = linalg::eig(&h, false, true)?;
    let vectors = e.right.expect("requested right eigenvectors");
    let tol = axis_tolerance(&h);
    if let Some(z) = e.values.iter().find(|z| z.re.abs() <= tol) {
        return Err(LqrError::NonStabilisable(format!(
            "Hamiltonian eigenvalue {z} lies on the imaginary axis"
        )));
    }
    let mut basis: Vec<nalgebra::DVector<f64>> = Vec::with_capacity(n);
    for (idx, z) in e.values.iter().enumerate() {
        if z.re >= 0.0 || z.im < 0.0 {
            continue;
        }
        let col = vectors.column(idx);
        let re = col.map(|c| c.re);
        basis.push(&re / re.norm());
        if z.im > 0.0 {
            let im = col.map(|c| c.im);
            basis.push(&im / im.norm());
        }
    }
    if basis.len() != n {
        return Err(LqrError::NonStabilisable(format!(
            "stable eigenspace has dimension {} instead of {n}",
            basis.len()
        )));
    }
    let x = DMatrix::from_columns(&basis);
    let x1 = x.view((0, 0), (n, n)).into_owned();
    let x2 = x.view((n, 0), (n, n)).into_owned();
    riccati_from_basis(&x1, &x2)
}

/// Newton correction: solve `(J - GP)ᵀX + X(J - GP) = -R(P)` and update.
fn refine(
    j: &DMatrix<f64>,
    g: &DMatrix<f64>,
    u: &DMatrix<f64>,
    mut p: DMatrix<f64>,
    max_steps: usize,
) -> (DMatrix<f64>, f64, usize) {
    let mut r = care_residual(j, g, u, &p);
    let mut rnorm = r.norm();
    let mut steps = 0;
    while steps < max_steps && rnorm > 1e-4 * residual_tolerance(&p) {
        let ak = j - g * &p;
        let x = match linalg::solve_lyapunov(&ak, &(-&r)) {
            Ok(x) => x,
            Err(_) => break,
        };
        let mut candidate = &p + x;
        symmetrise(&mut candidate);
        let rc = care_residual(j, g, u, &candidate);
        let rc_norm = rc.norm();
        if !(rc_norm < rnorm) {
            break;
        }
        p = candidate;
        r = rc;
        rnorm = rc_norm;
        steps += 1;
    }
    (p, rnorm, steps)
}

fn check_psd(p: &DMatrix<f64>) -> Result<(), LqrError> {
    if p.nrows() == 0 {
        return Ok(());
    }
    let ev = linalg::symmetric_eigenvalues(p)?;
    let max_abs = ev.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min = ev.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -1e-8 * max_abs {
        return Err(LqrError::IllConditioned(format!(
            "Riccati solution is indefinite (min eigenvalue {min:.3e}, norm {max_abs:.3e})"
        )));
    }
    Ok(())
}

fn attempt(
    j: &DMatrix<f64>,
    g: &DMatrix<f64>,
    u: &DMatrix<f64>,
    method: CareMethod,
    max_refinements: usize,
) -> Result<CareSolution, LqrError> {
    let p0 = match method {
        CareMethod::Schur => schur_solve(j, g, u)?,
        CareMethod::Eigenvector => eigenvector_solve(j, g, u)?,
    };
    let (p, residual, refinements) = refine(j, g, u, p0, max_refinements);
    if !(residual <= residual_tolerance(&p)) {
        return Err(LqrError::IllConditioned(format!(
            "residual {residual:.3e} exceeds {:.3e}",
            residual_tolerance(&p)
        )));
    }
    check_psd(&p)?;
    Ok(CareSolution {
        p,
        method,
        residual,
        refinements,
    })
}

/// Solves the Riccati equation for raw matrices. An ill-conditioned basis
/// triggers one retry with the alternate subspace method; loss of
/// stabilisability does not.
pub fn solve_care_matrices(
    j: &DMatrix<f64>,
    g: &DMatrix<f64>,
    u: &DMatrix<f64>,
    options: CareOptions,
) -> Result<CareSolution, LqrError> {
    let n = j.nrows();
    if j.ncols() != n || g.shape() != (n, n) || u.shape() != (n, n) {
        return Err(LqrError::Dimension("J, G and U must be square and of equal size".into()));
    }
    if n == 0 {
        return Ok(CareSolution {
            p: DMatrix::zeros(0, 0),
            method: options.method,
            residual: 0.0,
            refinements: 0,
        });
    }
    let first = match attempt(j, g, u, options.method, options.max_refinements) {
        Err(LqrError::IllConditioned(msg)) => msg,
        Err(LqrError::Linalg(e)) => e.to_string(),
        other => return other,
    };
    match attempt(j, g, u, options.method.alternate(), options.max_refinements) {
        Err(LqrError::IllConditioned(second)) => {
            // A singular stable basis usually means an unreachable unstable
            // mode; range(G) = range(Ψ), so the Hautus test can use G.
            let report = stabilisable(&LinearSystem::from_matrices(j.clone(), g.clone()))?;
            if report.stabilisable {
                Err(LqrError::IllConditioned(format!("{first}; alternate method: {second}")))
            } else {
                Err(LqrError::NonStabilisable(format!(
                    "unstable eigenvalue(s) {:?} cannot be reached by the actuators",
                    report.unreachable
                )))
            }
        }
        other => other,
    }
}

/// Riccati solution for a linearised system with diagonal weights.
pub fn solve_care(system: &LinearSystem, weights: &CostWeights) -> Result<CareSolution, LqrError> {
    solve_care_with(system, weights, CareOptions::default())
}

pub fn solve_care_with(
    system: &LinearSystem,
    weights: &CostWeights,
    options: CareOptions,
) -> Result<CareSolution, LqrError> {
    check_dims(system, weights)?;
    let psi = &system.actuation;
    let g = psi * psi.transpose() / weights.v_diag();
    solve_care_matrices(&system.jacobian, &g, &weights.u_matrix(), options)
}
