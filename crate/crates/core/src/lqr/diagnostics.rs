//! Controllability and stabilisability checks.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{LqrError, RANK_TOLERANCE};
use crate::linalg;
use crate::linear::LinearSystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KalmanReport {
    pub rank: usize,
    pub dimension: usize,
    pub controllable: bool,
}

/// Numerical rank of `[Ψ, JΨ, …, J^{n-1}Ψ]`.
///
/// `J` is scaled to unit norm and every Krylov column is normalised before
/// the SVD; neither changes the column space, but both keep the powers
/// representable. Beyond a few dozen states the report is indicative only.
pub fn kalman_controllable(system: &LinearSystem) -> Result<KalmanReport, LqrError> {
    let n = system.state_dim();
    let m = system.input_dim();
    if n == 0 {
        return Ok(KalmanReport {
            rank: 0,
            dimension: 0,
            controllable: true,
        });
    }
    if m == 0 {
        return Ok(KalmanReport {
            rank: 0,
            dimension: n,
            controllable: false,
        });
    }
    let scale = linalg::one_norm(&system.jacobian);
    let js = if scale > 0.0 {
        &system.jacobian / scale
    } else {
        system.jacobian.clone()
    };
    let mut krylov = DMatrix::zeros(n, n * m);
    let mut block = system.actuation.clone();
    for step in 0..n {
        for mut col in block.column_iter_mut() {
            let norm = col.norm();
            if norm > 0.0 {
                col /= norm;
            }
        }
        krylov.columns_mut(step * m, m).copy_from(&block);
        block = &js * &block;
    }
    let sv = linalg::singular_values(&krylov)?;
    let rank = linalg::numerical_rank(&sv, RANK_TOLERANCE);
    Ok(KalmanReport {
        rank,
        dimension: n,
        controllable: rank == n,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilisabilityReport {
    pub stabilisable: bool,
    /// Eigenvalues of `J` treated as unstable (upper half-plane representatives).
    pub unstable: Vec<Complex64>,
    /// Eigenvalues that failed the rank test.
    pub unreachable: Vec<Complex64>,
    /// A repeated unstable eigenvalue whose eigenspace looked defective.
    pub defective_warning: bool,
}

/// Hautus test on the unstable spectrum: for every eigenvalue with
/// `Re λ >= -ε`, `rank [λI - J, Ψ] = n`. `ε` is `1e-10` scaled by `‖J‖₁`.
pub fn stabilisable(system: &LinearSystem) -> Result<StabilisabilityReport, LqrError> {
    let j = &system.jacobian;
    let psi = &system.actuation;
    let n = j.nrows();
    let scale = linalg::one_norm(j).max(1.0);
    let eps = 1e-10 * scale;
    let cluster_tol = 1e-8 * scale;
    let values = linalg::eigenvalues(j)?;

    // Cluster the unstable eigenvalues (one representative per conjugate pair).
    let mut clusters: Vec<(Complex64, usize)> = Vec::new();
    for z in values.iter().filter(|z| z.re >= -eps && z.im >= -cluster_tol) {
        match clusters.iter_mut().find(|(c, _)| (c - z).norm() <= cluster_tol) {
            Some(c) => c.1 += 1,
            None => clusters.push((*z, 1)),
        }
    }

    let mut unreachable = Vec::new();
    let mut defective = false;
    for &(lambda, multiplicity) in &clusters {
        let mut pencil = DMatrix::from_element(n, n + psi.ncols(), Complex64::new(0.0, 0.0));
        for r in 0..n {
            for c in 0..n {
                pencil[(r, c)] = Complex64::new(-j[(r, c)], 0.0);
            }
            pencil[(r, r)] += lambda;
            for c in 0..psi.ncols() {
                pencil[(r, n + c)] = Complex64::new(psi[(r, c)], 0.0);
            }
        }
        let sv = linalg::complex_singular_values(&pencil)?;
        if linalg::numerical_rank(&sv, RANK_TOLERANCE) < n {
            unreachable.push(lambda);
        }
        if multiplicity > 1 {
            let shifted = pencil.columns(0, n).into_owned();
            let sv = linalg::complex_singular_values(&shifted)?;
            let geometric = n - linalg::numerical_rank(&sv, 1e-8);
            if geometric < multiplicity {
                defective = true;
            }
        }
    }
    Ok(StabilisabilityReport {
        stabilisable: unreachable.is_empty(),
        unstable: clusters.into_iter().map(|(z, _)| z).collect(),
        unreachable,
        defective_warning: defective,
    })
}
