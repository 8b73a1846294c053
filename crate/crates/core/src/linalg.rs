//! Thin safe wrappers over the LAPACK routines used by the synthesis and
//! analysis code. Matrices are `nalgebra` column-major storage, which is the
//! layout LAPACK expects.

use std::cell::Cell;
use std::os::raw::{c_char, c_int};

use lapack_sys as ffi;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

// Pulls in the system OpenBLAS that provides the LAPACK symbols.
extern crate openblas_src;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("LAPACK routine {routine} failed with info = {info}")]
    Lapack { routine: &'static str, info: i32 },
    #[error("matrix is singular to working precision")]
    Singular,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

fn check(routine: &'static str, info: c_int) -> Result<(), LinalgError> {
    if info == 0 {
        Ok(())
    } else {
        Err(LinalgError::Lapack { routine, info })
    }
}

#[inline]
fn ch(c: u8) -> *const c_char {
    // LAPACK only reads one byte through these pointers.
    static CHARS: [u8; 8] = *b"NVSTLAU1";
    let idx = CHARS.iter().position(|&x| x == c).expect("unsupported flag");
    &CHARS[idx] as *const u8 as *const c_char
}

fn dim(n: usize) -> c_int {
    c_int::try_from(n).expect("matrix dimension exceeds LAPACK index range")
}

fn require_square(a: &DMatrix<f64>) -> Result<usize, LinalgError> {
    if a.nrows() != a.ncols() {
        return Err(LinalgError::Dimension(format!(
            "expected square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(a.nrows())
}

fn pairs(wr: &[f64], wi: &[f64]) -> Vec<Complex64> {
    wr.iter()
        .zip(wi)
        .map(|(&re, &im)| Complex64::new(re, im))
        .collect()
}

/// Eigenvalues of a general real matrix.
pub fn eigenvalues(a: &DMatrix<f64>) -> Result<Vec<Complex64>, LinalgError> {
    Ok(eig(a, false, false)?.values)
}

/// Largest real part among the eigenvalues.
pub fn spectral_abscissa(a: &DMatrix<f64>) -> Result<f64, LinalgError> {
    Ok(eigenvalues(a)?
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Eigen-decomposition of a general real matrix. Eigenvectors are returned as
/// complex columns, normalised to unit 2-norm.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<Complex64>,
    pub right: Option<DMatrix<Complex64>>,
    pub left: Option<DMatrix<Complex64>>,
}

fn expand_vectors(raw: &DMatrix<f64>, wi: &[f64]) -> DMatrix<Complex64> {
    let n = raw.nrows();
    let mut out = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    let mut j = 0;
    while j < n {
        if wi[j] == 0.0 {
            for i in 0..n {
                out[(i, j)] = Complex64::new(raw[(i, j)], 0.0);
            }
            j += 1;
        } else {
            for i in 0..n {
                let re = raw[(i, j)];
                let im = raw[(i, j + 1)];
                out[(i, j)] = Complex64::new(re, im);
                out[(i, j + 1)] = Complex64::new(re, -im);
            }
            j += 2;
        }
    }
    out
}

pub fn eig(a: &DMatrix<f64>, want_left: bool, want_right: bool) -> Result<Eigen, LinalgError> {
    let n = require_square(a)?;
    if n == 0 {
        return Ok(Eigen {
            values: vec![],
            right: None,
            left: None,
        });
    }
    let mut work_a = a.clone();
    let mut wr = vec![0.0; n];
    let mut wi = vec![0.0; n];
    let ldv = if want_left || want_right { n } else { 1 };
    let mut vl = vec![0.0; if want_left { n * n } else { 1 }];
    let mut vr = vec![0.0; if want_right { n * n } else { 1 }];
    let nn = dim(n);
    let ldv_c = dim(ldv);
    let mut info = 0;
    let jobvl = ch(if want_left { b'V' } else { b'N' });
    let jobvr = ch(if want_right { b'V' } else { b'N' });
    let mut query = 0.0;
    let lwork_q: c_int = -1;
    unsafe {
        ffi::dgeev_(
            jobvl,
            jobvr,
            &nn,
            work_a.as_mut_ptr(),
            &nn,
            wr.as_mut_ptr(),
            wi.as_mut_ptr(),
            vl.as_mut_ptr(),
            &ldv_c,
            vr.as_mut_ptr(),
            &ldv_c,
            &mut query,
            &lwork_q,
            &mut info,
        );
    }
    check("dgeev(query)", info)?;
    let lwork = (query as usize).max(4 * n);
    let mut work = vec![0.0; lwork];
    let lwork_c = dim(lwork);
    unsafe {
        ffi::dgeev_(
            jobvl,
            jobvr,
            &nn,
            work_a.as_mut_ptr(),
            &nn,
            wr.as_mut_ptr(),
            wi.as_mut_ptr(),
            vl.as_mut_ptr(),
            &ldv_c,
            vr.as_mut_ptr(),
            &ldv_c,
            work.as_mut_ptr(),
            &lwork_c,
            &mut info,
        );
    }
    check("dgeev", info)?;
    let left = want_left.then(|| expand_vectors(&DMatrix::from_vec(n, n, vl), &wi));
    let right = want_right.then(|| expand_vectors(&DMatrix::from_vec(n, n, vr), &wi));
    Ok(Eigen {
        values: pairs(&wr, &wi),
        right,
        left,
    })
}

/// Which eigenvalues an ordered Schur decomposition moves to the leading
/// block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Selection {
    /// `Re λ < 0`.
    Stable,
    /// `Re λ >= threshold`.
    RealPartAtLeast(f64),
}

thread_local! {
    static SELECT_THRESHOLD: Cell<f64> = const { Cell::new(0.0) };
}

unsafe extern "C" fn select_stable(wr: *const f64, _wi: *const f64) -> c_int {
    (*wr < 0.0) as c_int
}

unsafe extern "C" fn select_at_least(wr: *const f64, _wi: *const f64) -> c_int {
    let threshold = SELECT_THRESHOLD.with(|t| t.get());
    (*wr >= threshold) as c_int
}

/// Real Schur form `A = Z T Zᵀ` with the selected eigenvalues ordered first.
#[derive(Debug, Clone)]
pub struct Schur {
    pub t: DMatrix<f64>,
    pub z: DMatrix<f64>,
    pub values: Vec<Complex64>,
    /// Number of selected eigenvalues (the leading block size).
    pub selected: usize,
}

pub fn ordered_schur(a: &DMatrix<f64>, selection: Selection) -> Result<Schur, LinalgError> {
    let n = require_square(a)?;
    let mut t = a.clone();
    let mut z = DMatrix::zeros(n, n);
    let mut wr = vec![0.0; n];
    let mut wi = vec![0.0; n];
    let mut bwork = vec![0 as c_int; n.max(1)];
    let nn = dim(n.max(1));
    let n_c = dim(n);
    let mut sdim: c_int = 0;
    let mut info = 0;
    let select: ffi::LAPACK_D_SELECT2 = match selection {
        Selection::Stable => Some(select_stable),
        Selection::RealPartAtLeast(th) => {
            SELECT_THRESHOLD.with(|c| c.set(th));
            Some(select_at_least)
        }
    };
    if n == 0 {
        return Ok(Schur {
            t,
            z,
            values: vec![],
            selected: 0,
        });
    }
    let mut query = 0.0;
    let lwork_q: c_int = -1;
    unsafe {
        ffi::dgees_(
            ch(b'V'),
            ch(b'S'),
            select,
            &n_c,
            t.as_mut_ptr(),
            &nn,
            &mut sdim,
            wr.as_mut_ptr(),
            wi.as_mut_ptr(),
            z.as_mut_ptr(),
            &nn,
            &mut query,
            &lwork_q,
            bwork.as_mut_ptr(),
            &mut info,
        );
    }
    check("dgees(query)", info)?;
    let lwork = (query as usize).max(3 * n);
    let mut work = vec![0.0; lwork];
    let lwork_c = dim(lwork);
    unsafe {
        ffi::dgees_(
            ch(b'V'),
            ch(b'S'),
            select,
            &n_c,
            t.as_mut_ptr(),
            &nn,
            &mut sdim,
            wr.as_mut_ptr(),
            wi.as_mut_ptr(),
            z.as_mut_ptr(),
            &nn,
            work.as_mut_ptr(),
            &lwork_c,
            bwork.as_mut_ptr(),
            &mut info,
        );
    }
    // info = n + 2 signals that reordering changed eigenvalues near the
    // selection boundary; the factorisation itself is still valid.
    if info != 0 && info != n_c + 2 {
        return Err(LinalgError::Lapack {
            routine: "dgees",
            info,
        });
    }
    Ok(Schur {
        t,
        z,
        values: pairs(&wr, &wi),
        selected: sdim as usize,
    })
}

/// LU factorisation with partial pivoting.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: DMatrix<f64>,
    ipiv: Vec<c_int>,
    anorm: f64,
}

impl Lu {
    pub fn new(a: &DMatrix<f64>) -> Result<Self, LinalgError> {
        let n = require_square(a)?;
        let anorm = one_norm(a);
        let mut lu = a.clone();
        let mut ipiv = vec![0 as c_int; n.max(1)];
        let n_c = dim(n);
        let lda = dim(n.max(1));
        let mut info = 0;
        unsafe {
            ffi::dgetrf_(&n_c, &n_c, lu.as_mut_ptr(), &lda, ipiv.as_mut_ptr(), &mut info);
        }
        if info > 0 {
            return Err(LinalgError::Singular);
        }
        check("dgetrf", info)?;
        Ok(Lu { lu, ipiv, anorm })
    }

    pub fn dim(&self) -> usize {
        self.lu.nrows()
    }

    /// Solves `A X = B` (or `Aᵀ X = B` when `transpose`) in place.
    pub fn solve_in_place(&self, b: &mut DMatrix<f64>, transpose: bool) -> Result<(), LinalgError> {
        let n = self.dim();
        if b.nrows() != n {
            return Err(LinalgError::Dimension(format!(
                "rhs has {} rows, expected {n}",
                b.nrows()
            )));
        }
        if b.ncols() == 0 || n == 0 {
            return Ok(());
        }
        let n_c = dim(n);
        let nrhs = dim(b.ncols());
        let mut info = 0;
        unsafe {
            ffi::dgetrs_(
                ch(if transpose { b'T' } else { b'N' }),
                &n_c,
                &nrhs,
                self.lu.as_ptr(),
                &n_c,
                self.ipiv.as_ptr(),
                b.as_mut_ptr(),
                &n_c,
                &mut info,
            );
        }
        check("dgetrs", info)
    }

    pub fn solve_vec_in_place(&self, b: &mut [f64]) -> Result<(), LinalgError> {
        let n = self.dim();
        if b.len() != n {
            return Err(LinalgError::Dimension(format!("rhs length {}, expected {n}", b.len())));
        }
        let n_c = dim(n);
        let one: c_int = 1;
        let mut info = 0;
        unsafe {
            ffi::dgetrs_(
                ch(b'N'),
                &n_c,
                &one,
                self.lu.as_ptr(),
                &n_c,
                self.ipiv.as_ptr(),
                b.as_mut_ptr(),
                &n_c,
                &mut info,
            );
        }
        check("dgetrs", info)
    }

    /// Reciprocal condition number estimate in the 1-norm.
    pub fn rcond(&self) -> f64 {
        let n = self.dim();
        if n == 0 {
            return 1.0;
        }
        let n_c = dim(n);
        let mut rcond = 0.0;
        let mut work = vec![0.0; 4 * n];
        let mut iwork = vec![0 as c_int; n];
        let mut info = 0;
        unsafe {
            ffi::dgecon_(
                ch(b'1'),
                &n_c,
                self.lu.as_ptr(),
                &n_c,
                &self.anorm,
                &mut rcond,
                work.as_mut_ptr(),
                iwork.as_mut_ptr(),
                &mut info,
            );
        }
        if info != 0 {
            0.0
        } else {
            rcond
        }
    }
}

/// Matrix 1-norm (maximum absolute column sum).
pub fn one_norm(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Solves `A X = B`.
pub fn solve(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>, LinalgError> {
    let lu = Lu::new(a)?;
    let mut x = b.clone();
    lu.solve_in_place(&mut x, false)?;
    Ok(x)
}

/// Eigenvalues of a symmetric matrix in ascending order (upper triangle used).
pub fn symmetric_eigenvalues(a: &DMatrix<f64>) -> Result<Vec<f64>, LinalgError> {
    let n = require_square(a)?;
    if n == 0 {
        return Ok(vec![]);
    }
    let mut work_a = a.clone();
    let mut w = vec![0.0; n];
    let n_c = dim(n);
    let mut info = 0;
    let mut query = 0.0;
    let mut iquery: c_int = 0;
    let minus_one: c_int = -1;
    unsafe {
        ffi::dsyevd_(
            ch(b'N'),
            ch(b'L'),
            &n_c,
            work_a.as_mut_ptr(),
            &n_c,
            w.as_mut_ptr(),
            &mut query,
            &minus_one,
            &mut iquery,
            &minus_one,
            &mut info,
        );
    }
    check("dsyevd(query)", info)?;
    let lwork = (query as usize).max(2 * n + 1);
    let liwork = (iquery as usize).max(1);
    let mut work = vec![0.0; lwork];
    let mut iwork = vec![0 as c_int; liwork];
    let lwork_c = dim(lwork);
    let liwork_c = dim(liwork);
    unsafe {
        ffi::dsyevd_(
            ch(b'N'),
            ch(b'L'),
            &n_c,
            work_a.as_mut_ptr(),
            &n_c,
            w.as_mut_ptr(),
            work.as_mut_ptr(),
            &lwork_c,
            iwork.as_mut_ptr(),
            &liwork_c,
            &mut info,
        );
    }
    check("dsyevd", info)?;
    Ok(w)
}

/// Singular values in descending order.
pub fn singular_values(a: &DMatrix<f64>) -> Result<Vec<f64>, LinalgError> {
    let (m, n) = a.shape();
    let k = m.min(n);
    if k == 0 {
        return Ok(vec![]);
    }
    let mut work_a = a.clone();
    let mut s = vec![0.0; k];
    let m_c = dim(m);
    let n_c = dim(n);
    let one: c_int = 1;
    let mut u = [0.0];
    let mut vt = [0.0];
    let mut iwork = vec![0 as c_int; 8 * k];
    let mut info = 0;
    let mut query = 0.0;
    let minus_one: c_int = -1;
    unsafe {
        ffi::dgesdd_(
            ch(b'N'),
            &m_c,
            &n_c,
            work_a.as_mut_ptr(),
            &m_c,
            s.as_mut_ptr(),
            u.as_mut_ptr(),
            &one,
            vt.as_mut_ptr(),
            &one,
            &mut query,
            &minus_one,
            iwork.as_mut_ptr(),
            &mut info,
        );
    }
    check("dgesdd(query)", info)?;
    let lwork = (query as usize).max(7 * k + m.max(n));
    let mut work = vec![0.0; lwork];
    let lwork_c = dim(lwork);
    unsafe {
        ffi::dgesdd_(
            ch(b'N'),
            &m_c,
            &n_c,
            work_a.as_mut_ptr(),
            &m_c,
            s.as_mut_ptr(),
            u.as_mut_ptr(),
            &one,
            vt.as_mut_ptr(),
            &one,
            work.as_mut_ptr(),
            &lwork_c,
            iwork.as_mut_ptr(),
            &mut info,
        );
    }
    check("dgesdd", info)?;
    Ok(s)
}

/// Singular values of a complex matrix in descending order.
pub fn complex_singular_values(a: &DMatrix<Complex64>) -> Result<Vec<f64>, LinalgError> {
    let (m, n) = a.shape();
    let k = m.min(n);
    if k == 0 {
        return Ok(vec![]);
    }
    let mut buf: Vec<ffi::__BindgenComplex<f64>> = a
        .iter()
        .map(|z| ffi::__BindgenComplex { re: z.re, im: z.im })
        .collect();
    let mut s = vec![0.0; k];
    let m_c = dim(m);
    let n_c = dim(n);
    let one: c_int = 1;
    let mut u = [ffi::__BindgenComplex { re: 0.0, im: 0.0 }];
    let mut vt = [ffi::__BindgenComplex { re: 0.0, im: 0.0 }];
    let mut rwork = vec![0.0; 5 * k];
    let mut info = 0;
    let mut query = [ffi::__BindgenComplex { re: 0.0, im: 0.0 }];
    let minus_one: c_int = -1;
    unsafe {
        ffi::zgesvd_(
            ch(b'N'),
            ch(b'N'),
            &m_c,
            &n_c,
            buf.as_mut_ptr(),
            &m_c,
            s.as_mut_ptr(),
            u.as_mut_ptr(),
            &one,
            vt.as_mut_ptr(),
            &one,
            query.as_mut_ptr(),
            &minus_one,
            rwork.as_mut_ptr(),
            &mut info,
        );
    }
    check("zgesvd(query)", info)?;
    let lwork = (query[0].re as usize).max(2 * k + m.max(n));
    let mut work = vec![ffi::__BindgenComplex { re: 0.0, im: 0.0 }; lwork];
    let lwork_c = dim(lwork);
    unsafe {
        ffi::zgesvd_(
            ch(b'N'),
            ch(b'N'),
            &m_c,
            &n_c,
            buf.as_mut_ptr(),
            &m_c,
            s.as_mut_ptr(),
            u.as_mut_ptr(),
            &one,
            vt.as_mut_ptr(),
            &one,
            work.as_mut_ptr(),
            &lwork_c,
            rwork.as_mut_ptr(),
            &mut info,
        );
    }
    check("zgesvd", info)?;
    Ok(s)
}

/// Numerical rank: singular values above `rel_tol · σ_max`.
pub fn numerical_rank(singular: &[f64], rel_tol: f64) -> usize {
    let smax = singular.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return 0;
    }
    singular.iter().filter(|&&s| s > rel_tol * smax).count()
}

/// Solves the Lyapunov equation `Aᵀ X + X A = C` by Bartels–Stewart.
pub fn solve_lyapunov(a: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>, LinalgError> {
    let n = require_square(a)?;
    if c.shape() != (n, n) {
        return Err(LinalgError::Dimension("lyapunov rhs shape".into()));
    }
    let schur = ordered_schur(a, Selection::Stable)?;
    let z = &schur.z;
    // Tᵀ Y + Y T = Zᵀ C Z with Y = Zᵀ X Z.
    let mut y = z.transpose() * c * z;
    let n_c = dim(n);
    let isgn: c_int = 1;
    let mut scale = 1.0;
    let mut info = 0;
    unsafe {
        ffi::dtrsyl_(
            ch(b'T'),
            ch(b'N'),
            &isgn,
            &n_c,
            &n_c,
            schur.t.as_ptr(),
            &n_c,
            schur.t.as_ptr(),
            &n_c,
            y.as_mut_ptr(),
            &n_c,
            &mut scale,
            &mut info,
        );
    }
    if info < 0 {
        return Err(LinalgError::Lapack {
            routine: "dtrsyl",
            info,
        });
    }
    if info == 1 || scale == 0.0 {
        return Err(LinalgError::Singular);
    }
    let x = z * (y / scale) * z.transpose();
    Ok(x)
}

/// Orthonormal basis for the column space of `a` (thin QR, `a` full rank).
pub fn orthonormal_columns(a: &DMatrix<f64>) -> DMatrix<f64> {
    let qr = a.clone().qr();
    qr.q()
}

/// `v / ‖v‖₂`.
pub fn normalized(v: &DVector<f64>) -> DVector<f64> {
    v / v.norm()
}
