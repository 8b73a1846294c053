//! Periodic banded matrices, as produced by finite-difference stencils on a
//! periodic grid, and a direct solver for them.
//!
//! The matrix is split into its non-wrapping band `B` and the low-rank
//! wrap-around corners `E C`, where `E` selects the few rows that reach
//! across the periodic boundary. `B` is factorised with LAPACK's band LU and
//! the corners are folded back in with the Sherman–Morrison–Woodbury formula.

use std::os::raw::c_int;

use lapack_sys as ffi;
use nalgebra::DMatrix;

use crate::linalg::{LinalgError, Lu};

/// Square periodic banded matrix: entry `(i, (i + d) mod n)` is stored for
/// `-lower <= d <= upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicBanded {
    n: usize,
    lower: usize,
    upper: usize,
    data: Vec<f64>,
}

impl PeriodicBanded {
    pub fn zeros(n: usize, lower: usize, upper: usize) -> Self {
        assert!(lower + upper < n, "band wider than the matrix");
        PeriodicBanded {
            n,
            lower,
            upper,
            data: vec![0.0; n * (lower + upper + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.lower, self.upper)
    }

    pub fn clear(&mut self) {
        self.data.iter_mut().for_each(|v| *v = 0.0);
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        let n = self.n as isize;
        let mut d = j as isize - i as isize;
        if d > self.upper as isize {
            d -= n;
        } else if d < -(self.lower as isize) {
            d += n;
        }
        assert!(
            d >= -(self.lower as isize) && d <= self.upper as isize,
            "entry ({i}, {j}) outside the periodic band"
        );
        i * (self.lower + self.upper + 1) + (d + self.lower as isize) as usize
    }

    /// Adds `value` to entry `(i, j)`; `j` may be any representative mod `n`.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        let s = self.slot(i, j % self.n);
        self.data[s] += value;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[self.slot(i, j % self.n)]
    }

    fn entries_of_row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let width = self.lower + self.upper + 1;
        let n = self.n as isize;
        (0..width).map(move |k| {
            let d = k as isize - self.lower as isize;
            let j = (i as isize + d).rem_euclid(n) as usize;
            (j, self.data[i * width + k])
        })
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.entries_of_row(i) {
                m[(i, j)] += v;
            }
        }
        m
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.entries_of_row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    pub fn factor(&self) -> Result<BandedLu, LinalgError> {
        let (kl, ku) = (self.lower, self.upper);
        // Small systems gain nothing from the band split.
        if self.n < 4 * (kl + ku + 1) {
            return Ok(BandedLu::Dense(Lu::new(&self.to_dense())?));
        }
        match self.factor_woodbury() {
            Ok(lu) => Ok(lu),
            Err(_) => Ok(BandedLu::Dense(Lu::new(&self.to_dense())?)),
        }
    }

    fn factor_woodbury(&self) -> Result<BandedLu, LinalgError> {
        let n = self.n;
        let (kl, ku) = (self.lower, self.upper);
        let ldab = 2 * kl + ku + 1;
        let mut ab = vec![0.0; ldab * n];
        // Rows whose stencil wraps around the periodic boundary, and the
        // wrapped entries themselves.
        let mut corner_rows: Vec<usize> = Vec::new();
        let mut corner_entries: Vec<Vec<(usize, f64)>> = Vec::new();
        for i in 0..n {
            let mut wrapped = Vec::new();
            for (k, d) in (-(kl as isize)..=ku as isize).enumerate() {
                let v = self.data[i * (kl + ku + 1) + k];
                let j = i as isize + d;
                if j < 0 || j >= n as isize {
                    if v != 0.0 {
                        wrapped.push((j.rem_euclid(n as isize) as usize, v));
                    }
                } else {
                    let j = j as usize;
                    ab[j * ldab + (kl + ku + i - j)] = v;
                }
            }
            if i < kl || i + ku >= n {
                corner_rows.push(i);
                corner_entries.push(wrapped);
            }
        }
        let mut ipiv = vec![0 as c_int; n];
        let n_c = n as c_int;
        let kl_c = kl as c_int;
        let ku_c = ku as c_int;
        let ldab_c = ldab as c_int;
        let mut info = 0;
        unsafe {
            ffi::dgbtrf_(&n_c, &n_c, &kl_c, &ku_c, ab.as_mut_ptr(), &ldab_c, ipiv.as_mut_ptr(), &mut info);
        }
        if info != 0 {
            return Err(LinalgError::Singular);
        }
        let band = BandFactor {
            n,
            kl,
            ku,
            ab,
            ipiv,
        };
        let k = corner_rows.len();
        // Z = B⁻¹ E
        let mut z = DMatrix::zeros(n, k);
        for (c, &r) in corner_rows.iter().enumerate() {
            z[(r, c)] = 1.0;
        }
        band.solve_many(&mut z)?;
        // S = I + C Z
        let mut s = DMatrix::identity(k, k);
        for (a, entries) in corner_entries.iter().enumerate() {
            for &(j, v) in entries {
                for b in 0..k {
                    s[(a, b)] += v * z[(j, b)];
                }
            }
        }
        let s_lu = Lu::new(&s)?;
        if s_lu.rcond() < 1e-14 {
            return Err(LinalgError::Singular);
        }
        Ok(BandedLu::Woodbury {
            band,
            z,
            corner_entries,
            s_lu,
        })
    }

    /// Factors and solves `A x = rhs` in place.
    pub fn solve_in_place(&self, rhs: &mut [f64]) -> Result<(), LinalgError> {
        self.factor()?.solve_in_place(rhs)
    }
}

#[derive(Debug, Clone)]
pub struct BandFactor {
    n: usize,
    kl: usize,
    ku: usize,
    ab: Vec<f64>,
    ipiv: Vec<c_int>,
}

impl BandFactor {
    fn solve_many(&self, b: &mut DMatrix<f64>) -> Result<(), LinalgError> {
        if b.ncols() == 0 {
            return Ok(());
        }
        let cols = b.ncols();
        self.solve_raw(b.as_mut_slice(), cols)
    }

    fn solve_raw(&self, b: &mut [f64], nrhs: usize) -> Result<(), LinalgError> {
        let n_c = self.n as c_int;
        let kl_c = self.kl as c_int;
        let ku_c = self.ku as c_int;
        let ldab_c = (2 * self.kl + self.ku + 1) as c_int;
        let nrhs_c = nrhs as c_int;
        let trans = b'N' as std::os::raw::c_char;
        let mut info = 0;
        unsafe {
            ffi::dgbtrs_(
                &trans,
                &n_c,
                &kl_c,
                &ku_c,
                &nrhs_c,
                self.ab.as_ptr(),
                &ldab_c,
                self.ipiv.as_ptr(),
                b.as_mut_ptr(),
                &n_c,
                &mut info,
            );
        }
        if info != 0 {
            return Err(LinalgError::Lapack {
                routine: "dgbtrs",
                info,
            });
        }
        Ok(())
    }
}

/// Factorisation of a [`PeriodicBanded`] matrix.
#[derive(Debug, Clone)]
pub enum BandedLu {
    Dense(Lu),
    Woodbury {
        band: BandFactor,
        z: DMatrix<f64>,
        corner_entries: Vec<Vec<(usize, f64)>>,
        s_lu: Lu,
    },
}

impl BandedLu {
    pub fn solve_in_place(&self, rhs: &mut [f64]) -> Result<(), LinalgError> {
        match self {
            BandedLu::Dense(lu) => lu.solve_vec_in_place(rhs),
            BandedLu::Woodbury {
                band,
                z,
                corner_entries,
                s_lu,
            } => {
                band.solve_raw(rhs, 1)?;
                let mut w: Vec<f64> = corner_entries
                    .iter()
                    .map(|entries| entries.iter().map(|&(j, v)| v * rhs[j]).sum())
                    .collect();
                s_lu.solve_vec_in_place(&mut w)?;
                for (c, &wc) in w.iter().enumerate() {
                    if wc != 0.0 {
                        for (x, zc) in rhs.iter_mut().zip(z.column(c).iter()) {
                            *x -= zc * wc;
                        }
                    }
                }
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(n: usize, lower: usize, upper: usize) -> PeriodicBanded {
        let mut m = PeriodicBanded::zeros(n, lower, upper);
        for i in 0..n {
            for d in -(lower as isize)..=(upper as isize) {
                let j = (i as isize + d).rem_euclid(n as isize) as usize;
                let v = ((i * 31 + j * 17) % 13) as f64 / 13.0 - 0.5;
                m.add(i, j, v);
            }
            m.add(i, i, 3.0);
        }
        m
    }

    #[test]
    fn woodbury_matches_dense() {
        for &(n, l, u) in &[(64usize, 2usize, 2usize), (128, 5, 3), (40, 1, 4), (12, 2, 2)] {
            let m = sample(n, l, u);
            let dense = m.to_dense();
            let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
            let mut x = b.clone();
            m.solve_in_place(&mut x).unwrap();
            let r = &dense * nalgebra::DVector::from_vec(x.clone()) - nalgebra::DVector::from_vec(b);
            assert!(r.amax() < 1e-12, "n={n} residual {}", r.amax());
            let mv = m.mul_vec(&x);
            let mv_dense = &dense * nalgebra::DVector::from_vec(x);
            for (a, b) in mv.iter().zip(mv_dense.iter()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn indexing_wraps() {
        let mut m = PeriodicBanded::zeros(10, 2, 2);
        m.add(0, 9, 1.5);
        m.add(9, 0, -2.0);
        m.add(9, 11, 0.5); // column 1
        assert_eq!(m.get(0, 9), 1.5);
        assert_eq!(m.get(9, 0), -2.0);
        assert_eq!(m.get(9, 1), 0.5);
    }

    #[test]
    #[should_panic]
    fn rejects_out_of_band() {
        let mut m = PeriodicBanded::zeros(10, 1, 1);
        m.add(0, 5, 1.0);
    }
}
