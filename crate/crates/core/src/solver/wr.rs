//! Staggered discretisation of the weighted-residual model.
//!
//! `h_j` lives at the nodes and `q_j` at the half points `x_{j+1/2}`.
//! Unknowns are interleaved as `[h₀, q₀, h₁, q₁, …]` so the Newton Jacobian
//! is periodic-banded with bandwidth 3.

use crate::banded::PeriodicBanded;
use crate::model::FlowParameters;

#[derive(Debug, Clone, Copy)]
struct Coeffs {
    cot: f64,
    re: f64,
    inv_ca: f64,
    dx: f64,
}

impl Coeffs {
    fn new(params: &FlowParameters, dx: f64) -> Self {
        Coeffs {
            cot: params.cot_theta(),
            re: params.reynolds(),
            inv_ca: 1.0 / params.capillary(),
            dx,
        }
    }
}

/// Quantities of the flux equation at one half point.
struct Local {
    hm: f64,
    hx: f64,
    h3: f64,
    q: f64,
    qx: f64,
    fm: f64,
}

fn local(c: &Coeffs, z: &[f64], f: &[f64], j: usize) -> Local {
    let n = f.len();
    let h = |i: usize| z[2 * (i % n)];
    let q = |i: usize| z[2 * (i % n) + 1];
    let dx = c.dx;
    let (hm1, h0, h1, h2) = (h(j + n - 1), h(j), h(j + 1), h(j + 2));
    Local {
        hm: 0.5 * (h0 + h1),
        hx: (h1 - h0) / dx,
        h3: (h2 - 3.0 * h1 + 3.0 * h0 - hm1) / (dx * dx * dx),
        q: q(j),
        qx: (q(j + 1) - q(j + n - 1)) / (2.0 * dx),
        fm: 0.5 * (f[j] + f[(j + 1) % n]),
    }
}

/// Right-hand side of the flux equation without the `q` and inertia terms:
/// `(h³/3)(2 - 2cotθ h_x + h_xxx/Ca) + Re(18q²h_x/35 - 34hqq_x/35 + hqf/5)`.
fn drive(c: &Coeffs, l: &Local) -> f64 {
    let hm3 = l.hm * l.hm * l.hm;
    hm3 / 3.0 * (2.0 - 2.0 * c.cot * l.hx + l.h3 * c.inv_ca)
        + c.re * (18.0 * l.q * l.q * l.hx / 35.0 - 34.0 * l.hm * l.q * l.qx / 35.0 + l.hm * l.q * l.fm / 5.0)
}

/// Implicit-step residual for the interleaved state `z`.
///
/// `hist` holds the history part of the time derivative for every unknown,
/// so that `∂_t z ≈ c₀ z + hist`.
pub fn residual(
    z: &[f64],
    c0: f64,
    hist: &[f64],
    f: &[f64],
    params: &FlowParameters,
    dx: f64,
    out: &mut [f64],
) {
    let c = Coeffs::new(params, dx);
    let n = f.len();
    for j in 0..n {
        let qj = z[2 * j + 1];
        let qprev = z[2 * ((j + n - 1) % n) + 1];
        out[2 * j] = c0 * z[2 * j] + hist[2 * j] + (qj - qprev) / dx - f[j];
        let l = local(&c, z, f, j);
        let qt = c0 * l.q + hist[2 * j + 1];
        out[2 * j + 1] = 0.4 * c.re * l.hm * l.hm * qt + l.q - drive(&c, &l);
    }
}

/// Exact Jacobian of [`residual`] in periodic-banded form.
pub fn jacobian(z: &[f64], c0: f64, hist: &[f64], f: &[f64], params: &FlowParameters, dx: f64) -> PeriodicBanded {
    let c = Coeffs::new(params, dx);
    let n = f.len();
    let m = 2 * n;
    let mut jac = PeriodicBanded::zeros(m, 3, 3);
    let dx3 = dx * dx * dx;
    let re = c.re;
    for j in 0..n {
        let row_h = 2 * j;
        jac.add(row_h, row_h, c0);
        jac.add(row_h, row_h + 1, 1.0 / dx);
        jac.add(row_h, (row_h + m - 1) % m, -1.0 / dx);

        let row_q = 2 * j + 1;
        let l = local(&c, z, f, j);
        let qt = c0 * l.q + hist[row_q];
        let hm2 = l.hm * l.hm;
        let hm3 = hm2 * l.hm;
        let bracket = 2.0 - 2.0 * c.cot * l.hx + l.h3 * c.inv_ca;
        let d_mean = 0.8 * re * l.hm * qt - hm2 * bracket - re * (-34.0 * l.q * l.qx / 35.0 + l.q * l.fm / 5.0);
        let d_slope = 2.0 * c.cot * hm3 / 3.0 - 18.0 * re * l.q * l.q / 35.0;
        let d_third = -hm3 * c.inv_ca / 3.0;
        let d_q = 0.4 * re * hm2 * c0 + 1.0
            - re * (36.0 * l.q * l.hx / 35.0 - 34.0 * l.hm * l.qx / 35.0 + l.hm * l.fm / 5.0);
        let d_qx = 34.0 * re * l.hm * l.q / 35.0;

        let h_col = |i: usize| 2 * (i % n);
        let q_col = |i: usize| 2 * (i % n) + 1;
        jac.add(row_q, h_col(j + n - 1), -d_third / dx3);
        jac.add(row_q, h_col(j), 0.5 * d_mean - d_slope / dx + 3.0 * d_third / dx3);
        jac.add(row_q, h_col(j + 1), 0.5 * d_mean + d_slope / dx - 3.0 * d_third / dx3);
        jac.add(row_q, h_col(j + 2), d_third / dx3);
        jac.add(row_q, q_col(j), d_q);
        jac.add(row_q, q_col(j + 1), d_qx / (2.0 * dx));
        jac.add(row_q, q_col(j + n - 1), -d_qx / (2.0 * dx));
    }
    jac
}

/// Interleaves nodal `h` and half-point `q`.
pub fn interleave(h: &[f64], q: &[f64]) -> Vec<f64> {
    h.iter().zip(q).flat_map(|(&a, &b)| [a, b]).collect()
}

/// Splits an interleaved vector into `(h, q)`.
pub fn split(z: &[f64]) -> (Vec<f64>, Vec<f64>) {
    (z.iter().step_by(2).copied().collect(), z.iter().skip(1).step_by(2).copied().collect())
}
