//! Conservative discretisation of the Benney equation `h_t + q_x = f`.
//!
//! The flux is evaluated at the half points `x_{j+1/2}` from two-point
//! averages and differences of `h`, so its divergence telescopes exactly
//! and its linearisation is the central-difference Jacobian.

use crate::banded::PeriodicBanded;
use crate::model::FlowParameters;

/// Half-point flux `Q_j ≡ q(x_{j+1/2})` and its partial derivatives with
/// respect to `(h̄, h_x, h_xxx)`.
#[derive(Debug, Clone, Copy)]
struct FluxPoint {
    q: f64,
    d_mean: f64,
    d_slope: f64,
    d_third: f64,
}

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

#[inline]
fn stencil(h: &[f64], j: usize) -> (f64, f64, f64, f64) {
    let n = h.len();
    (h[(j + n - 1) % n], h[j], h[(j + 1) % n], h[(j + 2) % n])
}

#[inline]
fn flux_point(c: &Coeffs, hm: f64, hx: f64, h3: f64, fm: f64) -> FluxPoint {
    let hm2 = hm * hm;
    let hm3 = hm2 * hm;
    let hm4 = hm3 * hm;
    let hm5 = hm4 * hm;
    let hm6 = hm5 * hm;
    let bracket = 2.0 - 2.0 * c.cot * hx + h3 * c.inv_ca;
    FluxPoint {
        q: hm3 / 3.0 * bracket + c.re * (8.0 * hm6 * hx / 15.0 - 2.0 * hm4 * fm / 3.0),
        d_mean: hm2 * bracket + c.re * (48.0 * hm5 * hx / 15.0 - 8.0 * hm3 * fm / 3.0),
        d_slope: -2.0 * c.cot * hm3 / 3.0 + 8.0 * c.re * hm6 / 15.0,
        d_third: hm3 * c.inv_ca / 3.0,
    }
}

fn flux_at(c: &Coeffs, h: &[f64], f: &[f64], j: usize) -> FluxPoint {
    let n = h.len();
    let (hm1, h0, h1, h2) = stencil(h, j);
    let dx = c.dx;
    let hm = 0.5 * (h0 + h1);
    let hx = (h1 - h0) / dx;
    let h3 = (h2 - 3.0 * h1 + 3.0 * h0 - hm1) / (dx * dx * dx);
    let fm = 0.5 * (f[j] + f[(j + 1) % n]);
    flux_point(c, hm, hx, h3, fm)
}

/// Benney flux at the half points `x_{j+1/2}`, entry `j`.
pub fn benney_flux(h: &[f64], f: &[f64], params: &FlowParameters, dx: f64) -> Vec<f64> {
    let c = Coeffs::new(params, dx);
    (0..h.len()).map(|j| flux_at(&c, h, f, j).q).collect()
}

/// Implicit-step residual `c₀h + hist + (Q_i - Q_{i-1})/dx - f`.
pub fn residual(
    h: &[f64],
    c0: f64,
    hist: &[f64],
    f: &[f64],
    params: &FlowParameters,
    dx: f64,
    out: &mut [f64],
) {
    let c = Coeffs::new(params, dx);
    let n = h.len();
    let q: Vec<f64> = (0..n).map(|j| flux_at(&c, h, f, j).q).collect();
    for i in 0..n {
        out[i] = c0 * h[i] + hist[i] + (q[i] - q[(i + n - 1) % n]) / dx - f[i];
    }
}

/// Exact Jacobian of [`residual`] in periodic-banded form (bandwidth 2).
pub fn jacobian(h: &[f64], c0: f64, f: &[f64], params: &FlowParameters, dx: f64) -> PeriodicBanded {
    let c = Coeffs::new(params, dx);
    let n = h.len();
    let mut jac = PeriodicBanded::zeros(n, 2, 2);
    let dx3 = dx * dx * dx;
    // dQ_j/dh_{j+d} for d = -1..=2.
    let partials: Vec<[f64; 4]> = (0..n)
        .map(|j| {
            let p = flux_at(&c, h, f, j);
            [
                -p.d_third / dx3,
                0.5 * p.d_mean - p.d_slope / dx + 3.0 * p.d_third / dx3,
                0.5 * p.d_mean + p.d_slope / dx - 3.0 * p.d_third / dx3,
                p.d_third / dx3,
            ]
        })
        .collect();
    for i in 0..n {
        jac.add(i, i, c0);
        let right = &partials[i];
        let left = &partials[(i + n - 1) % n];
        for (k, d) in (-1isize..=2).enumerate() {
            let col = (i as isize + d).rem_euclid(n as isize) as usize;
            jac.add(i, col, right[k] / dx);
        }
        for (k, d) in (-2isize..=1).enumerate() {
            let col = (i as isize + d).rem_euclid(n as isize) as usize;
            jac.add(i, col, -left[k] / dx);
        }
    }
    jac
}
