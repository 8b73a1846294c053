//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use filmctl_core::actuators::{assemble_forcing, ActuatorConfig, ControlAmplitudes};
use filmctl_core::control::{
    classify_run, design_gain, find_min_actuators, fit_damping_rate, run_controlled, spin_up, ControlPlan, RunOptions,
    ScanProtocol, Termination, Verdict,
};
use filmctl_core::linalg::eigenvalues;
use filmctl_core::linear::{
    build_jacobian, count_unstable_modes, critical_wavenumber, dispersion_benney, dispersion_wr, fourier_spectrum,
    LinearSystem,
};
use filmctl_core::lqr::{
    care_residual, closed_loop, cost_weights, fourier_restricted_gain, solve_care, synthesize, CostWeights, SolverTag,
};
use filmctl_core::model::{from_physical, FlowParameters, Grid, InterfaceState, ModelKind, PhysicalFluid};
use filmctl_core::solver::{benney, initial_condition, wr, InitialCondition, Integrator, SolverConfig, StepStatus};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BENNEY: ModelKind = ModelKind::Benney;
const WR: ModelKind = ModelKind::WeightedResidual;
const N: usize = 256;
const L: f64 = 30.0;
const THETA: f64 = std::f64::consts::FRAC_PI_3;

type Check = Result<String, String>;

fn params(re: f64, ca: f64) -> FlowParameters {
    FlowParameters::new(re, ca, THETA, L).unwrap()
}

fn grid(n: usize) -> Grid {
    Grid::new(n, L).unwrap()
}

fn require(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn ac1() -> Check {
    let table = [
        ("water", 28.2, 0.0018),
        ("ethanol", 12.4, 0.0046),
        ("pentane", 175.0, 0.0045),
        ("nitrogen", 5.6, 5.2e-5),
    ];
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for (name, re, ca) in table {
        let p = from_physical(&PhysicalFluid::preset(name).unwrap(), L).unwrap();
        let e_re = (p.reynolds() - re).abs() / re;
        let e_ca = (p.capillary() - ca).abs() / ca;
        worst = worst.max(e_re).max(e_ca);
        parts.push(format!("{name} Re={:.2} Ca={:.3e}", p.reynolds(), p.capillary()));
    }
    require(worst <= 0.03, format!("{}; worst relative error {:.2}%", parts.join(", "), 100.0 * worst))
}

fn mode_error(model: ModelKind, p: &FlowParameters, n: usize, m: i64) -> f64 {
    let spectrum = fourier_spectrum(model, p, &grid(n));
    let mode = spectrum.iter().find(|s| s.mode == m).unwrap();
    let exact: Vec<Complex64> = match model {
        ModelKind::Benney => vec![dispersion_benney(mode.wavenumber, p)],
        ModelKind::WeightedResidual => {
            let (a, b) = dispersion_wr(mode.wavenumber, p);
            vec![a, b]
        }
    };
    mode.values
        .iter()
        .map(|z| exact.iter().map(|e| (z - e).norm()).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

fn ac2() -> Check {
    let p = params(5.0, 0.05);
    // The dense spectrum must coincide with the per-mode symbols.
    for model in [BENNEY, WR] {
        let g = grid(128);
        let dense = eigenvalues(&build_jacobian(model, &p, &g).jacobian).unwrap();
        let symbols: Vec<Complex64> = fourier_spectrum(model, &p, &g).into_iter().flat_map(|s| s.values).collect();
        let worst = dense
            .iter()
            .map(|z| symbols.iter().map(|w| (z - w).norm()).fold(f64::INFINITY, f64::min) / (1.0 + z.norm()))
            .fold(0.0, f64::max);
        if worst > 1e-8 {
            return Err(format!("{model}: dense and Fourier spectra differ by {worst:.1e}"));
        }
    }
    let coarse = grid(128);
    let k_limit = 0.5 * std::f64::consts::PI / coarse.spacing();
    let mut parts = Vec::new();
    let mut ok = true;
    for model in [BENNEY, WR] {
        let orders: Vec<f64> = (1..64)
            .filter(|&m| coarse.wavenumber(m) < k_limit)
            .map(|m| (mode_error(model, &p, 128, m) / mode_error(model, &p, 256, m)).log2())
            .collect();
        let (lo, hi) = orders.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &o| (a.min(o), b.max(o)));
        ok &= lo >= 1.8 && hi <= 2.2;
        parts.push(format!("{model}: order in [{lo:.3}, {hi:.3}] over {} modes", orders.len()));
    }
    require(ok, parts.join("; "))
}

fn ac3() -> Check {
    let threshold = 1.25 / THETA.tan();
    let k0 = |re: f64| critical_wavenumber(&params(re, 0.05));
    let (mut lo, mut hi) = (0.1 * threshold, 10.0 * threshold);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if k0(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let bisect_ok = (hi - threshold).abs() <= 1e-12 * threshold && k0(threshold) == 0.0;
    let p = params(5.0, 0.05);
    let n_u = count_unstable_modes(&p);
    let mut counts = Vec::new();
    for model in [BENNEY, WR] {
        let ev = eigenvalues(&build_jacobian(model, &p, &grid(N)).jacobian).unwrap();
        counts.push(ev.iter().filter(|z| z.re > -1e-10).count());
    }
    require(
        bisect_ok && n_u == 5 && counts.iter().all(|&c| c == n_u),
        format!(
            "k0 onset at Re={hi:.12} vs (5/4)cotθ={threshold:.12}; n_u={n_u}, unstable eigenvalues Benney={} WR={}",
            counts[0], counts[1]
        ),
    )
}

fn ac4() -> Check {
    let (a, b, u, v) = (1.0, 1.0, 1.0, 1.0);
    let sys = LinearSystem::from_matrices(DMatrix::from_element(1, 1, a), DMatrix::from_element(1, 1, b));
    let (_, sol) = synthesize(&sys, &CostWeights::custom(u, v, 1, 1).unwrap()).unwrap();
    let exact = 1.0 + 2f64.sqrt();
    let scalar_err = (sol.p[(0, 0)] - exact).abs();
    let mut parts = vec![format!("scalar |P-(1+√2)|={scalar_err:.1e}")];
    let mut ok = scalar_err <= 1e-10;

    let p = params(5.0, 0.05);
    let g = grid(N);
    let act = ActuatorConfig::new(5, 0.1, &g).unwrap();
    for model in [BENNEY, WR] {
        let system = LinearSystem::new(model, &p, &g, &act);
        let w = cost_weights(0.5, &g, model, 5).unwrap();
        let sol = solve_care(&system, &w).map_err(|e| format!("{model}: {e}"))?;
        let gm = &system.actuation * system.actuation.transpose() / w.v_diag();
        let r = care_residual(&system.jacobian, &gm, &w.u_matrix(), &sol.p).norm();
        let bound = 1e-8 * (1.0 + sol.p.norm());
        ok &= r <= bound;
        parts.push(format!("{model} residual {r:.1e} (bound {bound:.1e})"));
    }
    let system = LinearSystem::new(BENNEY, &p, &g, &act);
    let w = cost_weights(0.5, &g, BENNEY, 5).unwrap();
    let (k1, _) = synthesize(&system, &w).unwrap();
    let mut worst = 0.0f64;
    for alpha in [1e-2, 10.0] {
        let (k2, _) = synthesize(&system, &w.scaled(alpha).unwrap()).unwrap();
        worst = worst.max((&k1.k - &k2.k).amax() / k1.k.amax().max(1.0));
    }
    ok &= worst <= 1e-10;
    parts.push(format!("cost-scaling gain change {worst:.1e}"));
    require(ok, parts.join("; "))
}

/// Developed wave: uncontrolled weighted-residual evolution from a small
/// single-mode perturbation.
fn developed_wave(p: &FlowParameters, g: &Grid, t_spin: f64) -> (InterfaceState, f64, bool) {
    let ic = initial_condition(InitialCondition::SingleMode { amplitude: 0.01, mode: 1 }, g, WR).unwrap();
    let s = spin_up(WR, *p, g.clone(), &ic, t_spin, SolverConfig::default()).unwrap();
    (s.state, s.duration, s.saturated)
}

fn ac5() -> Check {
    let p = params(5.0, 0.05);
    let g = grid(N);
    let act = ActuatorConfig::new(5, 0.1, &g).unwrap();
    let (start, _, _) = developed_wave(&p, &g, 200.0);
    let mut ok = true;
    let mut parts = Vec::new();
    for model in [BENNEY, WR] {
        let gain = design_gain(model, model, &p, &g, &act, 0.5, SolverTag::Schur).map_err(|e| e.to_string())?;
        let lambda = closed_loop(&LinearSystem::new(model, &p, &g, &act), &gain).unwrap().spectral_abscissa;
        let plan = ControlPlan::new(gain, act.clone(), model, 0.0, 0.5).unwrap();
        let res = run_controlled(plan, p, g.clone(), &start, 300.0, RunOptions::default()).map_err(|e| e.to_string())?;
        if res.termination != Termination::Completed {
            ok = false;
            parts.push(format!("{model}: {:?}", res.termination));
            continue;
        }
        let fit = fit_damping_rate(&res).map_err(|e| format!("{model}: {e}"))?;
        let (ta, tb) = fit.fit_window;
        let window: Vec<f64> = res
            .times
            .iter()
            .zip(&res.deviation_norms)
            .filter(|(t, _)| **t >= ta && **t <= tb)
            .map(|(_, n)| *n)
            .collect();
        let monotone = window.windows(2).all(|w| w[1] <= w[0]);
        let gap = ((fit.rate - lambda) / lambda).abs();
        ok &= lambda < 0.0 && monotone && gap <= 0.10;
        parts.push(format!(
            "{model}: λ*={lambda:.4}, fitted {:.4} on t∈[{ta:.1},{tb:.1}] ({:.1}% off), monotone={monotone}",
            fit.rate,
            100.0 * gap
        ));
    }
    require(ok, parts.join("; "))
}

fn uncontrolled(model: ModelKind, p: &FlowParameters, g: &Grid, start: &InterfaceState, t_end: f64) -> Termination {
    let act = ActuatorConfig::new(1, 0.1, g).unwrap();
    let plan = ControlPlan::uncontrolled(act, g, model);
    run_controlled(plan, *p, g.clone(), start, t_end, RunOptions::default()).unwrap().termination
}

fn ac6() -> Check {
    let p = params(10.0, 0.05);
    let g = grid(N);
    let small = |model| initial_condition(InitialCondition::SingleMode { amplitude: 0.01, mode: 1 }, &g, model).unwrap();
    let benney_small = uncontrolled(BENNEY, &p, &g, &small(BENNEY), 300.0);
    let wr_small = uncontrolled(WR, &p, &g, &small(WR), 300.0);
    let (wave, duration, saturated) = developed_wave(&p, &g, 600.0);
    let benney_wave = uncontrolled(BENNEY, &p, &g, &wave, 50.0);
    let ok = matches!(benney_small, Termination::BlowUp(_))
        && wr_small == Termination::Completed
        && saturated
        && matches!(benney_wave, Termination::BlowUp(t) if t < 50.0);
    require(
        ok,
        format!(
            "small start: Benney {benney_small:?}, WR {wr_small:?} over [0,300]; \
             saturated wave after t={duration:.1} (saturated={saturated}): Benney {benney_wave:?}"
        ),
    )
}

fn ac7() -> Check {
    let g = grid(N);
    let act = ActuatorConfig::new(5, 0.1, &g).unwrap();
    let protocol = ScanProtocol::default();
    let mut ok = true;
    let mut parts = Vec::new();
    for re in [5.0, 10.0] {
        let p = params(re, 0.05);
        let gain = design_gain(BENNEY, WR, &p, &g, &act, 0.5, SolverTag::Schur).map_err(|e| e.to_string())?;
        let lambda = closed_loop(&LinearSystem::new(WR, &p, &g, &act), &gain).unwrap().spectral_abscissa;
        let (start, _, _) = developed_wave(&p, &g, protocol.spin_up);
        let plan = ControlPlan::new(gain, act.clone(), WR, 0.0, 0.5).unwrap();
        let (verdict, reason, _, _) = classify_run(plan, p, g.clone(), &start, &protocol).map_err(|e| e.to_string())?;
        ok &= lambda < 0.0 && verdict == Verdict::Stabilised;
        parts.push(format!("Benney gain→WR Re={re}: λ*={lambda:.4}, {} ({reason})", verdict.as_str()));
    }
    let p = params(10.0, 0.05);
    let gain = design_gain(WR, BENNEY, &p, &g, &act, 0.5, SolverTag::Schur).map_err(|e| e.to_string())?;
    let lambda = closed_loop(&LinearSystem::new(BENNEY, &p, &g, &act), &gain).unwrap().spectral_abscissa;
    // A developed wave makes the Benney model blow up under any feedback, so
    // the mismatched pairing starts from a small perturbation.
    let start = initial_condition(InitialCondition::SingleMode { amplitude: 1e-3, mode: 1 }, &g, BENNEY).unwrap();
    let plan = ControlPlan::new(gain, act, BENNEY, 0.0, 0.5).unwrap();
    let (verdict, reason, _, _) = classify_run(plan, p, g, &start, &protocol).map_err(|e| e.to_string())?;
    ok &= lambda > 0.0 && verdict == Verdict::NotStabilised;
    parts.push(format!("WR gain→Benney Re=10: λ*={lambda:.4}, {} ({reason})", verdict.as_str()));
    require(ok, parts.join("; "))
}

fn ac8() -> Check {
    let cells: Vec<(f64, f64)> = [0.01, 0.05]
        .iter()
        .flat_map(|&ca| [1.0, 5.0, 10.0, 20.0].map(|re| (re, ca)))
        .collect();
    let protocol = ScanProtocol::default();
    let results: Vec<_> = std::thread::scope(|s| {
        let handles: Vec<_> = cells
            .iter()
            .map(|&(re, ca)| {
                let protocol = &protocol;
                s.spawn(move || {
                    let p = params(re, ca);
                    let n_u = count_unstable_modes(&p);
                    (re, ca, n_u, find_min_actuators(WR, WR, &p, n_u, protocol))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mut ok = true;
    let mut parts = Vec::new();
    for (re, ca, n_u, r) in results {
        match r {
            Ok(r) => {
                ok &= matches!(r.m_min, Some(m) if m <= n_u);
                let m = r.m_min.map_or("none".to_string(), |m| m.to_string());
                parts.push(format!("Re={re} Ca={ca}: M_min={m} n_u={n_u}"));
            }
            Err(e) => {
                ok = false;
                parts.push(format!("Re={re} Ca={ca}: {e}"));
            }
        }
    }
    require(ok, parts.join("; "))
}

fn ac9() -> Check {
    let g = grid(N);
    let p5 = params(5.0, 0.05);
    let mut parts = Vec::new();
    let mut ok = true;

    // Per-step mass balance with actuator forcing and variable steps.
    let act = ActuatorConfig::new(5, 0.1, &g).unwrap();
    let mut worst_balance = 0.0f64;
    for model in [BENNEY, WR] {
        let start = initial_condition(InitialCondition::SingleMode { amplitude: 0.05, mode: 2 }, &g, model).unwrap();
        let mut it = Integrator::new(model, params(3.0, 0.05), g.clone(), &start, SolverConfig::default()).unwrap();
        let mut older: Option<(Vec<f64>, f64)> = None;
        let mut prev = it.heights();
        for n in 0..500 {
            let t = it.time();
            let u = DVector::from_fn(5, |i, _| 0.02 * (t + i as f64).sin());
            let f = assemble_forcing(&ControlAmplitudes(u), &act, &g);
            let out = it.step(f.as_slice(), if n % 5 == 2 { 0.017 } else { f64::INFINITY });
            if out.status != StepStatus::Ok {
                return Err(format!("{model}: forced run failed at t={t}"));
            }
            let h = it.heights();
            let rate = match &older {
                None => (mean(&h) - mean(&prev)) / out.dt,
                Some((hm, dt_prev)) => {
                    let w = out.dt / dt_prev;
                    let c0 = (1.0 + 2.0 * w) / ((1.0 + w) * out.dt);
                    let c1 = -(1.0 + w) / out.dt;
                    let c2 = w * w / ((1.0 + w) * out.dt);
                    c0 * mean(&h) + c1 * mean(&prev) + c2 * mean(hm)
                }
            };
            worst_balance = worst_balance.max((rate - mean(f.as_slice())).abs());
            older = Some((prev, out.dt));
            prev = h;
        }
    }
    ok &= worst_balance <= 1e-10;
    parts.push(format!("mass balance {worst_balance:.1e}/step"));

    // Uncontrolled drift over 10⁴ steps.
    let zero = vec![0.0; N];
    for (model, p) in [(WR, p5), (BENNEY, params(1.0, 0.05))] {
        let start = initial_condition(InitialCondition::MultiMode { amplitude: 0.05, seed: 1 }, &g, model).unwrap();
        let mut it = Integrator::new(model, p, g.clone(), &start, SolverConfig::default()).unwrap();
        let m0 = mean(&it.heights());
        let mut drift = 0.0f64;
        for _ in 0..10_000 {
            if it.step(&zero, f64::INFINITY).status != StepStatus::Ok {
                return Err(format!("{model}: uncontrolled run failed at t={}", it.time()));
            }
            drift = drift.max((mean(&it.heights()) - m0).abs());
        }
        ok &= drift <= 1e-12;
        parts.push(format!("{model} Re={} drift {drift:.1e}", p.reynolds()));
    }

    // Fourier-restricted synthesis leaves the stable spectrum in place.
    let mut moved = 0.0f64;
    for model in [BENNEY, WR] {
        let sys = LinearSystem::new(model, &p5, &g, &act);
        let w = cost_weights(0.5, &g, model, 5).unwrap();
        let gain = fourier_restricted_gain(&sys, &w).map_err(|e| e.to_string())?;
        let open = eigenvalues(&sys.jacobian).unwrap();
        let closed = eigenvalues(&closed_loop(&sys, &gain).unwrap().a).unwrap();
        for z in open.iter().filter(|z| z.re < -1e-10) {
            let d = closed.iter().map(|c| (z - c).norm()).fold(f64::INFINITY, f64::min);
            moved = moved.max(d / (1.0 + z.norm()));
        }
    }
    ok &= moved <= 1e-10;
    parts.push(format!("stable eigenvalues moved {moved:.1e}"));

    // Rows of K are cyclic shifts for grid-aligned actuators.
    let m = 8;
    let act8 = ActuatorConfig::new(m, 0.1, &g).unwrap();
    let sys = LinearSystem::new(BENNEY, &p5, &g, &act8);
    let (gain, _) = synthesize(&sys, &cost_weights(0.5, &g, BENNEY, m).unwrap()).unwrap();
    let shift = N / m;
    let mut asym = 0.0f64;
    for r in 1..m {
        for j in 0..N {
            asym = asym.max((gain.k[(r, (j + shift) % N)] - gain.k[(r - 1, j)]).abs());
        }
    }
    asym /= gain.k.amax();
    ok &= asym <= 1e-8;
    parts.push(format!("circulant row shift {asym:.1e}"));
    require(ok, parts.join("; "))
}

fn random_field(n: usize, base: f64, amp: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| base + amp * rng.gen_range(-1.0..1.0)).collect()
}

fn fd_mismatch(x: &[f64], jac: &DMatrix<f64>, mut res: impl FnMut(&[f64], &mut [f64])) -> f64 {
    let n = x.len();
    let (mut rp, mut rm) = (vec![0.0; n], vec![0.0; n]);
    let mut worst = 0.0f64;
    for c in 0..n {
        let eps = 1e-6 * x[c].abs().max(1.0);
        let mut xp = x.to_vec();
        xp[c] += eps;
        let mut xm = x.to_vec();
        xm[c] -= eps;
        res(&xp, &mut rp);
        res(&xm, &mut rm);
        let col = jac.column(c);
        let scale = col.amax().max(1e-300);
        let err = (0..n).map(|i| ((rp[i] - rm[i]) / (2.0 * eps) - col[i]).abs()).fold(0.0, f64::max);
        worst = worst.max(err / scale);
    }
    worst
}

fn final_state(model: ModelKind, start: &InterfaceState, dt: f64, t_end: f64) -> Vec<f64> {
    let config = SolverConfig {
        dt_max: dt,
        ..SolverConfig::default()
    };
    let mut it = Integrator::new(model, params(5.0, 0.05), grid(64), start, config).unwrap();
    let zero = vec![0.0; 64];
    while it.time() < t_end - 1e-12 {
        assert_eq!(it.step(&zero, t_end - it.time()).status, StepStatus::Ok);
    }
    let s = it.state();
    s.h.iter().chain(s.q.iter().flat_map(|q| q.iter())).copied().collect()
}

fn ac10() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let p = params(10.0, 0.05);
    let n = 32;
    let dx = grid(n).spacing();
    let c0 = 30.0;
    let h = random_field(n, 1.0, 0.3, &mut rng);
    let f = random_field(n, 0.0, 0.1, &mut rng);
    let hist = random_field(n, 0.0, 1.0, &mut rng);
    let jb = benney::jacobian(&h, c0, &f, &p, dx).to_dense();
    let eb = fd_mismatch(&h, &jb, |x, out| benney::residual(x, c0, &hist, &f, &p, dx, out));
    let q = random_field(n, 0.67, 0.2, &mut rng);
    let z = wr::interleave(&h, &q);
    let hist2 = random_field(2 * n, 0.0, 1.0, &mut rng);
    let jw = wr::jacobian(&z, c0, &hist2, &f, &p, dx).to_dense();
    let ew = fd_mismatch(&z, &jw, |x, out| wr::residual(x, c0, &hist2, &f, &p, dx, out));
    let mut ok = eb <= 1e-6 && ew <= 1e-6;
    let mut parts = vec![format!("Jacobian vs FD: Benney {eb:.1e}, WR {ew:.1e}")];
    for model in [BENNEY, WR] {
        let start = initial_condition(InitialCondition::SingleMode { amplitude: 0.1, mode: 2 }, &grid(64), model).unwrap();
        let (dt, t_end) = (0.04, 4.0);
        let reference = final_state(model, &start, dt / 8.0, t_end);
        let err = |d: f64| {
            final_state(model, &start, d, t_end)
                .iter()
                .zip(&reference)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        };
        let order = (err(dt) / err(dt / 2.0)).log2();
        ok &= (order - 2.0).abs() <= 0.25;
        parts.push(format!("{model} temporal order {order:.3}"));
    }
    require(ok, parts.join("; "))
}

fn main() -> ExitCode {
    let criteria: [(&str, &str, fn() -> Check); 10] = [
        ("AC1", "preset fidelity", ac1),
        ("AC2", "dispersion convergence", ac2),
        ("AC3", "critical threshold", ac3),
        ("AC4", "CARE correctness", ac4),
        ("AC5", "stabilisation at Re=5", ac5),
        ("AC6", "blow-up dichotomy", ac6),
        ("AC7", "cross-model asymmetry", ac7),
        ("AC8", "minimum actuators", ac8),
        ("AC9", "conservation and symmetry", ac9),
        ("AC10", "Newton and BDF2 order", ac10),
    ];
    let mut failed = 0;
    for (id, title, check) in criteria {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("{id} PASS {title} ({secs:.1}s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("{id} FAIL {title} ({secs:.1}s): {detail}");
            }
        }
    }
    println!("{} of 10 criteria passed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
