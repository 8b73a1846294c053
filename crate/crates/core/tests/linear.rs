use filmctl_core::linalg::eigenvalues;
use filmctl_core::linear::{
    build_jacobian, count_unstable_modes, critical_wavenumber, dispersion_benney, dispersion_wr, fourier_spectrum,
};
use filmctl_core::model::{FlowParameters, Grid, ModelKind};
use num_complex::Complex64;
use proptest::prelude::*;

/// Distance from each discrete eigenvalue of mode `m` to the nearest analytic root.
fn mode_error(model: ModelKind, params: &FlowParameters, n: usize, m: i64) -> f64 {
    let grid = Grid::new(n, params.aspect()).unwrap();
    let spectrum = fourier_spectrum(model, params, &grid);
    let mode = spectrum.iter().find(|s| s.mode == m).unwrap();
    let exact: Vec<Complex64> = match model {
        ModelKind::Benney => vec![dispersion_benney(mode.wavenumber, params)],
        ModelKind::WeightedResidual => {
            let (a, b) = dispersion_wr(mode.wavenumber, params);
            vec![a, b]
        }
    };
    mode.values
        .iter()
        .map(|z| exact.iter().map(|e| (z - e).norm()).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

/// Observed order between N = 128 and N = 256 for every mode resolved at
/// half the coarse Nyquist wavenumber.
fn observed_orders(model: ModelKind, params: &FlowParameters) -> Vec<(i64, f64)> {
    let coarse = Grid::new(128, params.aspect()).unwrap();
    let k_limit = 0.5 * std::f64::consts::PI / coarse.spacing();
    (1..64)
        .filter(|&m| coarse.wavenumber(m) < k_limit)
        .map(|m| {
            let ratio = mode_error(model, params, 128, m) / mode_error(model, params, 256, m);
            (m, ratio.log2())
        })
        .collect()
}

#[test]
fn benney_eigenvalues_converge_at_second_order() {
    let p = FlowParameters::with_defaults(5.0, 0.05).unwrap();
    for (m, order) in observed_orders(ModelKind::Benney, &p) {
        assert!((order - 2.0).abs() <= 0.2, "mode {m}: order {order}");
    }
}

#[test]
fn wr_eigenvalues_converge_at_second_order() {
    let p = FlowParameters::with_defaults(5.0, 0.05).unwrap();
    for (m, order) in observed_orders(ModelKind::WeightedResidual, &p) {
        assert!((order - 2.0).abs() <= 0.2, "mode {m}: order {order}");
    }
}

#[test]
fn wr_pair_solves_its_quadratic() {
    let p = FlowParameters::with_defaults(5.0, 0.05).unwrap();
    let grid = Grid::new(256, 30.0).unwrap();
    let dense = eigenvalues(&build_jacobian(ModelKind::WeightedResidual, &p, &grid).jacobian).unwrap();
    let mut from_symbols: Vec<Complex64> = fourier_spectrum(ModelKind::WeightedResidual, &p, &grid)
        .into_iter()
        .flat_map(|s| s.values)
        .collect();
    assert_eq!(dense.len(), from_symbols.len());
    for z in &dense {
        let (i, d) = from_symbols
            .iter()
            .enumerate()
            .map(|(i, w)| (i, (z - w).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        assert!(d < 1e-8 * (1.0 + z.norm()), "{z} unmatched ({d:e})");
        from_symbols.swap_remove(i);
    }
}

#[test]
fn unstable_count_matches_open_loop_spectrum() {
    for (re, ca, theta) in [(5.0, 0.05, std::f64::consts::FRAC_PI_3), (1.0, 0.05, 1.0), (10.0, 0.01, 0.8), (20.0, 0.05, 1.2)] {
        let p = FlowParameters::new(re, ca, theta, 30.0).unwrap();
        let grid = Grid::new(128, 30.0).unwrap();
        let n_u = count_unstable_modes(&p);
        for model in [ModelKind::Benney, ModelKind::WeightedResidual] {
            let dense = eigenvalues(&build_jacobian(model, &p, &grid).jacobian).unwrap();
            let unstable = dense.iter().filter(|z| z.re > -1e-10).count();
            assert_eq!(unstable, n_u, "{model} Re={re} Ca={ca} θ={theta}");
        }
    }
}

#[test]
fn critical_wavenumber_vanishes_at_threshold() {
    let theta = std::f64::consts::FRAC_PI_3;
    let threshold = 1.25 / theta.tan();
    let k0 = |re: f64| critical_wavenumber(&FlowParameters::new(re, 0.05, theta, 30.0).unwrap());
    let (mut lo, mut hi) = (0.1 * threshold, 10.0 * threshold);
    assert_eq!(k0(lo), 0.0);
    assert!(k0(hi) > 0.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if k0(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    assert!((hi - threshold).abs() < 1e-12 * threshold, "{hi} vs {threshold}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn critical_wavenumber_is_a_neutral_point_of_both_models(re in 0.5f64..40.0, ca in 0.005f64..0.2, theta in 0.2f64..1.4) {
        let p = FlowParameters::new(re, ca, theta, 30.0).unwrap();
        let k0 = critical_wavenumber(&p);
        prop_assume!(k0 > 1e-3);
        prop_assert!(dispersion_benney(k0, &p).re.abs() < 1e-10);
        let (a, b) = dispersion_wr(k0, &p);
        prop_assert!(a.re.max(b.re).abs() < 1e-10);
        prop_assert!(dispersion_benney(0.9 * k0, &p).re > 0.0);
        prop_assert!(dispersion_benney(1.1 * k0, &p).re < 0.0);
        prop_assert!(dispersion_wr(0.9 * k0, &p).0.re > 0.0);
        prop_assert!(dispersion_wr(1.1 * k0, &p).0.re < 0.0);
    }

    #[test]
    fn unstable_count_follows_the_mode_formula(re in 0.5f64..40.0, ca in 0.005f64..0.2) {
        let p = FlowParameters::with_defaults(re, ca).unwrap();
        let pairs = (critical_wavenumber(&p) * p.aspect() / (2.0 * std::f64::consts::PI)).floor() as usize;
        prop_assert_eq!(count_unstable_modes(&p), 1 + 2 * pairs);
    }
}
