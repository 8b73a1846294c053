use filmctl_core::actuators::ActuatorConfig;
use filmctl_core::control::{
    design_gain, evaluate_cost, evaluate_cost_until, find_min_actuators, fit_damping_rate, run_controlled, spin_up,
    ControlError, ControlPlan, RunOptions, ScanProtocol, Termination,
};
use filmctl_core::linear::LinearSystem;
use filmctl_core::lqr::{closed_loop, GainMatrix, SolverTag};
use filmctl_core::model::{FlowParameters, Grid, ModelKind};
use filmctl_core::solver::{initial_condition, InitialCondition, Integrator, SolverConfig, StepStatus};
use proptest::prelude::*;

fn setup(n: usize, m: usize) -> (FlowParameters, Grid, ActuatorConfig) {
    let p = FlowParameters::with_defaults(5.0, 0.05).unwrap();
    let grid = Grid::new(n, 30.0).unwrap();
    let act = ActuatorConfig::new(m, 0.1, &grid).unwrap();
    (p, grid, act)
}

#[test]
fn inactive_zero_gain_reproduces_the_uncontrolled_stepper() {
    let (p, grid, act) = setup(64, 3);
    for model in [ModelKind::Benney, ModelKind::WeightedResidual] {
        let start = initial_condition(InitialCondition::MultiMode { amplitude: 0.05, seed: 5 }, &grid, model).unwrap();
        let plan = ControlPlan::new(GainMatrix::zeros(3, 64), act.clone(), model, 1e9, 0.5).unwrap();
        let res = run_controlled(plan, p, grid.clone(), &start, 12.0, RunOptions::default()).unwrap();

        let mut it = Integrator::new(model, p, grid.clone(), &start, SolverConfig::default()).unwrap();
        let zero = vec![0.0; 64];
        let mut times = vec![0.0];
        while it.time() < 12.0 - 1e-9 {
            assert_eq!(it.step(&zero, 12.0 - it.time()).status, StepStatus::Ok);
            times.push(it.time());
        }
        assert_eq!(res.times, times);
        let expected = it.state();
        assert!(res.final_state.h.iter().zip(expected.h.iter()).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert_eq!(res.final_state.q, expected.q);
        assert_eq!(res.accumulated_cost, 0.0);
        assert!(res.control_history.iter().all(|u| u.0.iter().all(|&v| v == 0.0)));
    }
}

#[test]
fn feedback_starts_at_activation() {
    let (p, grid, act) = setup(64, 5);
    let start = initial_condition(InitialCondition::SingleMode { amplitude: 0.01, mode: 1 }, &grid, ModelKind::Benney).unwrap();
    let gain = design_gain(ModelKind::Benney, ModelKind::Benney, &p, &grid, &act, 0.5, SolverTag::Schur).unwrap();
    let plan = ControlPlan::new(gain, act, ModelKind::Benney, 5.0, 0.5).unwrap();
    let res = run_controlled(plan, p, grid, &start, 10.0, RunOptions::default()).unwrap();
    for (t, u) in res.times.iter().zip(&res.control_history) {
        let active = u.0.iter().any(|&v| v != 0.0);
        assert_eq!(active, *t >= 5.0, "t = {t}");
    }
    let before = res.times.iter().position(|&t| t >= 5.0).unwrap();
    assert!(res.cost_history[..=before].iter().all(|&c| c == 0.0));
    assert!(res.accumulated_cost > 0.0);
}

/// Relative gap between the fitted decay rate of a small-start run and λ*.
fn small_start_gap(model: ModelKind) -> (f64, f64, f64) {
    let (p, grid, act) = setup(256, 5);
    let start = initial_condition(InitialCondition::MultiMode { amplitude: 1e-3, seed: 7 }, &grid, model).unwrap();
    let gain = design_gain(model, model, &p, &grid, &act, 0.5, SolverTag::Schur).unwrap();
    let lambda = closed_loop(&LinearSystem::new(model, &p, &grid, &act), &gain).unwrap().spectral_abscissa;
    let plan = ControlPlan::new(gain, act, model, 0.0, 0.5).unwrap();
    let res = run_controlled(plan, p, grid, &start, 150.0, RunOptions::default()).unwrap();
    assert_eq!(res.termination, Termination::Completed);
    let fit = fit_damping_rate(&res).unwrap();
    assert!(fit.confident);
    (fit.rate, lambda, ((fit.rate - lambda) / lambda).abs())
}

#[test]
fn small_start_decay_matches_spectral_abscissa_wr() {
    let (rate, lambda, gap) = small_start_gap(ModelKind::WeightedResidual);
    assert!(gap <= 0.10, "fitted {rate:.4} vs λ* {lambda:.4}");
}

#[test]
fn small_start_decay_matches_spectral_abscissa_benney() {
    let (rate, lambda, gap) = small_start_gap(ModelKind::Benney);
    assert!(gap <= 0.10, "fitted {rate:.4} vs λ* {lambda:.4}");
}

#[test]
fn cost_tail_bound_accounts_for_the_truncated_integral() {
    let (p, grid, act) = setup(128, 5);
    let start = initial_condition(InitialCondition::SingleMode { amplitude: 0.01, mode: 1 }, &grid, ModelKind::WeightedResidual).unwrap();
    let gain = design_gain(ModelKind::Benney, ModelKind::WeightedResidual, &p, &grid, &act, 0.5, SolverTag::Schur).unwrap();
    let plan = ControlPlan::new(gain, act, ModelKind::WeightedResidual, 0.0, 0.5).unwrap();
    let res = run_controlled(plan, p, grid, &start, 200.0, RunOptions::default()).unwrap();
    let full = evaluate_cost(&res, 0.5);
    assert!((full.kappa - res.accumulated_cost).abs() <= 1e-12 * full.kappa);
    let partial = evaluate_cost_until(&res, 0.5, 40.0);
    let remainder = full.kappa - partial.kappa;
    let tail = partial.tail_bound.expect("decaying run");
    assert!(remainder > 0.0 && (tail - remainder).abs() <= 0.5 * remainder, "tail {tail:e}, remainder {remainder:e}");
    assert!(full.tail_bound.unwrap() < 1e-6 * full.kappa);
}

#[test]
fn zero_spin_up_returns_the_start() {
    let (p, grid, _) = setup(64, 1);
    let ic = initial_condition(InitialCondition::SingleMode { amplitude: 0.02, mode: 2 }, &grid, ModelKind::WeightedResidual).unwrap();
    let s = spin_up(ModelKind::WeightedResidual, p, grid, &ic, 0.0, SolverConfig::default()).unwrap();
    assert_eq!(s.state, ic);
    assert_eq!(s.duration, 0.0);
    assert!(!s.saturated);
}

#[test]
fn benney_spin_up_reports_blow_up() {
    let p = FlowParameters::with_defaults(10.0, 0.05).unwrap();
    let grid = Grid::new(128, 30.0).unwrap();
    let ic = initial_condition(InitialCondition::SingleMode { amplitude: 0.1, mode: 1 }, &grid, ModelKind::Benney).unwrap();
    match spin_up(ModelKind::Benney, p, grid, &ic, 100.0, SolverConfig::default()) {
        Err(ControlError::SpinUpBlowUp { time }) => assert!(time < 100.0),
        other => panic!("expected blow-up, got {other:?}"),
    }
}

#[test]
fn stable_film_needs_a_single_actuator() {
    let p = FlowParameters::with_defaults(0.5, 0.05).unwrap();
    let protocol = ScanProtocol {
        grid_points: 64,
        spin_up: 20.0,
        initial: InitialCondition::SingleMode { amplitude: 0.05, mode: 1 },
        ..ScanProtocol::default()
    };
    let r = find_min_actuators(ModelKind::WeightedResidual, ModelKind::WeightedResidual, &p, 3, &protocol).unwrap();
    assert_eq!(r.unstable_modes, 1);
    assert_eq!(r.m_min, Some(1));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn cost_never_decreases(seed in 0u64..1000, beta in 0.1f64..0.9, activation in 0.0f64..10.0, wr in any::<bool>()) {
        let model = if wr { ModelKind::WeightedResidual } else { ModelKind::Benney };
        let (p, grid, act) = setup(64, 5);
        let start = initial_condition(InitialCondition::MultiMode { amplitude: 0.05, seed }, &grid, model).unwrap();
        let gain = design_gain(model, model, &p, &grid, &act, beta, SolverTag::Schur).unwrap();
        let plan = ControlPlan::new(gain, act, model, activation, beta).unwrap();
        let res = run_controlled(plan, p, grid, &start, 25.0, RunOptions::default()).unwrap();
        let n = res.len();
        prop_assert!(n > 1);
        prop_assert_eq!(res.deviation_norms.len(), n);
        prop_assert_eq!(res.control_history.len(), n);
        prop_assert_eq!(res.cost_history.len(), n);
        prop_assert!(res.times.windows(2).all(|w| w[1] > w[0]));
        prop_assert!(res.cost_history.windows(2).all(|w| w[1] >= w[0]));
        prop_assert_eq!(*res.cost_history.last().unwrap(), res.accumulated_cost);
    }
}
