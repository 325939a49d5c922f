use hsc_core::dispersion::{compute_l_n, compute_q_n};
use hsc_core::elliptic::GridConfig;
use hsc_core::evolution::{initial_shape, simulate, EvolutionError, Evolver, SimulationConfig, SimulationState, Termination};
use hsc_core::geometry::InterfaceShape;
use hsc_core::params::{CellModel, DerivedCoeffs};
use hsc_core::spectral::CircleFunction;
use hsc_core::verify::{coriolis_variant, p0, p0_reversed};

fn grid() -> GridConfig {
    GridConfig {
        n: 32,
        m_inner: 48,
        m_outer: 48,
    }
}

#[test]
fn r_at_rest_multiplies_by_l_n() {
    let m = coriolis_variant();
    let ev = Evolver::new(m, grid()).unwrap();
    let circle = InterfaceShape::circle(32).unwrap();
    for n in 1..=5i64 {
        let z = CircleFunction::from_fn(32, |t| (n as f64 * t).cos()).unwrap();
        let rz = ev.apply_r(&circle, &z).unwrap();
        let l = compute_l_n(&m.coeffs, m.cell_radius, n).unwrap();
        // l_n e^{inθ} + conj, halved
        let expected = CircleFunction::from_fn(32, |t| l.re * (n as f64 * t).cos() - l.im * (n as f64 * t).sin()).unwrap();
        assert!(rz.sub(&expected).max_abs() < 1e-10, "mode {n}");
    }
}

#[test]
fn velocity_at_rest_vanishes() {
    let ev = Evolver::new(p0(), grid()).unwrap();
    let f = ev.velocity_functional(&InterfaceShape::circle(32).unwrap()).unwrap();
    assert!(f.max_abs() <= 1e-12);
}

#[test]
fn small_amplitude_velocity_follows_q_n() {
    let m = coriolis_variant();
    let ev = Evolver::new(m, grid()).unwrap();
    let eps = 1e-5;
    for n in [1i64, 2, 3] {
        let h = CircleFunction::from_fn(32, |t| (n as f64 * t).cos()).unwrap();
        let f = ev.velocity_functional(&InterfaceShape::new(h.scaled(eps)).unwrap()).unwrap().scaled(1.0 / eps);
        let q = compute_q_n(&m.coeffs, m.sigma, m.cell_radius, n).unwrap();
        let expected = CircleFunction::from_fn(32, |t| q.re * (n as f64 * t).cos() - q.im * (n as f64 * t).sin()).unwrap();
        let rel = f.sub(&expected).max_abs() / expected.max_abs();
        assert!(rel <= 1e-3, "mode {n}: {rel}");
    }
}

#[test]
fn inversion_residual_on_a_perturbed_shape() {
    let ev = Evolver::new(coriolis_variant(), grid()).unwrap();
    let shape = initial_shape(32, &[(2, 0.02, 0.01), (3, -0.01, 0.0)]).unwrap();
    let rhs = CircleFunction::from_fn(32, |t| t.sin() + 0.3 * (4.0 * t).cos()).unwrap();
    let inv = ev.invert_one_minus_r(&shape, &rhs).unwrap();
    let back = inv.w.sub(&ev.apply_r(&shape, &inv.w).unwrap());
    assert!(back.sub(&rhs).max_abs() <= 1e-10 * rhs.max_abs());
}

#[test]
fn single_step_amplification_tends_to_exponential() {
    let ev = Evolver::new(p0(), grid()).unwrap();
    let q2 = -150.0 / 49.0;
    let eps = 1e-8;
    let shape = initial_shape(32, &[(2, eps, 0.0)]).unwrap();
    let mut prev = f64::INFINITY;
    for dt in [0.1, 0.05, 0.025] {
        let next = ev.step_imex(&SimulationState::new(shape.clone()), dt).unwrap();
        let gain = next.shape.rho().to_spectral().get(2).re / eps;
        assert!((gain - 1.0 / (1.0 - dt * q2)).abs() < 1e-6);
        let gap = (gain - (q2 * dt).exp()).abs() / (q2 * dt).exp();
        assert!(gap < prev);
        prev = gap;
    }
}

#[test]
fn time_step_error_is_first_order() {
    // nonlinear run compared against a dt/8 reference
    let m = p0();
    let run = |dt: f64| {
        let cfg = SimulationConfig {
            model: m,
            grid: grid(),
            initial: vec![(2, 0.02, 0.0), (3, 0.0, 0.01)],
            dt: Some(dt),
            t_end: 0.2,
            snapshot_every: 1000,
            stop_amplitude: None,
        };
        let r = simulate(&cfg).unwrap();
        assert_eq!(r.termination, Termination::Completed);
        r.snapshots.last().unwrap().spectrum.clone()
    };
    let reference = run(0.0025);
    let err = |s: Vec<num_complex::Complex64>| s.iter().zip(&reference).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    let e1 = err(run(0.02));
    let e2 = err(run(0.01));
    let ratio = e1 / e2;
    assert!((ratio - 2.0).abs() <= 0.4, "ratio {ratio}");
}

#[test]
fn zero_start_stays_bitwise_zero() {
    let cfg = SimulationConfig {
        model: coriolis_variant(),
        grid: grid(),
        initial: vec![],
        dt: None,
        t_end: 1.0,
        snapshot_every: 3,
        stop_amplitude: None,
    };
    let run = simulate(&cfg).unwrap();
    assert!(run.snapshots.len() > 3);
    for s in &run.snapshots {
        assert!(s.spectrum.iter().all(|c| c.re == 0.0 && c.im == 0.0));
        assert_eq!(s.area_drift, 0.0);
    }
}

#[test]
fn stable_run_decays_monotonically_and_conserves_area() {
    let cfg = SimulationConfig {
        model: p0(),
        grid: grid(),
        initial: vec![(2, 5e-5, 0.0)],
        dt: Some(0.01),
        t_end: 1.0,
        snapshot_every: 5,
        stop_amplitude: None,
    };
    let run = simulate(&cfg).unwrap();
    let amps: Vec<f64> = run.snapshots.iter().map(|s| s.mode(2).norm()).collect();
    assert!(amps.windows(2).all(|w| w[1] < w[0]));
    assert!(run.monitors.max_area_drift < 1e-6);
}

#[test]
fn unstable_run_hits_the_regime_guard() {
    let cfg = SimulationConfig {
        model: p0_reversed(),
        grid: grid(),
        initial: vec![(1, 0.03, 0.0)],
        dt: Some(0.05),
        t_end: 20.0,
        snapshot_every: 10,
        stop_amplitude: None,
    };
    let run = simulate(&cfg).unwrap();
    match &run.termination {
        Termination::Failed(msg) => assert!(msg.contains("admissible"), "{msg}"),
        other => panic!("expected the guard to stop the run, got {other:?}"),
    }
    let amps: Vec<f64> = run.snapshots.iter().map(|s| s.max_rho).collect();
    assert!(amps.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn runs_are_deterministic() {
    let cfg = SimulationConfig {
        model: coriolis_variant(),
        grid: grid(),
        initial: vec![(1, 0.01, -0.004), (3, 0.002, 0.003)],
        dt: Some(0.02),
        t_end: 0.1,
        snapshot_every: 1,
        stop_amplitude: None,
    };
    assert_eq!(simulate(&cfg).unwrap(), simulate(&cfg).unwrap());
}

#[test]
fn bad_inputs_are_rejected() {
    let ev = Evolver::new(p0(), grid()).unwrap();
    let state = SimulationState::new(InterfaceShape::circle(32).unwrap());
    assert!(matches!(ev.step_imex(&state, 0.0), Err(EvolutionError::BadStep(_))));
    assert!(matches!(initial_shape(32, &[(17, 1e-3, 0.0)]), Err(EvolutionError::ModeOutOfRange { .. })));
    assert!(initial_shape(32, &[(1, 0.2, 0.0)]).is_err());
    let m = CellModel::from_derived(DerivedCoeffs::new(1.0, 1.0, 0.0, 0.0, 0.0, 0.0), 1.0, 2.0).unwrap();
    assert!(Evolver::new(m, GridConfig { n: 24, m_inner: 32, m_outer: 32 }).is_err());
}
