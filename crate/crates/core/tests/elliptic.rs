use hsc_core::elliptic::{outer_flux_symbol, solve_inner_exact, EllipticSolver, GridConfig};
use hsc_core::geometry::InterfaceShape;
use hsc_core::params::DerivedCoeffs;
use hsc_core::spectral::{CircleFunction, SpectralCoeffs};
use num_complex::Complex64;
use proptest::prelude::*;

fn coriolis() -> DerivedCoeffs {
    DerivedCoeffs::new(1.0, 2.0, 0.5, 1.5, 0.0, 1.0)
}

fn grid() -> GridConfig {
    GridConfig {
        n: 32,
        m_inner: 48,
        m_outer: 48,
    }
}

fn shape_from(n: usize, coeffs: &[(f64, f64)], amplitude: f64) -> InterfaceShape {
    let mut spec = SpectralCoeffs::zeros(n).unwrap();
    for (k, &(a, b)) in coeffs.iter().enumerate() {
        spec.set_mode(k as i64 + 1, Complex64::new(a, b) / (1.0 + k as f64).powi(2));
    }
    let rho = spec.from_spectral().unwrap();
    let scale = amplitude / rho.max_abs().max(1e-300);
    InterfaceShape::new(rho.scaled(scale)).unwrap()
}

#[test]
fn inner_solution_of_a_single_mode_is_r_to_the_n() {
    let c = coriolis();
    let solver = EllipticSolver::new(c, 2.0, grid()).unwrap();
    let circle = InterfaceShape::circle(32).unwrap();
    let h = CircleFunction::from_fn(32, |t| (4.0 * t).sin()).unwrap();
    let (q, flux, _) = solver.solve_inner(&circle, &h).unwrap();
    let exact = solve_inner_exact(&c, &h.to_spectral(), solver.disk_grid());
    assert!(q.max_abs_diff(&exact) < 1e-10 * exact.max_abs());
    for (a, b) in flux.values.values().iter().zip(h.values()) {
        assert!((a - b).abs() < 1e-10);
    }
}

#[test]
fn outer_flux_of_each_mode_matches_its_symbol() {
    let c = coriolis();
    let solver = EllipticSolver::new(c, 3.0, grid()).unwrap();
    let circle = InterfaceShape::circle(32).unwrap();
    for n in 1..=6i64 {
        let g = CircleFunction::from_fn(32, |t| (n as f64 * t).cos()).unwrap();
        let (_, flux, _) = solver.solve_outer(&circle, &g).unwrap();
        let sym = outer_flux_symbol(&c, 3.0, n);
        let expected = CircleFunction::from_fn(32, |t| (sym * Complex64::new(0.0, n as f64 * t).exp()).re).unwrap();
        assert!(flux.values.sub(&expected).max_abs() < 1e-9, "mode {n}");
    }
}

#[test]
fn solvers_reject_mismatched_sizes() {
    let solver = EllipticSolver::new(coriolis(), 2.0, grid()).unwrap();
    let shape = InterfaceShape::circle(64).unwrap();
    let h = CircleFunction::zeros(64).unwrap();
    assert!(solver.solve_inner(&shape, &h).is_err());
    assert!(EllipticSolver::new(coriolis(), 2.0, GridConfig { n: 32, m_inner: 8, m_outer: 48 }).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    /// The outer flux integrates to zero against (1+ρ) on any admissible
    /// shape (no flux through the rim), and the inner solve satisfies its
    /// mean constraint.
    #[test]
    fn gauss_identity_on_random_shapes(
        coeffs in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 4),
        amp in 0.005f64..0.06,
        data in prop::collection::vec(-1.0f64..1.0, 3),
    ) {
        let c = coriolis();
        let solver = EllipticSolver::new(c, 2.0, GridConfig::default()).unwrap();
        let shape = shape_from(64, &coeffs, amp);
        let g = CircleFunction::from_fn(64, |t| data[0] * t.cos() + data[1] * (2.0 * t).sin() + data[2]).unwrap();
        let (_, flux, _) = solver.solve_outer(&shape, &g).unwrap();
        let total = flux.weighted_integral(&shape);
        prop_assert!(total.abs() < 1e-9, "total {total:e} amp {amp}");
        let (q, _, _) = solver.solve_inner(&shape, &g).unwrap();
        prop_assert!((q.trace().mean() - g.mean()).abs() < 1e-11);
    }
}
