//! Acceptance suite: one test per criterion, each printing its verdict line.

use hsc_core::dispersion::{compute_l_n, DispersionError};
use hsc_core::params::DerivedCoeffs;
use hsc_core::verify::{run, Formulas, VerifyOptions};
use num_complex::Complex64;

fn check(id: u8) {
    let result = run(id, &VerifyOptions::default());
    println!("{result}");
    assert!(result.passed, "{result}");
}

#[test]
fn criterion_1_dispersion_oracle() {
    check(1);
}

#[test]
fn criterion_2_known_values() {
    check(2);
}

#[test]
fn criterion_3_elliptic_exact_modes() {
    check(3);
}

#[test]
fn criterion_4_stable_decay() {
    check(4);
}

#[test]
fn criterion_5_unstable_growth() {
    check(5);
}

#[test]
fn criterion_6_conservation() {
    check(6);
}

#[test]
fn criterion_7_linearization() {
    check(7);
}

#[test]
fn criterion_8_spectral_bound() {
    check(8);
}

#[test]
fn criterion_9_structural() {
    check(9);
}

fn skewed_l_n(c: &DerivedCoeffs, r: f64, n: i64) -> Result<Complex64, DispersionError> {
    Ok(compute_l_n(c, r, n)? * (1.0 + 1e-6))
}

#[test]
fn oracle_catches_faulty_l_n() {
    let opts = VerifyOptions {
        formulas: Formulas {
            l_n: skewed_l_n,
            ..Formulas::default()
        },
        ..VerifyOptions::default()
    };
    let result = run(1, &opts);
    println!("fault injection: {result}");
    assert!(!result.passed);
}
