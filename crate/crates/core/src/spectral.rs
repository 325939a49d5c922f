//! Fourier calculus for real 2π-periodic functions sampled on a uniform grid.
//!
//! Samples live at θ_k = 2πk/N. Coefficients use the normalization
//! ĥ_n = (1/N) Σ_k h(θ_k) e^{−inθ_k}, stored in FFT order. The Nyquist entry
//! (index N/2) holds the aliased pair ±N/2; odd-order derivatives treat it as
//! unresolved and zero it.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;
use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;
use thiserror::Error;

/// Smallest supported collocation size.
pub const MIN_POINTS: usize = 16;

/// Tolerance for Hermitian symmetry checks, relative to the largest coefficient.
pub const HERMITIAN_TOL: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum SpectralError {
    #[error("collocation size {0} is not a power of two ≥ 16")]
    BadSize(usize),
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("coefficients violate Hermitian symmetry at mode {mode} (defect {defect:.3e})")]
    NotHermitian { mode: i64, defect: f64 },
    #[error("size mismatch: {0} vs {1}")]
    SizeMismatch(usize, usize),
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub(crate) fn forward_plan(n: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(n))
}

pub(crate) fn inverse_plan(n: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(n))
}

/// Signed wavenumber of FFT index `idx`; the Nyquist index maps to +N/2.
pub fn wavenumber(idx: usize, n: usize) -> i64 {
    if idx <= n / 2 {
        idx as i64
    } else {
        idx as i64 - n as i64
    }
}

pub(crate) fn check_size(n: usize) -> Result<(), SpectralError> {
    if n >= MIN_POINTS && n.is_power_of_two() {
        Ok(())
    } else {
        Err(SpectralError::BadSize(n))
    }
}

/// Real samples of a function on the unit circle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CircleFunction {
    values: Vec<f64>,
}

impl CircleFunction {
    pub fn new(values: Vec<f64>) -> Result<Self, SpectralError> {
        check_size(values.len())?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(SpectralError::NonFinite(i));
        }
        Ok(Self { values })
    }

    pub fn zeros(n: usize) -> Result<Self, SpectralError> {
        Self::constant(n, 0.0)
    }

    pub fn constant(n: usize, c: f64) -> Result<Self, SpectralError> {
        Self::new(vec![c; n])
    }

    /// Samples `f` at the collocation nodes.
    pub fn from_fn(n: usize, f: impl Fn(f64) -> f64) -> Result<Self, SpectralError> {
        Self::new(nodes(n).into_iter().map(f).collect())
    }

    pub(crate) fn from_vec_unchecked(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn nodes(&self) -> Vec<f64> {
        nodes(self.len())
    }

    pub fn to_spectral(&self) -> SpectralCoeffs {
        let n = self.len();
        let mut buf: Vec<Complex64> = self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        forward_plan(n).process(&mut buf);
        let scale = 1.0 / n as f64;
        buf.iter_mut().for_each(|c| *c *= scale);
        SpectralCoeffs { coeffs: buf }
    }

    /// Spectral derivative of the given order, multiplier (in)^order.
    pub fn differentiate(&self, order: u32) -> CircleFunction {
        if order == 0 {
            return self.clone();
        }
        let n = self.len();
        let nyq = (n / 2) as i64;
        self.to_spectral()
            .apply_multiplier(|k| {
                if k == nyq {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(0.0, k as f64).powu(order)
                }
            })
            .to_real()
    }

    /// Trapezoidal mean, equal to ĥ_0.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.len() as f64
    }

    /// ∫_0^{2π} f dθ by the trapezoidal rule.
    pub fn integrate(&self) -> f64 {
        2.0 * PI * self.mean()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() / self.len() as f64).sqrt()
    }

    /// Trigonometric interpolant evaluated at an arbitrary angle.
    pub fn eval_at(&self, theta: f64) -> f64 {
        self.to_spectral().eval_at(theta)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> CircleFunction {
        Self::from_vec_unchecked(self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &CircleFunction, f: impl Fn(f64, f64) -> f64) -> CircleFunction {
        assert_eq!(self.len(), other.len(), "circle functions on different grids");
        Self::from_vec_unchecked(self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect())
    }

    pub fn scaled(&self, a: f64) -> CircleFunction {
        self.map(|v| a * v)
    }

    pub fn add(&self, other: &CircleFunction) -> CircleFunction {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &CircleFunction) -> CircleFunction {
        self.zip_map(other, |a, b| a - b)
    }

    /// Index shift by `shift` nodes: rotation by 2π·shift/N.
    pub fn rotated(&self, shift: usize) -> CircleFunction {
        let n = self.len();
        Self::from_vec_unchecked((0..n).map(|k| self.values[(k + n - shift % n) % n]).collect())
    }

    pub fn dealiased(&self) -> CircleFunction {
        self.to_spectral().dealias().to_real()
    }
}

/// Collocation nodes θ_k = 2πk/N.
pub fn nodes(n: usize) -> Vec<f64> {
    (0..n).map(|k| 2.0 * PI * k as f64 / n as f64).collect()
}

/// Fourier coefficients ĥ_n for |n| ≤ N/2, FFT order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralCoeffs {
    coeffs: Vec<Complex64>,
}

impl SpectralCoeffs {
    pub fn zeros(n: usize) -> Result<Self, SpectralError> {
        check_size(n)?;
        Ok(Self {
            coeffs: vec![Complex64::new(0.0, 0.0); n],
        })
    }

    /// Raw FFT-ordered coefficients; no symmetry check.
    pub fn from_fft_order(coeffs: Vec<Complex64>) -> Result<Self, SpectralError> {
        check_size(coeffs.len())?;
        Ok(Self { coeffs })
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn nyquist(&self) -> i64 {
        (self.len() / 2) as i64
    }

    fn index(&self, n: i64) -> usize {
        let len = self.len() as i64;
        assert!(n.abs() <= len / 2, "mode {n} outside |n| ≤ {}", len / 2);
        n.rem_euclid(len) as usize
    }

    /// ĥ_n for |n| ≤ N/2.
    pub fn get(&self, n: i64) -> Complex64 {
        self.coeffs[self.index(n)]
    }

    /// Sets ĥ_n and its conjugate partner ĥ_{−n}. The mean and Nyquist
    /// entries keep only the real part.
    pub fn set_mode(&mut self, n: i64, value: Complex64) {
        let i = self.index(n);
        if n == 0 || n.abs() == self.nyquist() {
            self.coeffs[i] = Complex64::new(value.re, 0.0);
        } else {
            self.coeffs[i] = value;
            let j = self.index(-n);
            self.coeffs[j] = value.conj();
        }
    }

    /// Largest Hermitian-symmetry defect and the mode where it occurs.
    pub fn hermitian_defect(&self) -> (i64, f64) {
        let n = self.len();
        let mut worst = (0i64, 0.0f64);
        for idx in 0..=n / 2 {
            let k = wavenumber(idx, n);
            let d = if idx == 0 || idx == n / 2 {
                self.coeffs[idx].im.abs()
            } else {
                (self.coeffs[n - idx] - self.coeffs[idx].conj()).norm()
            };
            if d > worst.1 {
                worst = (k, d);
            }
        }
        worst
    }

    fn scale(&self) -> f64 {
        self.coeffs.iter().fold(1.0f64, |m, c| m.max(c.norm()))
    }

    /// Real samples of the truncated series.
    pub fn from_spectral(&self) -> Result<CircleFunction, SpectralError> {
        let (mode, defect) = self.hermitian_defect();
        if defect > HERMITIAN_TOL * self.scale() {
            return Err(SpectralError::NotHermitian { mode, defect });
        }
        Ok(self.to_real())
    }

    /// Inverse transform keeping the real part, for coefficients known to be
    /// Hermitian by construction.
    pub(crate) fn to_real(&self) -> CircleFunction {
        let n = self.len();
        let mut buf = self.coeffs.clone();
        inverse_plan(n).process(&mut buf);
        CircleFunction::from_vec_unchecked(buf.iter().map(|c| c.re).collect())
    }

    /// Coefficientwise product ĥ_n·M_n; `m` receives the signed wavenumber.
    pub fn apply_multiplier(&self, m: impl Fn(i64) -> Complex64) -> SpectralCoeffs {
        let n = self.len();
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(idx, c)| c * m(wavenumber(idx, n)))
            .collect();
        SpectralCoeffs { coeffs }
    }

    /// Two-thirds rule: zero every mode with |n| > N/3.
    pub fn dealias(&self) -> SpectralCoeffs {
        let n = self.len() as i64;
        self.apply_multiplier(|k| {
            if 3 * k.abs() > n {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(1.0, 0.0)
            }
        })
    }

    /// Σ|ĥ_n|², which equals the mean of h² (Parseval).
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn eval_at(&self, theta: f64) -> f64 {
        let n = self.len();
        let nyq = n / 2;
        let mut acc = self.coeffs[0].re + self.coeffs[nyq].re * (nyq as f64 * theta).cos();
        for idx in 1..nyq {
            let e = Complex64::from_polar(1.0, idx as f64 * theta);
            acc += 2.0 * (self.coeffs[idx] * e).re;
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, seed: u64) -> CircleFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        CircleFunction::new((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn rejects_bad_sizes() {
        assert_eq!(CircleFunction::zeros(12).unwrap_err(), SpectralError::BadSize(12));
        assert_eq!(CircleFunction::zeros(8).unwrap_err(), SpectralError::BadSize(8));
        assert!(CircleFunction::zeros(16).is_ok());
        let mut v = vec![0.0; 16];
        v[3] = f64::NAN;
        assert_eq!(CircleFunction::new(v).unwrap_err(), SpectralError::NonFinite(3));
    }

    #[test]
    fn constant_has_only_mean_mode() {
        let c = CircleFunction::constant(32, 1.0).unwrap().to_spectral();
        assert_abs_diff_eq!(c.get(0).re, 1.0, epsilon = 1e-15);
        for n in 1..=16 {
            assert!(c.get(n).norm() < 1e-15);
        }
    }

    #[test]
    fn cosine_splits_into_plus_minus_one() {
        let c = CircleFunction::from_fn(32, f64::cos).unwrap().to_spectral();
        assert_abs_diff_eq!(c.get(1).re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(c.get(-1).re, 0.5, epsilon = 1e-15);
        for n in 2..=16 {
            assert!(c.get(n).norm() < 1e-15);
        }
        assert!(c.get(0).norm() < 1e-15);
    }

    #[test]
    fn random_round_trip() {
        let f = random(128, 7);
        let back = f.to_spectral().from_spectral().unwrap();
        for (a, b) in f.values().iter().zip(back.values()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn asymmetric_coefficients_rejected() {
        let mut c = SpectralCoeffs::zeros(16).unwrap();
        c.set_mode(2, Complex64::new(0.5, 0.0));
        let mut raw = c.as_slice().to_vec();
        raw[14] = Complex64::new(0.1, 0.3);
        let bad = SpectralCoeffs::from_fft_order(raw).unwrap();
        assert!(matches!(bad.from_spectral(), Err(SpectralError::NotHermitian { mode: 2, .. })));
    }

    #[test]
    fn derivatives_of_cosine() {
        let f = CircleFunction::from_fn(64, f64::cos).unwrap();
        let d1 = f.differentiate(1);
        let d2 = f.differentiate(2);
        for (k, th) in f.nodes().into_iter().enumerate() {
            assert_abs_diff_eq!(d1.values()[k], -th.sin(), epsilon = 1e-13);
            assert_abs_diff_eq!(d2.values()[k], -th.cos(), epsilon = 1e-12);
        }
    }

    #[test]
    fn first_derivative_multiplier_on_mode_three() {
        let mut c = SpectralCoeffs::zeros(32).unwrap();
        c.set_mode(3, Complex64::new(0.2, -0.1));
        let d = c.to_real().differentiate(1).to_spectral();
        let expected = Complex64::new(0.0, 3.0) * Complex64::new(0.2, -0.1);
        assert!((d.get(3) - expected).norm() < 1e-14);
    }

    #[test]
    fn multiplier_identity_and_resolvent() {
        let f = random(32, 3);
        let c = f.to_spectral();
        let same = c.apply_multiplier(|_| Complex64::new(1.0, 0.0));
        assert_eq!(same, c);

        let lambda = 2.0;
        let q2 = Complex64::new(-3.0, 0.5);
        let mut m2 = SpectralCoeffs::zeros(32).unwrap();
        m2.set_mode(2, Complex64::new(1.0, 0.0));
        let out = m2.apply_multiplier(|k| if k.abs() == 2 { 1.0 / (lambda - if k > 0 { q2 } else { q2.conj() }) } else { Complex64::new(0.0, 0.0) });
        assert!((out.get(2) - 1.0 / (lambda - q2)).norm() < 1e-15);
    }

    #[test]
    fn means() {
        let n = 32;
        assert_abs_diff_eq!(CircleFunction::constant(n, 2.5).unwrap().mean(), 2.5, epsilon = 1e-15);
        assert_abs_diff_eq!(CircleFunction::from_fn(n, f64::cos).unwrap().mean(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(CircleFunction::from_fn(n, |t| 1.0 + t.cos()).unwrap().mean(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn dealias_behaviour() {
        let n = 48usize.next_power_of_two();
        let mut c = SpectralCoeffs::zeros(n).unwrap();
        c.set_mode(1, Complex64::new(1.0, 0.0));
        c.set_mode((n / 2) as i64, Complex64::new(1.0, 0.0));
        let d = c.dealias();
        assert_eq!(d.get((n / 2) as i64), Complex64::new(0.0, 0.0));
        assert_eq!(d.get(1), Complex64::new(1.0, 0.0));
        assert_eq!(d.dealias(), d);
    }

    #[test]
    fn eval_at_matches_nodes_and_interpolates() {
        let f = CircleFunction::from_fn(32, |t| (2.0 * t).sin() + 0.3 * (5.0 * t).cos()).unwrap();
        for (k, th) in f.nodes().into_iter().enumerate() {
            assert_abs_diff_eq!(f.eval_at(th), f.values()[k], epsilon = 1e-13);
        }
        let t = 0.123;
        assert_abs_diff_eq!(f.eval_at(t), (2.0 * t).sin() + 0.3 * (5.0 * t).cos(), epsilon = 1e-13);
    }

    proptest! {
        #[test]
        fn parseval_and_round_trip(seed in 0u64..1000, pow in 4u32..9) {
            let f = random(1 << pow, seed);
            let c = f.to_spectral();
            let mean_sq = f.values().iter().map(|v| v * v).sum::<f64>() / f.len() as f64;
            prop_assert!((c.energy() - mean_sq).abs() <= 1e-12 * mean_sq);
            let back = c.from_spectral().unwrap();
            for (a, b) in f.values().iter().zip(back.values()) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }

        #[test]
        fn derivative_identities(seed in 0u64..1000) {
            let f = random(64, seed);
            let twice = f.differentiate(1).differentiate(1);
            let once = f.differentiate(2);
            for (a, b) in twice.values().iter().zip(once.values()) {
                prop_assert!((a - b).abs() <= 1e-10);
            }
            prop_assert!(f.differentiate(1).to_spectral().get(0).norm() < 1e-14);
            let c = CircleFunction::constant(64, seed as f64).unwrap().differentiate(1);
            prop_assert!(c.max_abs() < 1e-12 * (1.0 + seed as f64));
        }
    }
}
