//! Interface geometry over the unit circle.
//!
//! The interface is Γ_ρ = {(1+ρ(θ))e^{iθ}}. A radial Hanzawa map
//! `r = s + χ(s−1)ρ(θ)` carries the unit disk and the annulus 1 < s < R onto
//! the two fluid regions; χ is a smooth cutoff equal to one near the circle.

use crate::params::DerivedCoeffs;
use crate::spectral::{CircleFunction, SpectralCoeffs};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;
use thiserror::Error;

/// Half-width of the cutoff plateau; admissible shapes satisfy ‖ρ‖_∞ < a.
pub const CUTOFF_HALF_WIDTH: f64 = 0.125;

const SINGULAR_DENOMINATOR: f64 = 1e-14;
const INVERSION_MAX_ITER: usize = 100;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("shape leaves the admissible neighbourhood: ‖ρ‖_∞ = {max_abs:.6} ≥ {bound}")]
    OutOfRange { max_abs: f64, bound: f64 },
    #[error("singular geometry: curvature denominator {0:.3e} at node {1}")]
    Singular(f64, usize),
    #[error("Hanzawa inversion did not converge for |y| = {0}")]
    InversionFailed(f64),
}

/// Radial cutoff: χ = 1 on |x| ≤ a, χ = 0 on |x| ≥ 3a, and the quintic
/// smoothstep 1 − (10t³ − 15t⁴ + 6t⁵), t = (|x|−a)/(2a), in between.
///
/// χ is C² and polynomial on each of the three pieces; ‖χ'‖_∞ = 15/(16a).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cutoff {
    a: f64,
}

impl Default for Cutoff {
    fn default() -> Self {
        Self { a: CUTOFF_HALF_WIDTH }
    }
}

impl Cutoff {
    pub fn half_width(&self) -> f64 {
        self.a
    }

    /// Offsets |x| where χ changes formula: a and 3a.
    pub fn breakpoints(&self) -> [f64; 2] {
        [self.a, 3.0 * self.a]
    }

    /// Returns (χ, χ', χ'') at offset `x` from the unit circle.
    pub fn eval(&self, x: f64) -> (f64, f64, f64) {
        let ax = x.abs();
        if ax <= self.a {
            return (1.0, 0.0, 0.0);
        }
        if ax >= 3.0 * self.a {
            return (0.0, 0.0, 0.0);
        }
        let width = 2.0 * self.a;
        let t = (ax - self.a) / width;
        let psi = t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
        let dpsi = 30.0 * t * t * (1.0 - t) * (1.0 - t);
        let d2psi = 60.0 * t * (1.0 - t) * (1.0 - 2.0 * t);
        let sign = x.signum();
        (1.0 - psi, -sign * dpsi / width, -d2psi / (width * width))
    }
}

/// Admissible interface perturbation with cached angular derivatives.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterfaceShape {
    rho: CircleFunction,
    #[serde(skip)]
    d1: CircleFunction,
    #[serde(skip)]
    d2: CircleFunction,
}

impl InterfaceShape {
    pub fn new(rho: CircleFunction) -> Result<Self, GeometryError> {
        let max_abs = rho.max_abs();
        if max_abs >= CUTOFF_HALF_WIDTH {
            return Err(GeometryError::OutOfRange {
                max_abs,
                bound: CUTOFF_HALF_WIDTH,
            });
        }
        let d1 = rho.differentiate(1);
        let d2 = rho.differentiate(2);
        Ok(Self { rho, d1, d2 })
    }

    /// The unit circle on an `n`-point grid.
    pub fn circle(n: usize) -> Result<Self, crate::spectral::SpectralError> {
        Ok(Self::new(CircleFunction::zeros(n)?).expect("zero shape is admissible"))
    }

    pub fn rho(&self) -> &CircleFunction {
        &self.rho
    }

    /// ρ̇
    pub fn rho_dot(&self) -> &CircleFunction {
        &self.d1
    }

    /// ρ̈
    pub fn rho_ddot(&self) -> &CircleFunction {
        &self.d2
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.rho.max_abs()
    }

    /// `|∇N_ρ| = √(ρ̇² + (1+ρ)²)/(1+ρ)` on the circle.
    pub fn grad_norm(&self) -> CircleFunction {
        self.rho.zip_map(&self.d1, |r, dr| (dr * dr + (1.0 + r) * (1.0 + r)).sqrt() / (1.0 + r))
    }
}

/// K(ρ) = σ[(1+ρ)² + 2ρ̇² − (1+ρ)ρ̈]/[(1+ρ)² + ρ̇²]^{3/2} + (γ_o−γ_i)(1+ρ)², dealiased.
pub fn curvature_functional(s: &InterfaceShape, c: &DerivedCoeffs, sigma: f64) -> Result<CircleFunction, GeometryError> {
    let jump = c.gamma_jump();
    let mut out = Vec::with_capacity(s.len());
    for k in 0..s.len() {
        let r = 1.0 + s.rho.values()[k];
        let d1 = s.d1.values()[k];
        let d2 = s.d2.values()[k];
        let base = r * r + d1 * d1;
        let denom = base * base.sqrt();
        if !(denom > SINGULAR_DENOMINATOR) {
            return Err(GeometryError::Singular(denom, k));
        }
        out.push(sigma * (r * r + 2.0 * d1 * d1 - r * d2) / denom + jump * r * r);
    }
    Ok(CircleFunction::from_vec_unchecked(out).dealiased())
}

/// ∂K(0)[h] = σ(−h−ḧ) + 2(γ_o−γ_i)h, i.e. the multiplier σ(n²−1) + 2(γ_o−γ_i).
pub fn linearized_curvature(h: &CircleFunction, sigma: f64, c: &DerivedCoeffs) -> CircleFunction {
    let jump = c.gamma_jump();
    h.to_spectral()
        .apply_multiplier(|n| Complex64::new(sigma * ((n * n) as f64 - 1.0) + 2.0 * jump, 0.0))
        .to_real()
}

/// Unit normal, tangent and |∇N_ρ| along Γ_ρ, indexed by the circle nodes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalData {
    pub nu: Vec<[f64; 2]>,
    pub tau: Vec<[f64; 2]>,
    pub grad_norm: CircleFunction,
}

pub fn normal_data(s: &InterfaceShape) -> NormalData {
    let n = s.len();
    let mut nu = Vec::with_capacity(n);
    let mut tau = Vec::with_capacity(n);
    for (k, th) in s.rho.nodes().into_iter().enumerate() {
        let r = 1.0 + s.rho.values()[k];
        let slope = s.d1.values()[k] / r;
        let (sn, cs) = th.sin_cos();
        // ∇N = e_r − (ρ̇/r) e_θ
        let g = [cs + slope * sn, sn - slope * cs];
        let norm = (g[0] * g[0] + g[1] * g[1]).sqrt();
        let v = [g[0] / norm, g[1] / norm];
        nu.push(v);
        tau.push([v[1], -v[0]]);
    }
    NormalData {
        nu,
        tau,
        grad_norm: s.grad_norm(),
    }
}

/// (1/2)∫(1+ρ)² dθ
pub fn enclosed_area(s: &InterfaceShape) -> f64 {
    PI * s.rho.map(|r| (1.0 + r) * (1.0 + r)).mean()
}

/// The diffeomorphism φ_ρ(x) = (|x| + χ(|x|−1)ρ(x/|x|)) x/|x|.
#[derive(Debug, Clone)]
pub struct HanzawaMap {
    shape: InterfaceShape,
    spectrum: SpectralCoeffs,
    cutoff: Cutoff,
}

impl HanzawaMap {
    pub fn new(shape: InterfaceShape) -> Self {
        let spectrum = shape.rho.to_spectral();
        Self {
            shape,
            spectrum,
            cutoff: Cutoff::default(),
        }
    }

    pub fn shape(&self) -> &InterfaceShape {
        &self.shape
    }

    pub fn cutoff(&self) -> Cutoff {
        self.cutoff
    }

    /// Physical radius of the reference point (s, θ).
    pub fn radius(&self, s: f64, theta: f64) -> f64 {
        let (chi, _, _) = self.cutoff.eval(s - 1.0);
        if chi == 0.0 {
            return s;
        }
        s + chi * self.spectrum.eval_at(theta)
    }

    pub fn forward(&self, x: [f64; 2]) -> [f64; 2] {
        let s = x[0].hypot(x[1]);
        if s == 0.0 {
            return x;
        }
        let (chi, _, _) = self.cutoff.eval(s - 1.0);
        if chi == 0.0 {
            return x;
        }
        let shift = chi * self.spectrum.eval_at(x[1].atan2(x[0]));
        if shift == 0.0 {
            return x;
        }
        let r = s + shift;
        [x[0] * r / s, x[1] * r / s]
    }

    /// Safeguarded Newton along the ray through `y`.
    pub fn inverse(&self, y: [f64; 2]) -> Result<[f64; 2], GeometryError> {
        let target = y[0].hypot(y[1]);
        if target == 0.0 {
            return Ok(y);
        }
        let theta = y[1].atan2(y[0]);
        let rho = self.spectrum.eval_at(theta);
        let a = self.cutoff.half_width();
        let g = |s: f64| {
            let (chi, dchi, _) = self.cutoff.eval(s - 1.0);
            (s + chi * rho - target, 1.0 + dchi * rho)
        };
        let mut lo = (target - a).max(0.0);
        let mut hi = target + a;
        let mut s = target;
        for _ in 0..INVERSION_MAX_ITER {
            let (f, df) = g(s);
            if f.abs() <= 1e-15 * target.max(1.0) {
                return Ok([y[0] * s / target, y[1] * s / target]);
            }
            if f > 0.0 {
                hi = s;
            } else {
                lo = s;
            }
            let newton = s - f / df;
            s = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            if hi - lo <= 1e-16 * target.max(1.0) {
                return Ok([y[0] * s / target, y[1] * s / target]);
            }
        }
        Err(GeometryError::InversionFailed(target))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn coeffs(jump: f64) -> DerivedCoeffs {
        DerivedCoeffs::new(1.0, 2.0, 0.0, 0.0, 0.0, jump)
    }

    fn shape(n: usize, f: impl Fn(f64) -> f64) -> InterfaceShape {
        InterfaceShape::new(CircleFunction::from_fn(n, f).unwrap()).unwrap()
    }

    #[test]
    fn cutoff_profile() {
        let c = Cutoff::default();
        let a = c.half_width();
        assert_eq!(c.eval(0.0), (1.0, 0.0, 0.0));
        assert_eq!(c.eval(-a).0, 1.0);
        assert_eq!(c.eval(3.0 * a).0, 0.0);
        let mut prev = 1.0;
        let mut max_slope = 0.0f64;
        for i in 1..2000 {
            let x = a + 2.0 * a * i as f64 / 2000.0;
            let (v, d, d2) = c.eval(x);
            assert!(v <= prev + 1e-15);
            prev = v;
            max_slope = max_slope.max(d.abs());
            // finite-difference derivative checks
            let h = 1e-6;
            let fd = (c.eval(x + h).0 - c.eval(x - h).0) / (2.0 * h);
            assert_abs_diff_eq!(d, fd, epsilon = 1e-6);
            let fd2 = (c.eval(x + h).1 - c.eval(x - h).1) / (2.0 * h);
            assert_abs_diff_eq!(d2, fd2, epsilon = 1e-4 * (1.0 + d2.abs()));
            let (vm, dm, _) = c.eval(-x);
            assert_eq!(vm, v);
            assert_eq!(dm, -d);
        }
        assert!(max_slope < 1.0 / a);
    }

    #[test]
    fn shape_bound_enforced() {
        let err = InterfaceShape::new(CircleFunction::constant(16, 0.13).unwrap()).unwrap_err();
        assert!(matches!(err, GeometryError::OutOfRange { .. }));
        assert!(InterfaceShape::new(CircleFunction::constant(16, 0.12).unwrap()).is_ok());
    }

    #[test]
    fn curvature_of_unit_circle() {
        let k = curvature_functional(&InterfaceShape::circle(32).unwrap(), &coeffs(0.7), 1.3).unwrap();
        for v in k.values() {
            assert_abs_diff_eq!(*v, 1.3 + 0.7, epsilon = 1e-14);
        }
    }

    #[test]
    fn curvature_of_offset_circle() {
        for c in [-0.1, 0.05, 0.1] {
            let s = shape(32, |_| c);
            let k = curvature_functional(&s, &coeffs(0.0), 1.0).unwrap();
            for v in k.values() {
                assert_abs_diff_eq!(*v, 1.0 / (1.0 + c), epsilon = 1e-12);
            }
            let k = curvature_functional(&s, &coeffs(0.4), 2.0).unwrap();
            for v in k.values() {
                assert_abs_diff_eq!(*v, 2.0 / (1.0 + c) + 0.4 * (1.0 + c) * (1.0 + c), epsilon = 1e-12);
            }
        }
    }

    /// κ = (ẋÿ − ẍẏ)/(ẋ² + ẏ²)^{3/2} by central differences on a dense sample.
    fn fd_curvature(rho: impl Fn(f64) -> f64, theta: f64) -> f64 {
        let h = 1e-3;
        let p = |t: f64| {
            let r = 1.0 + rho(t);
            (r * t.cos(), r * t.sin())
        };
        let (xm, ym) = p(theta - h);
        let (x0, y0) = p(theta);
        let (xp, yp) = p(theta + h);
        let (xd, yd) = ((xp - xm) / (2.0 * h), (yp - ym) / (2.0 * h));
        let (xdd, ydd) = ((xp - 2.0 * x0 + xm) / (h * h), (yp - 2.0 * y0 + ym) / (h * h));
        (xd * ydd - xdd * yd) / (xd * xd + yd * yd).powf(1.5)
    }

    #[test]
    fn curvature_matches_finite_difference_curve_oracle() {
        let rho = |t: f64| 0.01 * (2.0 * t).cos();
        let s = shape(128, rho);
        let k = curvature_functional(&s, &coeffs(0.0), 1.0).unwrap();
        for (i, th) in s.rho().nodes().into_iter().enumerate() {
            assert_abs_diff_eq!(k.values()[i], fd_curvature(rho, th), epsilon = 1e-6);
        }
    }

    #[test]
    fn linearized_curvature_modes() {
        let c = coeffs(0.8);
        let h = CircleFunction::from_fn(32, f64::cos).unwrap();
        let out = linearized_curvature(&h, 1.7, &c);
        for (a, b) in out.values().iter().zip(h.values()) {
            assert_abs_diff_eq!(*a, 1.6 * b, epsilon = 1e-13);
        }
        let h2 = CircleFunction::from_fn(32, |t| (2.0 * t).cos()).unwrap();
        let out = linearized_curvature(&h2, 1.0, &coeffs(0.0));
        for (a, b) in out.values().iter().zip(h2.values()) {
            assert_abs_diff_eq!(*a, 3.0 * b, epsilon = 1e-13);
        }
    }

    #[test]
    fn linearized_curvature_matches_directional_difference() {
        let c = coeffs(0.6);
        let sigma = 1.2;
        let h = CircleFunction::from_fn(64, |t| (3.0 * t).cos() + 0.5 * (2.0 * t).sin()).unwrap();
        let eps = 1e-6;
        let k0 = curvature_functional(&InterfaceShape::circle(64).unwrap(), &c, sigma).unwrap();
        let k1 = curvature_functional(&InterfaceShape::new(h.scaled(eps)).unwrap(), &c, sigma).unwrap();
        let fd = k1.sub(&k0).scaled(1.0 / eps);
        let lin = linearized_curvature(&h, sigma, &c);
        for (a, b) in fd.values().iter().zip(lin.values()) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-4);
        }
    }

    #[test]
    fn normals_of_circles_are_radial() {
        for c in [0.0, 0.07] {
            let s = shape(32, |_| c);
            let nd = normal_data(&s);
            for (k, th) in s.rho().nodes().into_iter().enumerate() {
                assert_abs_diff_eq!(nd.nu[k][0], th.cos(), epsilon = 1e-14);
                assert_abs_diff_eq!(nd.nu[k][1], th.sin(), epsilon = 1e-14);
                assert_abs_diff_eq!(nd.grad_norm.values()[k], 1.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn normal_matches_finite_difference_gradient() {
        let rho = |t: f64| 0.05 * (3.0 * t).cos();
        let s = shape(64, rho);
        let nd = normal_data(&s);
        let level = |x: f64, y: f64| x.hypot(y) - 1.0 - rho(y.atan2(x));
        let h = 1e-6;
        for (k, th) in s.rho().nodes().into_iter().enumerate() {
            let r = 1.0 + rho(th);
            let (x, y) = (r * th.cos(), r * th.sin());
            let gx = (level(x + h, y) - level(x - h, y)) / (2.0 * h);
            let gy = (level(x, y + h) - level(x, y - h)) / (2.0 * h);
            let gn = gx.hypot(gy);
            assert_abs_diff_eq!(nd.nu[k][0], gx / gn, epsilon = 1e-6);
            assert_abs_diff_eq!(nd.nu[k][1], gy / gn, epsilon = 1e-6);
            assert_abs_diff_eq!(nd.grad_norm.values()[k], gn, epsilon = 1e-6);
        }
    }

    #[test]
    fn normal_tangent_orthonormal() {
        let s = shape(64, |t| 0.04 * (2.0 * t).sin() - 0.03 * (5.0 * t).cos());
        let nd = normal_data(&s);
        for (n, t) in nd.nu.iter().zip(&nd.tau) {
            assert_abs_diff_eq!(n[0] * t[0] + n[1] * t[1], 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(n[0].hypot(n[1]), 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(t[0].hypot(t[1]), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn rotation_equivariance() {
        let n = 64;
        let s = shape(n, |t| 0.03 * (3.0 * t).cos() + 0.02 * (2.0 * t).sin());
        let shift = 5;
        let rs = InterfaceShape::new(s.rho().rotated(shift)).unwrap();
        let c = coeffs(0.3);
        let k = curvature_functional(&s, &c, 1.0).unwrap().rotated(shift);
        let kr = curvature_functional(&rs, &c, 1.0).unwrap();
        for (a, b) in k.values().iter().zip(kr.values()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
        let phi = 2.0 * PI * shift as f64 / n as f64;
        let (sp, cp) = phi.sin_cos();
        let nd = normal_data(&s);
        let ndr = normal_data(&rs);
        for k in 0..n {
            let v = nd.nu[k];
            let rotated = [cp * v[0] - sp * v[1], sp * v[0] + cp * v[1]];
            let w = ndr.nu[(k + shift) % n];
            assert_abs_diff_eq!(rotated[0], w[0], epsilon = 1e-10);
            assert_abs_diff_eq!(rotated[1], w[1], epsilon = 1e-10);
        }
    }

    #[test]
    fn areas() {
        assert_abs_diff_eq!(enclosed_area(&InterfaceShape::circle(32).unwrap()), PI, epsilon = 1e-14);
        assert_abs_diff_eq!(enclosed_area(&shape(32, |_| 0.1)), PI * 1.21, epsilon = 1e-13);
        let eps = 0.05;
        for n in 1..6 {
            let a = enclosed_area(&shape(64, |t| eps * (n as f64 * t).cos()));
            assert_abs_diff_eq!(a, PI * (1.0 + eps * eps / 2.0), epsilon = 1e-12);
        }
    }

    #[test]
    fn hanzawa_forward_properties() {
        let zero = HanzawaMap::new(InterfaceShape::circle(32).unwrap());
        for x in [[0.3, -0.2], [1.0, 0.0], [0.9, 0.8], [-1.7, 0.1]] {
            assert_eq!(zero.forward(x), x);
        }
        let m = HanzawaMap::new(shape(32, |_| 0.1));
        let y = m.forward([0.6f64.cos(), 0.6f64.sin()]);
        assert_abs_diff_eq!(y[0].hypot(y[1]), 1.1, epsilon = 1e-14);
        assert_abs_diff_eq!(y[1].atan2(y[0]), 0.6, epsilon = 1e-14);
        let x = [1.5 * 2.0f64.cos(), 1.5 * 2.0f64.sin()];
        assert_eq!(m.forward(x), x);
        let inner = [0.6 * 2.0f64.cos(), 0.6 * 2.0f64.sin()];
        assert_eq!(m.forward(inner), inner);
    }

    #[test]
    fn hanzawa_circle_maps_onto_interface() {
        let rho = |t: f64| 0.06 * (2.0 * t).cos() - 0.02 * (3.0 * t).sin();
        let m = HanzawaMap::new(shape(64, rho));
        for t in [0.0f64, 0.4, 1.9, 3.3, 5.9] {
            let y = m.forward([t.cos(), t.sin()]);
            assert_abs_diff_eq!(y[0], (1.0 + rho(t)) * t.cos(), epsilon = 1e-13);
            assert_abs_diff_eq!(y[1], (1.0 + rho(t)) * t.sin(), epsilon = 1e-13);
        }
    }

    #[test]
    fn hanzawa_round_trips() {
        let m = HanzawaMap::new(shape(64, |t| 0.1 * (2.0 * t).cos() + 0.02));
        for x in [[0.3, 0.1], [1.0, 0.0], [0.0, 1.05], [-0.8, -0.7], [1.5, 0.0], [0.7, 0.2]] {
            let y = m.forward(x);
            let back = m.inverse(y).unwrap();
            assert_abs_diff_eq!(back[0], x[0], epsilon = 1e-10);
            assert_abs_diff_eq!(back[1], x[1], epsilon = 1e-10);
            let again = m.forward(back);
            assert_abs_diff_eq!(again[0], y[0], epsilon = 1e-10);
            assert_abs_diff_eq!(again[1], y[1], epsilon = 1e-10);
        }
    }
}
