//! Pressure problems on the reference disk and annulus.
//!
//! Inner problem S(ρ,h): A_i(ρ)Q = 0 in the unit disk, B_i(ρ)Q = h − P(ρ)h on
//! the circle, mean of the trace equal to the mean of h. Outer problem T(ρ,g):
//! A_o(ρ)Q = 0 in 1 < s < R, Q = g at s = 1, α_o∂_νQ + β_o∂_τQ = 0 at s = R.
//!
//! Both are discretized by Fourier collocation in θ and multi-element
//! Chebyshev collocation in s, then solved by GMRES preconditioned with the
//! exact per-mode solve of the ρ = 0 problem (diagonal in the Fourier index).

use crate::geometry::{Cutoff, GeometryError, InterfaceShape};
use crate::krylov::{gmres, GmresOptions};
use crate::params::{DerivedCoeffs, Phase};
use crate::radial::{RadialGrid, RowRole};
use crate::spectral::{forward_plan, inverse_plan, wavenumber, CircleFunction, SpectralCoeffs};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

/// Residual threshold above which a solve is reported as failed.
pub const SOLVER_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum SolverError {
    #[error("linear solve stalled: relative residual {residual:.3e} after {iterations} iterations")]
    NotConverged { residual: f64, iterations: usize },
    #[error("data on {got} nodes, solver configured for {expected}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("per-mode factorization singular at mode {0}")]
    Singular(i64),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Collocation sizes: `n` angular nodes, `m_inner`/`m_outer` radial nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridConfig {
    pub n: usize,
    pub m_inner: usize,
    pub m_outer: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n: 64,
            m_inner: 64,
            m_outer: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Domain {
    Disk,
    Annulus,
}

/// Samples on a tensor grid of the reference domain, `values[j*n_theta + k]`
/// at (s_j, θ_k). Ring 0 is the unit circle on both domains.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolarField {
    pub domain: Domain,
    pub s: Vec<f64>,
    pub n_theta: usize,
    pub values: Vec<f64>,
}

pub type DiskField = PolarField;
pub type AnnulusField = PolarField;

impl PolarField {
    pub fn ring(&self, j: usize) -> &[f64] {
        &self.values[j * self.n_theta..(j + 1) * self.n_theta]
    }

    pub fn at(&self, j: usize, k: usize) -> f64 {
        self.values[j * self.n_theta + k]
    }

    /// Values on the unit circle.
    pub fn trace(&self) -> CircleFunction {
        CircleFunction::from_vec_unchecked(self.ring(0).to_vec())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &PolarField) -> f64 {
        self.values.iter().zip(&other.values).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    fn map(&self, f: impl Fn(usize, usize, f64) -> f64) -> PolarField {
        let n = self.n_theta;
        PolarField {
            values: self.values.iter().enumerate().map(|(i, &v)| f(i / n, i % n, v)).collect(),
            ..self.clone()
        }
    }
}

/// B_j(ρ)Q_j sampled on the unit circle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryFlux {
    pub values: CircleFunction,
}

impl BoundaryFlux {
    /// ∫(1+ρ)·flux dθ, the total flux through Γ_ρ.
    pub fn weighted_integral(&self, s: &InterfaceShape) -> f64 {
        self.values.zip_map(s.rho(), |f, r| f * (1.0 + r)).integrate()
    }
}

/// Convergence record of one solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub residual: f64,
    /// Lagrange multiplier of the mean constraint (inner problem only); it
    /// absorbs the discrete incompatibility of the Neumann data.
    pub multiplier: f64,
}

/// Ring-wise FFT, normalized by 1/N; layout `[j*n + idx]`.
fn ring_fft(values: &[f64], n: usize) -> Vec<Complex64> {
    let plan = forward_plan(n);
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let scale = 1.0 / n as f64;
    for ring in buf.chunks_mut(n) {
        plan.process(ring);
        ring.iter_mut().for_each(|c| *c *= scale);
    }
    buf
}

fn ring_ifft(mut spec: Vec<Complex64>, n: usize) -> Vec<f64> {
    let plan = inverse_plan(n);
    for ring in spec.chunks_mut(n) {
        plan.process(ring);
    }
    spec.into_iter().map(|c| c.re).collect()
}

/// i·k with the Nyquist wavenumber sent to zero.
fn first_symbol(idx: usize, n: usize) -> Complex64 {
    if idx == n / 2 {
        Complex64::new(0.0, 0.0)
    } else {
        Complex64::new(0.0, wavenumber(idx, n) as f64)
    }
}

fn second_symbol(idx: usize, n: usize) -> f64 {
    let k = wavenumber(idx, n) as f64;
    -k * k
}

struct Derivatives {
    qs: Vec<f64>,
    qss: Vec<f64>,
    qt: Vec<f64>,
    qtt: Vec<f64>,
    qst: Vec<f64>,
}

fn derivatives(grid: &RadialGrid, n: usize, values: &[f64]) -> Derivatives {
    let m = grid.len();
    let spec = ring_fft(values, n);
    let zero = Complex64::new(0.0, 0.0);
    let mut s1 = vec![zero; m * n];
    let mut s2 = vec![zero; m * n];
    let mut col = vec![zero; m];
    let mut c1 = vec![zero; m];
    let mut c2 = vec![zero; m];
    for idx in 0..=n / 2 {
        for l in 0..m {
            col[l] = spec[l * n + idx];
        }
        grid.apply(wavenumber(idx, n), &col, &mut c1, &mut c2);
        for j in 0..m {
            s1[j * n + idx] = c1[j];
            s2[j * n + idx] = c2[j];
            if idx != 0 && idx != n / 2 {
                s1[j * n + n - idx] = c1[j].conj();
                s2[j * n + n - idx] = c2[j].conj();
            }
        }
    }
    // both spectra are Hermitian, so one inverse transform of A + iB returns
    // the two real fields as real and imaginary parts
    let pair = |a: &[Complex64], fa: &dyn Fn(usize) -> Complex64, b: &[Complex64], fb: &dyn Fn(usize) -> Complex64| {
        let i = Complex64::new(0.0, 1.0);
        let mut buf: Vec<Complex64> = a.iter().zip(b).enumerate().map(|(p, (x, y))| x * fa(p % n) + i * (y * fb(p % n))).collect();
        let plan = inverse_plan(n);
        for ring in buf.chunks_mut(n) {
            plan.process(ring);
        }
        let re: Vec<f64> = buf.iter().map(|c| c.re).collect();
        let im: Vec<f64> = buf.iter().map(|c| c.im).collect();
        (re, im)
    };
    let one = |_: usize| Complex64::new(1.0, 0.0);
    let ik = |p: usize| first_symbol(p, n);
    let (qt, qtt) = pair(&spec, &ik, &spec, &|p| Complex64::new(second_symbol(p, n), 0.0));
    let (qs, qst) = pair(&s1, &one, &s1, &ik);
    let qss = ring_ifft(s2, n);
    Derivatives { qs, qss, qt, qtt, qst }
}

/// Hanzawa Jacobian data at one reference point.
#[derive(Debug, Clone, Copy)]
struct Jacobian {
    phi: f64,
    phi_s: f64,
    phi_ss: f64,
    phi_t: f64,
    phi_tt: f64,
    phi_st: f64,
}

fn jacobian(cutoff: &Cutoff, s: f64, rho: f64, drho: f64, ddrho: f64) -> Jacobian {
    let (chi, dchi, ddchi) = cutoff.eval(s - 1.0);
    Jacobian {
        phi: s + chi * rho,
        phi_s: 1.0 + dchi * rho,
        phi_ss: ddchi * rho,
        phi_t: chi * drho,
        phi_tt: chi * ddrho,
        phi_st: dchi * drho,
    }
}

/// Coefficients of Φ_sΦ·Δ in reference coordinates:
/// a Q_ss + b2 Q_sθ + c Q_θθ + d Q_s.
struct Interior {
    a: Vec<f64>,
    b2: Vec<f64>,
    c: Vec<f64>,
    d: Vec<f64>,
}

fn interior_coefficients(grid: &RadialGrid, shape: &InterfaceShape, cutoff: &Cutoff) -> Interior {
    let n = shape.len();
    let m = grid.len();
    let mut out = Interior {
        a: vec![0.0; m * n],
        b2: vec![0.0; m * n],
        c: vec![0.0; m * n],
        d: vec![0.0; m * n],
    };
    let (rho, d1, d2) = (shape.rho().values(), shape.rho_dot().values(), shape.rho_ddot().values());
    for (j, &s) in grid.s.iter().enumerate() {
        for k in 0..n {
            let g = jacobian(cutoff, s, rho[k], d1[k], d2[k]);
            let num = g.phi_t * g.phi_t + g.phi * g.phi;
            let jac = g.phi_s * g.phi;
            let a = num / jac;
            let b = g.phi_t / g.phi;
            let a_s = ((2.0 * g.phi_t * g.phi_st + 2.0 * g.phi * g.phi_s) * jac - num * (g.phi_ss * g.phi + g.phi_s * g.phi_s))
                / (jac * jac);
            let b_t = (g.phi_tt * g.phi - g.phi_t * g.phi_t) / (g.phi * g.phi);
            let i = j * n + k;
            out.a[i] = a;
            out.b2[i] = -2.0 * b;
            out.c[i] = g.phi_s / g.phi;
            out.d[i] = a_s - b_t;
        }
    }
    out
}

fn interior_rows(grid: &RadialGrid, n: usize, rows: std::ops::Range<usize>, q: &[f64], d: &Derivatives, geo: &Interior, y: &mut [f64]) {
    for j in rows {
        let ring = j * n..(j + 1) * n;
        match grid.role(j) {
            RowRole::Equation => {
                for i in ring {
                    y[i] = geo.a[i] * d.qss[i] + geo.b2[i] * d.qst[i] + geo.c[i] * d.qtt[i] + geo.d[i] * d.qs[i];
                }
            }
            RowRole::Continuity(l, r) => {
                for k in 0..n {
                    y[j * n + k] = q[l * n + k] - q[r * n + k];
                }
            }
            RowRole::Slope(l, r) => {
                for k in 0..n {
                    y[j * n + k] = d.qs[l * n + k] - d.qs[r * n + k];
                }
            }
        }
    }
}

/// Coefficients (of Q_s, of Q_θ) of B_j(ρ) on the unit circle.
fn boundary_coefficients(alpha: f64, beta: f64, shape: &InterfaceShape) -> (Vec<f64>, Vec<f64>) {
    let t2 = alpha * alpha + beta * beta;
    let mut bs = Vec::with_capacity(shape.len());
    let mut bt = Vec::with_capacity(shape.len());
    for (&rho, &drho) in shape.rho().values().iter().zip(shape.rho_dot().values()) {
        let r = 1.0 + rho;
        bs.push(-alpha * (1.0 + drho * drho / (r * r)) / t2);
        bt.push((alpha * drho / (r * r) + beta / r) / t2);
    }
    (bs, bt)
}

/// P(ρ)h = G/((1+ρ)∫G)·∫h(1+ρ), G = √(ρ̇² + (1+ρ)²).
pub fn projection(s: &InterfaceShape, h: &CircleFunction) -> CircleFunction {
    let g = s.rho().zip_map(s.rho_dot(), |r, d| (d * d + (1.0 + r) * (1.0 + r)).sqrt());
    let weight = h.zip_map(s.rho(), |h, r| h * (1.0 + r)).integrate();
    let total = g.integrate();
    g.zip_map(s.rho(), |g, r| g * weight / ((1.0 + r) * total))
}

/// Coefficient of r^{|n|}e^{inθ} in S(0, e^{inθ}).
pub fn inner_mode_coefficient(c: &DerivedCoeffs, n: i64) -> Complex64 {
    if n == 0 {
        return Complex64::new(1.0, 0.0);
    }
    c.theta_i_sq() / Complex64::new(-(n.abs() as f64) * c.alpha_i, n as f64 * c.beta_i)
}

/// Coefficients (a_n, b_n) of r^n and r^{−n} in T(0, e^{inθ}).
pub fn outer_mode_coefficients(c: &DerivedCoeffs, r: f64, n: i64) -> (Complex64, Complex64) {
    outer_pair(c.theta_o, r, n)
}

fn outer_pair(to: Complex64, r: f64, n: i64) -> (Complex64, Complex64) {
    if n == 0 {
        return (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
    }
    let x = r.powi(-2 * n.abs() as i32);
    let tb = to.conj();
    if n > 0 {
        (x * to / (x * to + tb), tb / (tb + x * to))
    } else {
        (to / (to + x * tb), x * tb / (x * tb + to))
    }
}

/// B_o(0) applied to T(0, e^{inθ}), as a multiple of e^{inθ}.
pub fn outer_flux_symbol(c: &DerivedCoeffs, r: f64, n: i64) -> Complex64 {
    let (a, b) = outer_mode_coefficients(c, r, n);
    let nf = n as f64;
    -(c.alpha_o * nf * (a - b) - Complex64::new(0.0, c.beta_o * nf)) / c.theta_o_sq()
}

fn field_from_modes(domain: Domain, grid: &RadialGrid, spec: &SpectralCoeffs, profile: impl Fn(usize, i64, f64) -> Complex64) -> PolarField {
    let n = spec.len();
    let nyq = spec.nyquist();
    let mut values = Vec::with_capacity(grid.len() * n);
    for &s in &grid.s {
        let ring = spec.apply_multiplier(|k| {
            let idx = if k >= 0 { k as usize } else { (k + n as i64) as usize };
            let v = profile(idx, k, s);
            if k == nyq {
                Complex64::new(v.re, 0.0)
            } else {
                v
            }
        });
        let mut buf = ring.as_slice().to_vec();
        inverse_plan(n).process(&mut buf);
        values.extend(buf.iter().map(|c| c.re));
    }
    PolarField {
        domain,
        s: grid.s.clone(),
        n_theta: n,
        values,
    }
}

/// S(0,h) from the closed-form mode solution, sampled on `grid`.
/// The Nyquist mode carries no tangential derivative.
pub fn solve_inner_exact(c: &DerivedCoeffs, h: &SpectralCoeffs, grid: &RadialGrid) -> DiskField {
    let nyq = h.nyquist();
    field_from_modes(Domain::Disk, grid, h, |_, k, s| {
        let coef = if k == nyq {
            Complex64::new(-c.theta_i_sq() / (k as f64 * c.alpha_i), 0.0)
        } else {
            inner_mode_coefficient(c, k)
        };
        coef * s.powi(k.abs() as i32)
    })
}

/// T(0,g) from the closed-form mode solution, sampled on `grid`.
pub fn solve_outer_exact(c: &DerivedCoeffs, g: &SpectralCoeffs, r: f64, grid: &RadialGrid) -> AnnulusField {
    let nyq = g.nyquist();
    field_from_modes(Domain::Annulus, grid, g, |_, k, s| {
        let to = if k == nyq { Complex64::new(c.alpha_o, 0.0) } else { c.theta_o };
        let (a, b) = outer_pair(to, r, k);
        a * s.powi(k as i32) + b * s.powi(-k as i32)
    })
}

/// Dense inverse of one per-mode matrix, column-major with split real and
/// imaginary parts so the product vectorizes.
struct ModeInverse {
    dim: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl ModeInverse {
    fn new(a: DMatrix<Complex64>) -> Option<Self> {
        let dim = a.nrows();
        let inv = a.try_inverse()?;
        if !inv.iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
            return None;
        }
        Some(Self {
            dim,
            re: inv.iter().map(|c| c.re).collect(),
            im: inv.iter().map(|c| c.im).collect(),
        })
    }

    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        let d = self.dim;
        let mut yr = vec![0.0; d];
        let mut yi = vec![0.0; d];
        for (j, xj) in x.iter().enumerate() {
            let (cr, ci) = (&self.re[j * d..(j + 1) * d], &self.im[j * d..(j + 1) * d]);
            for i in 0..d {
                yr[i] += cr[i] * xj.re - ci[i] * xj.im;
                yi[i] += cr[i] * xj.im + ci[i] * xj.re;
            }
        }
        for (y, (a, b)) in y.iter_mut().zip(yr.into_iter().zip(yi)) {
            *y = Complex64::new(a, b);
        }
    }
}

/// Solver for both pressure problems at fixed coefficients and grid sizes.
/// Per-mode factorizations of the ρ = 0 operators are computed once and
/// reused for every shape.
pub struct EllipticSolver {
    coeffs: DerivedCoeffs,
    cell_radius: f64,
    n: usize,
    disk: RadialGrid,
    annulus: RadialGrid,
    disk_inv: Vec<ModeInverse>,
    annulus_inv: Vec<ModeInverse>,
    cutoff: Cutoff,
    pub options: GmresOptions,
}

impl std::fmt::Debug for EllipticSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EllipticSolver")
            .field("n", &self.n)
            .field("m_inner", &self.disk.len())
            .field("m_outer", &self.annulus.len())
            .finish()
    }
}

impl EllipticSolver {
    pub fn new(coeffs: DerivedCoeffs, cell_radius: f64, grid: GridConfig) -> Result<Self, SolverError> {
        crate::spectral::check_size(grid.n).map_err(|_| SolverError::SizeMismatch {
            expected: 16,
            got: grid.n,
        })?;
        let cutoff = Cutoff::default();
        for m in [grid.m_inner, grid.m_outer] {
            if m < RadialGrid::MIN_NODES {
                return Err(SolverError::SizeMismatch {
                    expected: RadialGrid::MIN_NODES,
                    got: m,
                });
            }
        }
        let disk = RadialGrid::disk(grid.m_inner, cutoff.breakpoints());
        let annulus = RadialGrid::annulus(grid.m_outer, cell_radius, cutoff.breakpoints());
        let mut s = Self {
            coeffs,
            cell_radius,
            n: grid.n,
            disk,
            annulus,
            disk_inv: Vec::new(),
            annulus_inv: Vec::new(),
            cutoff,
            options: GmresOptions {
                tol: 1e-12,
                ..Default::default()
            },
        };
        for idx in 0..=grid.n / 2 {
            let k = wavenumber(idx, grid.n);
            let inv = ModeInverse::new(s.disk_mode_matrix(idx)).ok_or(SolverError::Singular(k))?;
            s.disk_inv.push(inv);
            let inv = ModeInverse::new(s.annulus_mode_matrix(idx)).ok_or(SolverError::Singular(k))?;
            s.annulus_inv.push(inv);
        }
        Ok(s)
    }

    pub fn coeffs(&self) -> &DerivedCoeffs {
        &self.coeffs
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn cell_radius(&self) -> f64 {
        self.cell_radius
    }

    pub fn disk_grid(&self) -> &RadialGrid {
        &self.disk
    }

    pub fn annulus_grid(&self) -> &RadialGrid {
        &self.annulus
    }

    /// ρ = 0 operator restricted to Fourier index `idx`; mode 0 is bordered
    /// with the multiplier column and the mean-constraint row.
    fn disk_mode_matrix(&self, idx: usize) -> DMatrix<Complex64> {
        let m = self.disk.len();
        let k = wavenumber(idx, self.n);
        let d1 = self.disk.d1(k);
        let (alpha, beta) = self.coeffs.phase(Phase::Inner);
        let t2 = self.coeffs.theta_i_sq();
        let size = if idx == 0 { m + 1 } else { m };
        let mut a = DMatrix::from_element(size, size, Complex64::new(0.0, 0.0));
        for l in 0..m {
            a[(0, l)] = Complex64::new(-alpha / t2 * d1.at(0, l), 0.0);
        }
        a[(0, 0)] += beta / t2 * first_symbol(idx, self.n);
        for j in 1..m {
            self.radial_row(&self.disk, idx, j, &mut a);
        }
        if idx == 0 {
            a[(0, m)] = Complex64::new(1.0, 0.0);
            a[(m, 0)] = Complex64::new(1.0, 0.0);
        }
        a
    }

    /// Interior row `j` of the ρ = 0 mode matrix: s·Δ, or a joint condition.
    fn radial_row(&self, grid: &RadialGrid, idx: usize, j: usize, a: &mut DMatrix<Complex64>) {
        let k = wavenumber(idx, self.n);
        let (d1, d2) = (grid.d1(k), grid.d2(k));
        match grid.role(j) {
            RowRole::Equation => {
                let s = grid.s[j];
                for l in 0..grid.len() {
                    a[(j, l)] = Complex64::new(s * d2.at(j, l) + d1.at(j, l), 0.0);
                }
                a[(j, j)] += second_symbol(idx, self.n) / s;
            }
            RowRole::Continuity(l, r) => {
                a[(j, l)] = Complex64::new(1.0, 0.0);
                a[(j, r)] = Complex64::new(-1.0, 0.0);
            }
            RowRole::Slope(l, r) => {
                for c in 0..grid.len() {
                    a[(j, c)] = Complex64::new(d1.at(l, c) - d1.at(r, c), 0.0);
                }
            }
        }
    }

    fn annulus_mode_matrix(&self, idx: usize) -> DMatrix<Complex64> {
        let m = self.annulus.len();
        let k = wavenumber(idx, self.n);
        let d1 = self.annulus.d1(k);
        let (alpha, beta) = self.coeffs.phase(Phase::Outer);
        let r = self.cell_radius;
        let mut a = DMatrix::from_element(m, m, Complex64::new(0.0, 0.0));
        a[(0, 0)] = Complex64::new(1.0, 0.0);
        for j in 1..m - 1 {
            self.radial_row(&self.annulus, idx, j, &mut a);
        }
        for l in 0..m {
            a[(m - 1, l)] = Complex64::new(alpha * d1.at(m - 1, l), 0.0);
        }
        a[(m - 1, m - 1)] -= beta / r * first_symbol(idx, self.n);
        a
    }

    /// Applies the per-mode inverses; a bordered system carries one extra
    /// unknown after the grid values.
    fn mode_solve(&self, inverses: &[ModeInverse], m: usize, r: &[f64], bordered: bool) -> Vec<f64> {
        let n = self.n;
        let spec = ring_fft(&r[..m * n], n);
        let zero = Complex64::new(0.0, 0.0);
        let mut out = vec![zero; m * n];
        let mut extra = 0.0;
        let mut rhs = vec![zero; m + 1];
        let mut sol = vec![zero; m + 1];
        for (idx, inv) in inverses.iter().enumerate() {
            for j in 0..m {
                rhs[j] = spec[j * n + idx];
            }
            if inv.dim > m {
                rhs[m] = Complex64::new(r[m * n], 0.0);
            }
            inv.apply(&rhs[..inv.dim], &mut sol[..inv.dim]);
            for j in 0..m {
                out[j * n + idx] = sol[j];
                if idx != 0 && idx != n / 2 {
                    out[j * n + n - idx] = sol[j].conj();
                }
            }
            if inv.dim > m {
                extra = sol[m].re;
            }
        }
        let mut x = ring_ifft(out, n);
        if bordered {
            x.push(extra);
        }
        x
    }

    fn check_len(&self, len: usize) -> Result<(), SolverError> {
        if len != self.n {
            Err(SolverError::SizeMismatch {
                expected: self.n,
                got: len,
            })
        } else {
            Ok(())
        }
    }

    fn run(&self, op: impl FnMut(&[f64]) -> Vec<f64>, pre: impl FnMut(&[f64]) -> Vec<f64>, b: &[f64]) -> Result<(Vec<f64>, usize, f64), SolverError> {
        let out = gmres(op, pre, b, self.options);
        if !(out.residual <= SOLVER_TOLERANCE) {
            return Err(SolverError::NotConverged {
                residual: out.residual,
                iterations: out.iterations,
            });
        }
        Ok((out.x, out.iterations, out.residual))
    }

    /// S(ρ,h): returns the disk field, the realized flux B_i(ρ)Q_i and the
    /// convergence record.
    pub fn solve_inner(&self, shape: &InterfaceShape, h: &CircleFunction) -> Result<(DiskField, BoundaryFlux, SolveReport), SolverError> {
        self.check_len(shape.len())?;
        self.check_len(h.len())?;
        let n = self.n;
        let m = self.disk.len();
        let (alpha, beta) = self.coeffs.phase(Phase::Inner);
        let (bs, bt) = boundary_coefficients(alpha, beta, shape);
        let geo = interior_coefficients(&self.disk, shape, &self.cutoff);
        let data = h.sub(&projection(shape, h));
        let mut b = vec![0.0; m * n + 1];
        b[..n].copy_from_slice(data.values());
        b[m * n] = h.mean();
        let op = |x: &[f64]| -> Vec<f64> {
            let q = &x[..m * n];
            let d = derivatives(&self.disk, n, q);
            let mut y = vec![0.0; m * n + 1];
            for k in 0..n {
                y[k] = bs[k] * d.qs[k] + bt[k] * d.qt[k] + x[m * n];
            }
            interior_rows(&self.disk, n, 1..m, q, &d, &geo, &mut y);
            y[m * n] = q[..n].iter().sum::<f64>() / n as f64;
            y
        };
        let pre = |r: &[f64]| self.mode_solve(&self.disk_inv, m, r, true);
        let (mut x, iterations, residual) = self.run(op, pre, &b)?;
        let multiplier = x.pop().unwrap_or(0.0);
        let field = PolarField {
            domain: Domain::Disk,
            s: self.disk.s.clone(),
            n_theta: n,
            values: x,
        };
        let flux = self.flux(&self.disk, &field, &bs, &bt);
        Ok((
            field,
            flux,
            SolveReport {
                iterations,
                residual,
                multiplier,
            },
        ))
    }

    /// T(ρ,g): returns the annulus field and the flux B_o(ρ)Q_o on the circle.
    pub fn solve_outer(&self, shape: &InterfaceShape, g: &CircleFunction) -> Result<(AnnulusField, BoundaryFlux, SolveReport), SolverError> {
        self.check_len(shape.len())?;
        self.check_len(g.len())?;
        let n = self.n;
        let m = self.annulus.len();
        let (alpha, beta) = self.coeffs.phase(Phase::Outer);
        let (bs, bt) = boundary_coefficients(alpha, beta, shape);
        let geo = interior_coefficients(&self.annulus, shape, &self.cutoff);
        let rim = self.cell_radius;
        let mut b = vec![0.0; m * n];
        b[..n].copy_from_slice(g.values());
        let op = |x: &[f64]| -> Vec<f64> {
            let d = derivatives(&self.annulus, n, x);
            let mut y = vec![0.0; m * n];
            y[..n].copy_from_slice(&x[..n]);
            interior_rows(&self.annulus, n, 1..m - 1, x, &d, &geo, &mut y);
            for i in (m - 1) * n..m * n {
                y[i] = alpha * d.qs[i] - beta / rim * d.qt[i];
            }
            y
        };
        let pre = |r: &[f64]| self.mode_solve(&self.annulus_inv, m, r, false);
        let (x, iterations, residual) = self.run(op, pre, &b)?;
        let field = PolarField {
            domain: Domain::Annulus,
            s: self.annulus.s.clone(),
            n_theta: n,
            values: x,
        };
        let flux = self.flux(&self.annulus, &field, &bs, &bt);
        Ok((
            field,
            flux,
            SolveReport {
                iterations,
                residual,
                multiplier: 0.0,
            },
        ))
    }

    fn flux(&self, grid: &RadialGrid, field: &PolarField, bs: &[f64], bt: &[f64]) -> BoundaryFlux {
        let d = derivatives(grid, self.n, &field.values);
        let values = (0..self.n).map(|k| bs[k] * d.qs[k] + bt[k] * d.qt[k]).collect();
        BoundaryFlux {
            values: CircleFunction::from_vec_unchecked(values),
        }
    }

    /// B_j(ρ) evaluated on a field of either domain.
    pub fn boundary_flux(&self, shape: &InterfaceShape, field: &PolarField) -> Result<BoundaryFlux, SolverError> {
        self.check_len(shape.len())?;
        self.check_len(field.n_theta)?;
        let (phase, grid) = match field.domain {
            Domain::Disk => (Phase::Inner, &self.disk),
            Domain::Annulus => (Phase::Outer, &self.annulus),
        };
        if field.s.len() != grid.len() {
            return Err(SolverError::SizeMismatch {
                expected: grid.len(),
                got: field.s.len(),
            });
        }
        let (alpha, beta) = self.coeffs.phase(phase);
        let (bs, bt) = boundary_coefficients(alpha, beta, shape);
        Ok(self.flux(grid, field, &bs, &bt))
    }

    /// Cartesian gradient of the pushed-forward field at the physical images
    /// of the grid nodes.
    pub fn pressure_gradient(&self, shape: &InterfaceShape, field: &PolarField) -> Vec<[f64; 2]> {
        let grid = match field.domain {
            Domain::Disk => &self.disk,
            Domain::Annulus => &self.annulus,
        };
        let n = self.n;
        let d = derivatives(grid, n, &field.values);
        let (rho, drho, ddrho) = (shape.rho().values(), shape.rho_dot().values(), shape.rho_ddot().values());
        let nodes = shape.rho().nodes();
        let mut out = Vec::with_capacity(field.values.len());
        for (j, &s) in grid.s.iter().enumerate() {
            for k in 0..n {
                let g = jacobian(&self.cutoff, s, rho[k], drho[k], ddrho[k]);
                let i = j * n + k;
                let gr = d.qs[i] / g.phi_s;
                let gt = (d.qt[i] - g.phi_t * gr) / g.phi;
                let (sn, cs) = nodes[k].sin_cos();
                out.push([gr * cs - gt * sn, gr * sn + gt * cs]);
            }
        }
        out
    }

    /// Physical radius Φ(s_j, θ_k) of every node of the field.
    pub fn physical_radius(&self, shape: &InterfaceShape, field: &PolarField) -> Vec<f64> {
        let n = field.n_theta;
        let rho = shape.rho().values();
        field
            .s
            .iter()
            .flat_map(|&s| {
                let chi = self.cutoff.eval(s - 1.0).0;
                (0..n).map(move |k| s + chi * rho[k])
            })
            .collect()
    }
}

/// v_j = (−α_j∇P_j − β_j z×∇P_j)/|Θ_j|²
pub fn recover_velocity(c: &DerivedCoeffs, phase: Phase, pressure_gradient: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let (alpha, beta) = c.phase(phase);
    let t2 = alpha * alpha + beta * beta;
    pressure_gradient
        .iter()
        .map(|g| [(-alpha * g[0] + beta * g[1]) / t2, (-alpha * g[1] - beta * g[0]) / t2])
        .collect()
}

/// p_j = P_j + γ_j|x|², with |x| the physical radius of each node.
pub fn to_hydrostatic_pressure(c: &DerivedCoeffs, field: &PolarField, radius: &[f64]) -> PolarField {
    let gamma = match field.domain {
        Domain::Disk => c.gamma_i,
        Domain::Annulus => c.gamma_o,
    };
    let n = field.n_theta;
    field.map(|j, k, v| {
        let r = radius[j * n + k];
        v + gamma * r * r
    })
}

/// One-shot S(ρ,h) on a fresh solver.
pub fn solve_inner_general(c: &DerivedCoeffs, s: &InterfaceShape, h: &CircleFunction, grid: GridConfig) -> Result<(DiskField, BoundaryFlux), SolverError> {
    let solver = EllipticSolver::new(*c, crate::params::MIN_CELL_RADIUS, grid)?;
    solver.solve_inner(s, h).map(|(f, b, _)| (f, b))
}

/// One-shot T(ρ,g) on a fresh solver.
pub fn solve_outer_general(c: &DerivedCoeffs, s: &InterfaceShape, g: &CircleFunction, r: f64, grid: GridConfig) -> Result<(AnnulusField, BoundaryFlux), SolverError> {
    let solver = EllipticSolver::new(*c, r, grid)?;
    solver.solve_outer(s, g).map(|(f, b, _)| (f, b))
}
