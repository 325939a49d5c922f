//! Interface motion: the velocity functional F(ρ), the operator 1 − R(ρ),
//! first-order IMEX time stepping about the linearization, and rate fits.
//!
//! R(ρ)z = B_o(ρ)T(ρ, S(ρ,z)|_{s=1}) and F(ρ) = (1 − R(ρ))⁻¹ B_o(ρ)T(ρ, −K(ρ)).

use crate::dispersion::{compute_l_n, compute_q_n, DispersionError};
use crate::elliptic::{EllipticSolver, GridConfig, SolverError};
use crate::geometry::{curvature_functional, enclosed_area, GeometryError, InterfaceShape, CUTOFF_HALF_WIDTH};
use crate::krylov::{gmres, GmresOptions};
use crate::params::CellModel;
use crate::spectral::{CircleFunction, SpectralCoeffs, SpectralError, HERMITIAN_TOL};
use num_complex::Complex64;
use serde::Serialize;
use std::cell::RefCell;
use thiserror::Error;

/// Cap on applications of R inside one inversion of 1 − R.
pub const MAX_R_APPLICATIONS: usize = 200;

/// Required relative residual of the 1 − R inversion.
pub const INVERSION_TOLERANCE: f64 = 1e-10;

/// Fewest snapshots accepted by [`fit_rate`].
pub const MIN_FIT_SAMPLES: usize = 10;

#[derive(Debug, Error, PartialEq)]
pub enum EvolutionError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Dispersion(#[from] DispersionError),
    #[error("1 − R(ρ) inversion stalled: residual {residual:.3e} after {applications} applications of R")]
    InversionFailed { residual: f64, applications: usize },
    #[error("shape left the admissible neighbourhood at t = {t}: ‖ρ‖_∞ = {max_abs:.6}")]
    RegimeExit { t: f64, max_abs: f64 },
    #[error("spectrum lost Hermitian symmetry at mode {mode} (defect {defect:.3e})")]
    NotHermitian { mode: i64, defect: f64 },
    #[error("invalid time step {0}")]
    BadStep(f64),
    #[error("rate fit needs {needed} samples above 1e-14, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("mode {mode} outside the grid (|n| ≤ {nyquist})")]
    ModeOutOfRange { mode: i64, nyquist: i64 },
}

/// Result of one inversion of 1 − R(ρ).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Inversion {
    pub w: CircleFunction,
    pub applications: usize,
    pub residual: f64,
}

/// Evaluates the nonlocal operators of the flow for a fixed cell and grid.
#[derive(Debug)]
pub struct Evolver {
    model: CellModel,
    solver: EllipticSolver,
    /// q_n and l_n in FFT order, Nyquist entries replaced by their real parts.
    q: Vec<Complex64>,
    l: Vec<Complex64>,
    pub options: GmresOptions,
}

impl Evolver {
    pub fn new(model: CellModel, grid: GridConfig) -> Result<Self, EvolutionError> {
        let solver = EllipticSolver::new(model.coeffs, model.cell_radius, grid)?;
        let n = grid.n;
        let mut q = Vec::with_capacity(n);
        let mut l = Vec::with_capacity(n);
        for idx in 0..n {
            let k = crate::spectral::wavenumber(idx, n);
            let mut qk = compute_q_n(&model.coeffs, model.sigma, model.cell_radius, k)?;
            let mut lk = if k == 0 {
                Complex64::new(0.0, 0.0)
            } else {
                compute_l_n(&model.coeffs, model.cell_radius, k)?
            };
            if idx == n / 2 {
                qk = Complex64::new(qk.re, 0.0);
                lk = Complex64::new(lk.re, 0.0);
            }
            q.push(qk);
            l.push(lk);
        }
        Ok(Self {
            model,
            solver,
            q,
            l,
            options: GmresOptions {
                tol: 1e-12,
                restart: 40,
                max_iter: MAX_R_APPLICATIONS,
            },
        })
    }

    pub fn model(&self) -> &CellModel {
        &self.model
    }

    pub fn solver(&self) -> &EllipticSolver {
        &self.solver
    }

    pub fn n(&self) -> usize {
        self.solver.n()
    }

    /// q_n as used by the time stepper (real at the Nyquist mode).
    pub fn q(&self, k: i64) -> Complex64 {
        self.q[k.rem_euclid(self.q.len() as i64) as usize]
    }

    fn shape_check(&self, s: &InterfaceShape) -> Result<(), EvolutionError> {
        if s.len() != self.n() {
            return Err(SolverError::SizeMismatch {
                expected: self.n(),
                got: s.len(),
            }
            .into());
        }
        Ok(())
    }

    /// R(ρ)z: inner solve with flux data z, its trace as outer Dirichlet
    /// data, and the outer flux on the circle.
    pub fn apply_r(&self, s: &InterfaceShape, z: &CircleFunction) -> Result<CircleFunction, EvolutionError> {
        self.shape_check(s)?;
        let (inner, _, _) = self.solver.solve_inner(s, z)?;
        let (_, flux, _) = self.solver.solve_outer(s, &inner.trace())?;
        Ok(flux.values)
    }

    /// B_o(ρ)T(ρ, −K(ρ)); the mean of K is removed first since T(ρ, c) = c.
    pub fn curvature_flux(&self, s: &InterfaceShape) -> Result<CircleFunction, EvolutionError> {
        self.shape_check(s)?;
        let k = curvature_functional(s, &self.model.coeffs, self.model.sigma)?;
        let mean = k.mean();
        let g = k.map(|v| mean - v);
        let (_, flux, _) = self.solver.solve_outer(s, &g)?;
        Ok(flux.values)
    }

    /// Solves (1 − R(ρ))w = rhs by GMRES, preconditioned with (1 − l_n)⁻¹.
    pub fn invert_one_minus_r(&self, s: &InterfaceShape, rhs: &CircleFunction) -> Result<Inversion, EvolutionError> {
        self.shape_check(s)?;
        if rhs.values().iter().all(|&v| v == 0.0) {
            return Ok(Inversion {
                w: rhs.clone(),
                applications: 0,
                residual: 0.0,
            });
        }
        let failure: RefCell<Option<EvolutionError>> = RefCell::new(None);
        let op = |x: &[f64]| -> Vec<f64> {
            if failure.borrow().is_some() {
                return vec![0.0; x.len()];
            }
            let z = CircleFunction::from_vec_unchecked(x.to_vec());
            match self.apply_r(s, &z) {
                Ok(rz) => x.iter().zip(rz.values()).map(|(a, b)| a - b).collect(),
                Err(e) => {
                    *failure.borrow_mut() = Some(e);
                    vec![0.0; x.len()]
                }
            }
        };
        let precond = |x: &[f64]| -> Vec<f64> {
            let h = CircleFunction::from_vec_unchecked(x.to_vec()).to_spectral();
            h.apply_multiplier(|k| 1.0 / (1.0 - self.l[k.rem_euclid(self.l.len() as i64) as usize]))
                .to_real()
                .into_values()
        };
        let out = gmres(op, precond, rhs.values(), self.options);
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        if !(out.residual <= INVERSION_TOLERANCE) {
            return Err(EvolutionError::InversionFailed {
                residual: out.residual,
                applications: out.iterations,
            });
        }
        Ok(Inversion {
            w: CircleFunction::from_vec_unchecked(out.x),
            applications: out.iterations,
            residual: out.residual,
        })
    }

    /// F(ρ) together with the inversion record. F(0) is exactly zero.
    pub fn velocity(&self, s: &InterfaceShape) -> Result<Inversion, EvolutionError> {
        self.shape_check(s)?;
        if s.rho().values().iter().all(|&v| v == 0.0) {
            return Ok(Inversion {
                w: s.rho().clone(),
                applications: 0,
                residual: 0.0,
            });
        }
        let rhs = self.curvature_flux(s)?;
        self.invert_one_minus_r(s, &rhs)
    }

    pub fn velocity_functional(&self, s: &InterfaceShape) -> Result<CircleFunction, EvolutionError> {
        Ok(self.velocity(s)?.w)
    }

    /// ∂F(0)h, the multiplier q_n.
    pub fn linearized_velocity(&self, h: &CircleFunction) -> CircleFunction {
        h.to_spectral().apply_multiplier(|k| self.q(k)).to_real()
    }

    /// Default step: min(0.1, 1/(2 max_{1≤|n|≤4} |q_n|)).
    pub fn default_dt(&self) -> f64 {
        let top = (1..=4i64.min(self.n() as i64 / 2)).map(|k| self.q(k).norm()).fold(0.0, f64::max);
        if top > 0.0 {
            (0.5 / top).min(0.1)
        } else {
            0.1
        }
    }

    /// One first-order IMEX step, ρ̂ⁿ⁺¹ = (ρ̂ⁿ + dt·N̂(ρⁿ))/(1 − dt·q_n) with
    /// N(ρ) = F(ρ) − ∂F(0)ρ, followed by two-thirds dealiasing.
    pub fn step_imex(&self, state: &SimulationState, dt: f64) -> Result<SimulationState, EvolutionError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(EvolutionError::BadStep(dt));
        }
        let rho = state.shape.rho();
        let inv = self.velocity(&state.shape)?;
        let nonlinear = inv.w.sub(&self.linearized_velocity(rho));
        let rhat = rho.to_spectral();
        let nhat = nonlinear.to_spectral();
        let n = self.n();
        let mut next = Vec::with_capacity(n);
        for idx in 0..n {
            let k = crate::spectral::wavenumber(idx, n);
            let r = rhat.as_slice()[idx];
            let f = nhat.as_slice()[idx];
            next.push((r + dt * f) / (1.0 - dt * self.q(k)));
        }
        let next = SpectralCoeffs::from_fft_order(next)?.dealias();
        let (mode, defect) = next.hermitian_defect();
        let scale = next.as_slice().iter().fold(0.0f64, |m, c| m.max(c.norm()));
        if defect > HERMITIAN_TOL * scale.max(f64::MIN_POSITIVE) {
            return Err(EvolutionError::NotHermitian { mode, defect });
        }
        let values = next.from_spectral()?;
        let t = state.t + dt;
        let max_abs = values.max_abs();
        if max_abs >= CUTOFF_HALF_WIDTH {
            return Err(EvolutionError::RegimeExit { t, max_abs });
        }
        let shape = InterfaceShape::new(values)?;
        let mut monitors = state.monitors;
        let area = enclosed_area(&shape);
        monitors.max_rho = monitors.max_rho.max(max_abs);
        monitors.max_area_drift = monitors.max_area_drift.max(((area - state.area0) / state.area0).abs());
        monitors.max_inversion_residual = monitors.max_inversion_residual.max(inv.residual);
        monitors.max_hermitian_defect = monitors.max_hermitian_defect.max(defect);
        monitors.r_applications += inv.applications;
        Ok(SimulationState {
            t,
            step: state.step + 1,
            shape,
            area0: state.area0,
            monitors,
            last_residual: inv.residual,
        })
    }
}

/// Running extrema over a run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Monitors {
    pub max_rho: f64,
    /// max |A(t) − A(0)|/A(0)
    pub max_area_drift: f64,
    pub max_inversion_residual: f64,
    pub max_hermitian_defect: f64,
    /// Total applications of R so far.
    pub r_applications: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationState {
    pub t: f64,
    pub step: usize,
    pub shape: InterfaceShape,
    pub area0: f64,
    pub monitors: Monitors,
    /// Residual of the 1 − R inversion in the step that produced this state.
    pub last_residual: f64,
}

impl SimulationState {
    pub fn new(shape: InterfaceShape) -> Self {
        let area0 = enclosed_area(&shape);
        Self {
            t: 0.0,
            step: 0,
            monitors: Monitors {
                max_rho: shape.max_abs(),
                ..Default::default()
            },
            shape,
            area0,
            last_residual: 0.0,
        }
    }
}

/// Initial data as a list of (n, Re ρ̂_n, Im ρ̂_n); ρ̂_{−n} is the conjugate.
pub fn initial_shape(n: usize, modes: &[(i64, f64, f64)]) -> Result<InterfaceShape, EvolutionError> {
    let mut spec = SpectralCoeffs::zeros(n)?;
    let nyquist = spec.nyquist();
    for &(k, re, im) in modes {
        if k.abs() > nyquist {
            return Err(EvolutionError::ModeOutOfRange { mode: k, nyquist });
        }
        let (k, v) = if k < 0 {
            (-k, Complex64::new(re, -im))
        } else {
            (k, Complex64::new(re, im))
        };
        let v = spec.get(k) + v;
        spec.set_mode(k, v);
    }
    Ok(InterfaceShape::new(spec.from_spectral()?)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationConfig {
    pub model: CellModel,
    pub grid: GridConfig,
    pub initial: Vec<(i64, f64, f64)>,
    /// None selects [`Evolver::default_dt`].
    pub dt: Option<f64>,
    pub t_end: f64,
    /// Record every k-th step; the initial and final states are always kept.
    pub snapshot_every: usize,
    /// Stop cleanly once ‖ρ‖_∞ exceeds this value.
    pub stop_amplitude: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub step: usize,
    pub t: f64,
    /// ρ̂_n in FFT order.
    pub spectrum: Vec<Complex64>,
    pub max_rho: f64,
    pub area_drift: f64,
    /// ‖ρ(1+ρ/2)‖_{L²}, the weighted decay functional.
    pub weighted_norm: f64,
    pub inversion_residual: f64,
}

impl Snapshot {
    fn of(state: &SimulationState) -> Self {
        let rho = state.shape.rho();
        Self {
            step: state.step,
            t: state.t,
            spectrum: rho.to_spectral().as_slice().to_vec(),
            max_rho: rho.max_abs(),
            area_drift: (enclosed_area(&state.shape) - state.area0) / state.area0,
            weighted_norm: rho.map(|r| r * (1.0 + 0.5 * r)).l2_norm(),
            inversion_residual: state.last_residual,
        }
    }

    /// ρ̂_n for |n| ≤ N/2.
    pub fn mode(&self, k: i64) -> Complex64 {
        self.spectrum[k.rem_euclid(self.spectrum.len() as i64) as usize]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Termination {
    Completed,
    /// ‖ρ‖_∞ passed the configured stop amplitude.
    AmplitudeReached,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationRun {
    pub dt: f64,
    pub snapshots: Vec<Snapshot>,
    pub monitors: Monitors,
    pub termination: Termination,
}

/// Runs a simulation, handing each snapshot to `sink` as soon as it is taken.
/// Failures end the run with [`Termination::Failed`] after the snapshots
/// recorded so far; setup errors are returned directly.
pub fn simulate_with(cfg: &SimulationConfig, mut sink: impl FnMut(&Snapshot)) -> Result<SimulationRun, EvolutionError> {
    let evolver = Evolver::new(cfg.model, cfg.grid)?;
    let shape = initial_shape(cfg.grid.n, &cfg.initial)?;
    let dt = cfg.dt.unwrap_or_else(|| evolver.default_dt());
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(EvolutionError::BadStep(dt));
    }
    let every = cfg.snapshot_every.max(1);
    let steps = (cfg.t_end / dt - 1e-9).ceil().max(0.0) as usize;
    let mut state = SimulationState::new(shape);
    let mut snapshots = Vec::new();
    let mut push = |snap: Snapshot, list: &mut Vec<Snapshot>| {
        sink(&snap);
        list.push(snap);
    };
    push(Snapshot::of(&state), &mut snapshots);
    let mut termination = Termination::Completed;
    for i in 0..steps {
        let h = if i + 1 == steps { cfg.t_end - state.t } else { dt };
        let h = if h > 0.0 { h } else { dt };
        match evolver.step_imex(&state, h) {
            Ok(next) => state = next,
            Err(e) => {
                termination = Termination::Failed(e.to_string());
                break;
            }
        }
        let stop = cfg.stop_amplitude.is_some_and(|a| state.shape.max_abs() > a);
        if stop || i + 1 == steps || state.step % every == 0 {
            push(Snapshot::of(&state), &mut snapshots);
        }
        if stop {
            termination = Termination::AmplitudeReached;
            break;
        }
    }
    Ok(SimulationRun {
        dt,
        snapshots,
        monitors: state.monitors,
        termination,
    })
}

pub fn simulate(cfg: &SimulationConfig) -> Result<SimulationRun, EvolutionError> {
    simulate_with(cfg, |_| {})
}

/// Least-squares rate and frequency of one Fourier mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub mode: i64,
    /// Slope of log|ρ̂_n| in t.
    pub rate: f64,
    /// Slope of the unwrapped arg ρ̂_n in t.
    pub frequency: f64,
    /// RMS misfit of the log-amplitude line.
    pub residual: f64,
    pub samples: usize,
}

fn line_fit(t: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = t.len() as f64;
    let tm = t.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let stt: f64 = t.iter().map(|t| (t - tm) * (t - tm)).sum();
    let sty: f64 = t.iter().zip(y).map(|(t, y)| (t - tm) * (y - ym)).sum();
    let slope = sty / stt;
    let icpt = ym - slope * tm;
    let rms = (t.iter().zip(y).map(|(t, y)| (y - icpt - slope * t).powi(2)).sum::<f64>() / n).sqrt();
    (slope, icpt, rms)
}

/// Fits ρ̂_n(t) ≈ C·e^{(rate + i·frequency)t} over the snapshots where
/// |ρ̂_n| > 1e−14.
pub fn fit_rate(run: &SimulationRun, n: i64) -> Result<RateFit, EvolutionError> {
    let series: Vec<(f64, Complex64)> = run.snapshots.iter().map(|s| (s.t, s.mode(n))).filter(|(_, c)| c.norm() > 1e-14).collect();
    if series.len() < MIN_FIT_SAMPLES {
        return Err(EvolutionError::InsufficientSamples {
            needed: MIN_FIT_SAMPLES,
            got: series.len(),
        });
    }
    let t: Vec<f64> = series.iter().map(|p| p.0).collect();
    let amp: Vec<f64> = series.iter().map(|p| p.1.norm().ln()).collect();
    let mut phase = Vec::with_capacity(series.len());
    let mut prev = series[0].1.arg();
    let mut acc = prev;
    for (_, c) in &series {
        let a = c.arg();
        let mut d = a - prev;
        d -= (d / std::f64::consts::TAU).round() * std::f64::consts::TAU;
        acc += d;
        prev = a;
        phase.push(acc);
    }
    let (rate, _, residual) = line_fit(&t, &amp);
    let (frequency, _, _) = line_fit(&t, &phase);
    Ok(RateFit {
        mode: n,
        rate,
        frequency,
        residual,
        samples: series.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::DerivedCoeffs;

    fn p0() -> CellModel {
        CellModel::from_derived(DerivedCoeffs::new(1.0, 2.0, 0.0, 0.0, 0.0, 1.0), 1.0, 2.0).unwrap()
    }

    fn grid() -> GridConfig {
        GridConfig {
            n: 32,
            m_inner: 48,
            m_outer: 48,
        }
    }

    #[test]
    fn r_of_cosine_at_rest() {
        let ev = Evolver::new(p0(), grid()).unwrap();
        let s = InterfaceShape::circle(32).unwrap();
        let z = CircleFunction::from_fn(32, f64::cos).unwrap();
        let rz = ev.apply_r(&s, &z).unwrap();
        for (a, t) in rz.values().iter().zip(z.nodes()) {
            assert!((a + 0.3 * t.cos()).abs() < 1e-10, "{a}");
        }
        let zero = CircleFunction::zeros(32).unwrap();
        assert_eq!(ev.apply_r(&s, &zero).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn inversion_at_rest_is_the_multiplier() {
        let ev = Evolver::new(p0(), grid()).unwrap();
        let s = InterfaceShape::circle(32).unwrap();
        let rhs = CircleFunction::from_fn(32, |t| (3.0 * t).sin()).unwrap();
        let inv = ev.invert_one_minus_r(&s, &rhs).unwrap();
        let l3 = compute_l_n(&ev.model.coeffs, 2.0, 3).unwrap().re;
        for (w, t) in inv.w.values().iter().zip(rhs.nodes()) {
            assert!((w - (3.0 * t).sin() / (1.0 - l3)).abs() < 1e-10);
        }
    }

    #[test]
    fn equilibrium_is_exact() {
        let ev = Evolver::new(p0(), grid()).unwrap();
        let state = SimulationState::new(InterfaceShape::circle(32).unwrap());
        let next = ev.step_imex(&state, 0.5).unwrap();
        assert!(next.shape.rho().values().iter().all(|&v| v == 0.0));
        assert_eq!(next.monitors.max_area_drift, 0.0);
    }

    #[test]
    fn linear_step_amplification() {
        let ev = Evolver::new(p0(), grid()).unwrap();
        let eps = 1e-7;
        let shape = initial_shape(32, &[(2, 0.5 * eps, 0.0)]).unwrap();
        let dt = 0.01;
        let next = ev.step_imex(&SimulationState::new(shape), dt).unwrap();
        let got = next.shape.rho().to_spectral().get(2).re / (0.5 * eps);
        let expected = 1.0 / (1.0 - dt * (-150.0 / 49.0));
        assert!((got - expected).abs() < 1e-6, "{got} vs {expected}");
    }

    #[test]
    fn fit_recovers_exact_exponential() {
        let q = Complex64::new(-0.7, 0.25);
        let snapshots = (0..20)
            .map(|i| {
                let t = 0.1 * i as f64;
                let mut spectrum = vec![Complex64::new(0.0, 0.0); 16];
                spectrum[3] = 1e-3 * (q * t).exp();
                spectrum[13] = spectrum[3].conj();
                Snapshot {
                    step: i,
                    t,
                    spectrum,
                    max_rho: 0.0,
                    area_drift: 0.0,
                    weighted_norm: 0.0,
                    inversion_residual: 0.0,
                }
            })
            .collect();
        let run = SimulationRun {
            dt: 0.1,
            snapshots,
            monitors: Monitors::default(),
            termination: Termination::Completed,
        };
        let fit = fit_rate(&run, 3).unwrap();
        assert!((fit.rate - q.re).abs() < 1e-10);
        assert!((fit.frequency - q.im).abs() < 1e-10);
        let back = fit_rate(&run, -3).unwrap();
        assert!((back.frequency + q.im).abs() < 1e-10);
        assert!(matches!(fit_rate(&run, 4), Err(EvolutionError::InsufficientSamples { .. })));
    }

    #[test]
    fn zero_run_stays_zero() {
        let cfg = SimulationConfig {
            model: p0(),
            grid: grid(),
            initial: vec![],
            dt: Some(0.05),
            t_end: 0.5,
            snapshot_every: 2,
            stop_amplitude: None,
        };
        let run = simulate(&cfg).unwrap();
        assert_eq!(run.termination, Termination::Completed);
        assert_eq!(run.snapshots.len(), 6);
        assert!(run.snapshots.iter().all(|s| s.spectrum.iter().all(|c| c.norm() == 0.0)));
        assert!((run.snapshots.last().unwrap().t - 0.5).abs() < 1e-12);
    }
}
