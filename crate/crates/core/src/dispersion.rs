//! Linear theory about the circular state.
//!
//! Every per-mode quantity is evaluated in terms of `x = R^{−2|n|}` so that
//! nothing overflows for large |n|.

use crate::params::{CellModel, DerivedCoeffs};
use crate::spectral::SpectralCoeffs;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use std::fmt;
use thiserror::Error;

/// Largest |n| accepted by the per-mode formulas.
pub const MAX_MODE: i64 = 512;
pub const DEFAULT_N_MAX: usize = 128;

#[derive(Debug, Error, PartialEq)]
pub enum DispersionError {
    #[error("mode {0} outside the supported range |n| ≤ {MAX_MODE}")]
    ModeOutOfRange(i64),
    #[error("mode {mode} exceeds the table range n_max = {n_max}")]
    BeyondTable { mode: i64, n_max: usize },
    #[error("n_max must be at least 1")]
    EmptyTable,
    #[error("classifier inconsistency: density rule says {rule}, spectrum says {spectrum} ({detail})")]
    Inconsistent {
        rule: Verdict,
        spectrum: Verdict,
        detail: String,
    },
}

fn check_mode(n: i64) -> Result<(), DispersionError> {
    if n.abs() > MAX_MODE {
        Err(DispersionError::ModeOutOfRange(n))
    } else {
        Ok(())
    }
}

fn decay_factor(r: f64, n: i64) -> f64 {
    r.powi(-2 * n.abs() as i32)
}

/// Symbol l_n of R(0).
pub fn compute_l_n(c: &DerivedCoeffs, r: f64, n: i64) -> Result<Complex64, DispersionError> {
    check_mode(n)?;
    if n == 0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let x = decay_factor(r, n);
    let ti2 = c.theta_i_sq();
    let to = c.theta_o;
    let l = if n > 0 {
        (x - 1.0) * ti2 / (Complex64::new(c.alpha_i, -c.beta_i) * (x * to + to.conj()))
    } else {
        (1.0 - x) * ti2 / (Complex64::new(-c.alpha_i, -c.beta_i) * (to + x * to.conj()))
    };
    Ok(l)
}

/// A_n = coth-type weight (R^{2|n|}+1)/(R^{2|n|}−1)·α_o + α_i; even in n.
pub fn compute_a_n(c: &DerivedCoeffs, r: f64, n: i64) -> Result<f64, DispersionError> {
    check_mode(n)?;
    if n == 0 {
        return Ok(f64::INFINITY);
    }
    let x = decay_factor(r, n);
    Ok((1.0 + x) / (1.0 - x) * c.alpha_o + c.alpha_i)
}

/// μ(n) = |n|(σ − 2(γ_o−γ_i) − σn²)
pub fn mu(c: &DerivedCoeffs, sigma: f64, n: i64) -> f64 {
    let m = n.abs() as f64;
    m * (sigma - 2.0 * c.gamma_jump() - sigma * m * m)
}

/// q_n = (A_n + i·sign(n)B)/(A_n² + B²)·μ(n), with q_0 = 0.
pub fn compute_q_n(c: &DerivedCoeffs, sigma: f64, r: f64, n: i64) -> Result<Complex64, DispersionError> {
    check_mode(n)?;
    if n == 0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let a = compute_a_n(c, r, n)?;
    let b = c.coriolis_asymmetry();
    let sign = n.signum() as f64;
    Ok(Complex64::new(a, sign * b) / (a * a + b * b) * mu(c, sigma, n))
}

/// λ* = 1 + 2|γ_o−γ_i|/(α_o+α_i)
pub fn spectral_bound(c: &DerivedCoeffs) -> f64 {
    1.0 + 2.0 * c.gamma_jump().abs() / (c.alpha_o + c.alpha_i)
}

/// max(0, sup_{n≥1} μ(n))/(α_o+α_i), which dominates Re q_n for every n
/// because A_n ≥ α_o+α_i.
pub fn growth_bound(c: &DerivedCoeffs, sigma: f64) -> f64 {
    let k = sigma - 2.0 * c.gamma_jump();
    let peak = (k / (3.0 * sigma)).max(1.0).sqrt();
    let lo = peak.floor().max(1.0) as i64;
    let best = [1, lo, lo + 1].iter().map(|&n| mu(c, sigma, n)).fold(f64::NEG_INFINITY, f64::max);
    best.max(0.0) / (c.alpha_o + c.alpha_i)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Stable,
    Unstable,
    Neutral,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Verdict::Stable => "Stable",
            Verdict::Unstable => "Unstable",
            Verdict::Neutral => "Neutral",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeRecord {
    pub n: i64,
    pub l_n: Complex64,
    pub a_n: f64,
    pub mu_n: f64,
    pub q_n: Complex64,
}

/// Per-mode linear data for 1 ≤ |n| ≤ n_max.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DispersionTable {
    pub n_max: usize,
    /// Records for n = 1..=n_max.
    pub positive: Vec<ModeRecord>,
    /// Records for n = −1..=−n_max.
    pub negative: Vec<ModeRecord>,
    pub coriolis_b: f64,
    pub lambda_star: f64,
}

impl DispersionTable {
    pub fn new(model: &CellModel, n_max: usize) -> Result<Self, DispersionError> {
        if n_max == 0 {
            return Err(DispersionError::EmptyTable);
        }
        check_mode(n_max as i64)?;
        let c = &model.coeffs;
        let record = |n: i64| -> ModeRecord {
            ModeRecord {
                n,
                l_n: compute_l_n(c, model.cell_radius, n).expect("mode checked"),
                a_n: compute_a_n(c, model.cell_radius, n).expect("mode checked"),
                mu_n: mu(c, model.sigma, n),
                q_n: compute_q_n(c, model.sigma, model.cell_radius, n).expect("mode checked"),
            }
        };
        let positive = (1..=n_max as i64).into_par_iter().map(record).collect();
        let negative = (1..=n_max as i64).into_par_iter().map(|n| record(-n)).collect();
        Ok(Self {
            n_max,
            positive,
            negative,
            coriolis_b: c.coriolis_asymmetry(),
            lambda_star: spectral_bound(c),
        })
    }

    pub fn record(&self, n: i64) -> Option<&ModeRecord> {
        match n {
            0 => None,
            n if n > 0 => self.positive.get(n as usize - 1),
            n => self.negative.get((-n) as usize - 1),
        }
    }

    /// q_n with q_0 = 0.
    pub fn q(&self, n: i64) -> Result<Complex64, DispersionError> {
        if n == 0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        self.record(n).map(|r| r.q_n).ok_or(DispersionError::BeyondTable {
            mode: n,
            n_max: self.n_max,
        })
    }

    pub fn max_growth(&self) -> f64 {
        self.positive.iter().map(|r| r.q_n.re).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Verdict read off the signs of Re q_n, n ≥ 1.
    pub fn spectral_verdict(&self) -> Verdict {
        if self.positive.iter().any(|r| r.q_n.re > 0.0) {
            Verdict::Unstable
        } else if self.positive.iter().all(|r| r.q_n.re < 0.0) {
            Verdict::Stable
        } else {
            Verdict::Neutral
        }
    }
}

/// Stable iff the outer fluid is denser, with the spectrum as cross-check.
///
/// The density rule uses ϱ_j when the model carries them, otherwise the sign
/// of γ_o − γ_i (equivalent, since γ_j = ϱ_jω²/2).
pub fn classify_stability(model: &CellModel, n_max: usize) -> Result<Verdict, DispersionError> {
    let (inner, outer) = model.densities.unwrap_or((model.coeffs.gamma_i, model.coeffs.gamma_o));
    let rule = if outer > inner {
        Verdict::Stable
    } else if inner > outer {
        Verdict::Unstable
    } else {
        Verdict::Neutral
    };
    let table = DispersionTable::new(model, n_max)?;
    let spectrum = table.spectral_verdict();
    let q1 = table.q(1)?;
    let consistent = match rule {
        Verdict::Neutral => spectrum == Verdict::Neutral && q1 == Complex64::new(0.0, 0.0),
        _ => spectrum == rule,
    };
    if consistent {
        Ok(rule)
    } else {
        Err(DispersionError::Inconsistent {
            rule,
            spectrum,
            detail: format!("q_1 = {q1}, max Re q_n = {:.6e}", table.max_growth()),
        })
    }
}

/// ρ̂_n(t) = e^{q_n t}ρ̂_n(0). The mean mode is frozen (q_0 = 0); the Nyquist
/// mode, which must stay real, uses Re q_{N/2}.
pub fn linear_propagator(table: &DispersionTable, rho0: &SpectralCoeffs, t: f64) -> Result<SpectralCoeffs, DispersionError> {
    let nyq = rho0.nyquist();
    if nyq as usize > table.n_max {
        return Err(DispersionError::BeyondTable {
            mode: nyq,
            n_max: table.n_max,
        });
    }
    Ok(rho0.apply_multiplier(|n| {
        let q = table.q(n).expect("range checked");
        if n == nyq {
            Complex64::new((q.re * t).exp(), 0.0)
        } else {
            (q * t).exp()
        }
    }))
}

/// argmax_{n≥1} Re q_n, ties resolved toward the smaller n.
pub fn fastest_growing_mode(table: &DispersionTable) -> (i64, f64) {
    let mut best = (1, table.positive[0].q_n.re);
    for r in &table.positive[1..] {
        if r.q_n.re > best.1 {
            best = (r.n, r.q_n.re);
        }
    }
    best
}
