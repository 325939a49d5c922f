//! Physical parameters of the rotating cell and the derived coefficient set.
//!
//! Two entry points normalize into a [`CellModel`]: raw physical inputs
//! ([`PhysicalParams`], mapped through [`derive_coefficients`]) or the derived
//! coefficients themselves ([`CellModel::from_derived`]). Everything downstream
//! works in derived coefficients only.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Smallest admissible cell radius.
pub const MIN_CELL_RADIUS: f64 = 2.0;

/// Raw physical inputs. Units are nondimensional.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub eta_i: f64,
    pub eta_o: f64,
    pub rho_i: f64,
    pub rho_o: f64,
    /// Gap width between the plates.
    pub b: f64,
    pub omega: f64,
    pub sigma: f64,
    /// Cell radius `R`.
    pub cell_radius: f64,
    pub e_i: f64,
    pub e_o: f64,
    pub f_i: f64,
    pub f_o: f64,
}

/// Coefficients of the generalized Darcy law and the centrifugal term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedCoeffs {
    pub alpha_i: f64,
    pub alpha_o: f64,
    pub beta_i: f64,
    pub beta_o: f64,
    pub gamma_i: f64,
    pub gamma_o: f64,
    pub theta_i: Complex64,
    pub theta_o: Complex64,
}

impl DerivedCoeffs {
    /// Builds the coefficient set from α, β, γ directly; Θ_j = α_j + iβ_j.
    pub fn new(alpha_i: f64, alpha_o: f64, beta_i: f64, beta_o: f64, gamma_i: f64, gamma_o: f64) -> Self {
        Self {
            alpha_i,
            alpha_o,
            beta_i,
            beta_o,
            gamma_i,
            gamma_o,
            theta_i: Complex64::new(alpha_i, beta_i),
            theta_o: Complex64::new(alpha_o, beta_o),
        }
    }

    /// `|Θ_i|²`
    pub fn theta_i_sq(&self) -> f64 {
        self.theta_i.norm_sqr()
    }

    /// `|Θ_o|²`
    pub fn theta_o_sq(&self) -> f64 {
        self.theta_o.norm_sqr()
    }

    /// `γ_o − γ_i`; positive when the outer fluid is denser.
    pub fn gamma_jump(&self) -> f64 {
        self.gamma_o - self.gamma_i
    }

    /// Coriolis asymmetry `B = β_o − β_i`.
    pub fn coriolis_asymmetry(&self) -> f64 {
        self.beta_o - self.beta_i
    }

    /// Darcy coefficients `(α_j, β_j)` of one phase.
    pub fn phase(&self, phase: Phase) -> (f64, f64) {
        match phase {
            Phase::Inner => (self.alpha_i, self.beta_i),
            Phase::Outer => (self.alpha_o, self.beta_o),
        }
    }
}

/// Which fluid a quantity refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Inner,
    Outer,
}

/// Everything the analysis needs: derived coefficients plus σ and R.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellModel {
    pub coeffs: DerivedCoeffs,
    pub sigma: f64,
    pub cell_radius: f64,
    /// Densities when the model came from physical inputs.
    pub densities: Option<(f64, f64)>,
}

impl CellModel {
    pub fn from_physical(p: &PhysicalParams) -> Result<Self, ParamError> {
        let coeffs = derive_coefficients(p)?;
        Ok(Self {
            coeffs,
            sigma: p.sigma,
            cell_radius: p.cell_radius,
            densities: Some((p.rho_i, p.rho_o)),
        })
    }

    /// Direct entry point bypassing the physical layer.
    pub fn from_derived(coeffs: DerivedCoeffs, sigma: f64, cell_radius: f64) -> Result<Self, ParamError> {
        let report = validate_derived(&coeffs, sigma, cell_radius);
        if !report.is_empty() {
            return Err(ParamError::Invalid(report));
        }
        Ok(Self {
            coeffs,
            sigma,
            cell_radius,
            densities: None,
        })
    }
}

/// One violated admissibility bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub field: &'static str,
    pub rule: &'static str,
    pub value: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {} violates {}", self.field, self.value, self.rule)
    }
}

/// All violated bounds of a parameter set; empty iff admissible.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn mentions(&self, rule: &str) -> bool {
        self.violations.iter().any(|v| v.rule == rule)
    }

    fn positive(&mut self, field: &'static str, rule: &'static str, value: f64) {
        if !(value.is_finite() && value > 0.0) {
            self.violations.push(Violation { field, rule, value });
        }
    }

    fn nonnegative(&mut self, field: &'static str, rule: &'static str, value: f64) {
        if !(value.is_finite() && value >= 0.0) {
            self.violations.push(Violation { field, rule, value });
        }
    }

    fn radius(&mut self, value: f64) {
        if !(value.is_finite() && value >= MIN_CELL_RADIUS) {
            self.violations.push(Violation {
                field: "R",
                rule: "R ≥ 2",
                value,
            });
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        f.write_str(&parts.join("; "))
    }
}

#[derive(Debug, Error)]
pub enum ParamError {
    #[error("invalid parameters: {0}")]
    Invalid(ValidationReport),
}

/// Lists every violated bound of a physical parameter set.
pub fn validate(p: &PhysicalParams) -> ValidationReport {
    let mut r = ValidationReport::default();
    r.positive("eta_i", "η_i > 0", p.eta_i);
    r.positive("eta_o", "η_o > 0", p.eta_o);
    r.positive("rho_i", "ϱ_i > 0", p.rho_i);
    r.positive("rho_o", "ϱ_o > 0", p.rho_o);
    r.positive("b", "b > 0", p.b);
    r.positive("omega", "ω > 0", p.omega);
    r.positive("sigma", "σ > 0", p.sigma);
    r.radius(p.cell_radius);
    r.positive("E_i", "E_i > 0", p.e_i);
    r.positive("E_o", "E_o > 0", p.e_o);
    r.nonnegative("F_i", "F_i ≥ 0", p.f_i);
    r.nonnegative("F_o", "F_o ≥ 0", p.f_o);
    r
}

/// Bounds for the derived entry point.
pub fn validate_derived(c: &DerivedCoeffs, sigma: f64, cell_radius: f64) -> ValidationReport {
    let mut r = ValidationReport::default();
    r.positive("alpha_i", "α_i > 0", c.alpha_i);
    r.positive("alpha_o", "α_o > 0", c.alpha_o);
    r.nonnegative("beta_i", "β_i ≥ 0", c.beta_i);
    r.nonnegative("beta_o", "β_o ≥ 0", c.beta_o);
    r.nonnegative("gamma_i", "γ_i ≥ 0", c.gamma_i);
    r.nonnegative("gamma_o", "γ_o ≥ 0", c.gamma_o);
    r.positive("sigma", "σ > 0", sigma);
    r.radius(cell_radius);
    r
}

/// α_j = 12η_jE_j/b², β_j = 12η_jF_j/b², γ_j = ϱ_jω²/2.
pub fn derive_coefficients(p: &PhysicalParams) -> Result<DerivedCoeffs, ParamError> {
    let report = validate(p);
    if !report.is_empty() {
        return Err(ParamError::Invalid(report));
    }
    let k = 12.0 / (p.b * p.b);
    let half_w2 = 0.5 * p.omega * p.omega;
    Ok(DerivedCoeffs::new(
        k * p.eta_i * p.e_i,
        k * p.eta_o * p.e_o,
        k * p.eta_i * p.f_i,
        k * p.eta_o * p.f_o,
        p.rho_i * half_w2,
        p.rho_o * half_w2,
    ))
}
