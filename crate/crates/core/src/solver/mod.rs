//! Implicit time integration of the active/passive population system
//!
//! ```text
//! ∂ₜ(u^λ) − div(K₁(|∇u|)∇u) = −b(u − v)
//! ∂ₜv     − K₂Δv            =  b(u − v)
//! ```
//!
//! with zero flux on walls and the outflow `−K₁∇u·n = φu^λ` on exits.

mod discrete;
pub mod initial;
pub mod mms;
mod run;
mod step;

use serde::{Deserialize, Serialize};

use crate::constitutive::{CouplingLaw, ForchheimerPolynomial};
use crate::error::ValidationError;
use crate::grid::{ScalarField, StructuredGrid};

pub use discrete::{face_gradients, pow_signed};
pub use run::{run, RunSummary, StepRecord};
pub use step::{coupled_step, step_p1, step_p2, CoupledOutcome, P1Outcome};

/// Physical parameters of the model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParameters {
    pub lambda: f64,
    pub k2: f64,
    pub poly: ForchheimerPolynomial,
    pub coupling: CouplingLaw,
    alpha: f64,
    pub t_final: f64,
}

/// A violated solvability hypothesis of the model.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibilityIssue {
    pub condition: &'static str,
    pub detail: String,
}

impl std::fmt::Display for AdmissibilityIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} ({})", self.condition, self.detail)
    }
}

impl ModelParameters {
    /// Validates structural ranges; `alpha = None` selects `2 − δ`.
    pub fn new(
        lambda: f64,
        k2: f64,
        poly: ForchheimerPolynomial,
        coupling: CouplingLaw,
        alpha: Option<f64>,
        t_final: f64,
    ) -> Result<Self, ValidationError> {
        const CTX: &str = "model";
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(ValidationError::new(CTX, format!("lambda must lie in (0,1], got {lambda}")));
        }
        if !(k2 > 0.0) || !k2.is_finite() {
            return Err(ValidationError::new(CTX, format!("K2 must be positive, got {k2}")));
        }
        if !(t_final >= 0.0) || !t_final.is_finite() {
            return Err(ValidationError::new(CTX, format!("T must be >= 0, got {t_final}")));
        }
        let delta = 1.0 - lambda;
        let alpha = alpha.unwrap_or(2.0 - delta);
        if !(alpha >= 2.0 - delta - 1e-15 && alpha <= 2.0) {
            return Err(ValidationError::new(
                CTX,
                format!("alpha must lie in [2 - delta, 2] = [{}, 2], got {alpha}", 2.0 - delta),
            ));
        }
        Ok(Self {
            lambda,
            k2,
            poly,
            coupling,
            alpha,
            t_final,
        })
    }

    /// `δ = 1 − λ`.
    pub fn delta(&self) -> f64 {
        1.0 - self.lambda
    }

    /// Exponent of the energy `∫|u|^α`.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `a = α_N/(α_N + 1)` of the Forchheimer polynomial.
    pub fn exponent_a(&self) -> f64 {
        self.poly.exponent_a()
    }

    /// Hypotheses of the existence theory: `a > δ`, `2 − δ ≤ α ≤ 2`, `σ ≤ α/2`.
    pub fn admissibility(&self) -> Vec<AdmissibilityIssue> {
        let mut out = Vec::new();
        let (a, delta) = (self.exponent_a(), self.delta());
        if !(a > delta) {
            out.push(AdmissibilityIssue {
                condition: "a > delta",
                detail: format!("a = {a}, delta = {delta}"),
            });
        }
        let sigma = self.coupling.sigma();
        if self.coupling.is_active() && sigma > self.alpha / 2.0 {
            out.push(AdmissibilityIssue {
                condition: "sigma <= alpha/2",
                detail: format!("sigma = {sigma}, alpha = {}", self.alpha),
            });
        }
        out
    }

    /// Logs admissibility violations, or rejects them when `strict`.
    pub fn check_admissibility(&self, strict: bool) -> Result<(), ValidationError> {
        let issues = self.admissibility();
        if issues.is_empty() {
            return Ok(());
        }
        let text = issues.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("; ");
        if strict {
            return Err(ValidationError::new("admissibility", text));
        }
        log::warn!("parameters violate solvability hypotheses: {text}");
        Ok(())
    }
}

/// How the two sub-problems are coupled within a time step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CouplingMode {
    /// Both equations linearized together and solved as one block system
    /// per coupling iteration.
    #[default]
    Monolithic,
    /// Alternating sub-problem solves: `u` with `v` frozen, then `v` with
    /// `u` frozen.
    Sequential,
}

/// Numerical controls of the time stepper.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StepperConfig {
    pub dt: f64,
    /// Tolerance on the max-norm update of the coupling iteration.
    pub tol_c: f64,
    /// Tolerance on the max-norm update of the inner Picard iteration.
    pub tol_p: f64,
    pub max_coupling: usize,
    pub max_picard: usize,
    /// Under-relaxation factor of the coupling iteration.
    pub omega: f64,
    pub coupling: CouplingMode,
    /// Relative residual target of each linear solve.
    pub linear_rtol: f64,
    pub linear_max_iter: usize,
    /// Positivity floor in the frozen factor `max(u, floor)^{λ−1}`.
    pub eps_floor: f64,
    /// Floor on `|u − v|` in the secant slope of `b`.
    pub z_floor: f64,
    /// Maximum number of step halvings after a failed step.
    pub max_halvings: u32,
}

impl Default for StepperConfig {
    fn default() -> Self {
        Self {
            dt: 0.01,
            tol_c: 1e-10,
            tol_p: 1e-10,
            max_coupling: 200,
            max_picard: 200,
            omega: 0.8,
            coupling: CouplingMode::Monolithic,
            linear_rtol: 1e-8,
            linear_max_iter: 5000,
            eps_floor: 1e-8,
            z_floor: 1e-12,
            max_halvings: 5,
        }
    }
}

impl StepperConfig {
    pub fn validate(&self) -> Result<(), ValidationError> {
        const CTX: &str = "stepper";
        let positive = [
            ("dt", self.dt),
            ("tol_c", self.tol_c),
            ("tol_p", self.tol_p),
            ("linear_rtol", self.linear_rtol),
            ("eps_floor", self.eps_floor),
            ("z_floor", self.z_floor),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(ValidationError::new(CTX, format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.omega > 0.0 && self.omega <= 1.0) {
            return Err(ValidationError::new(
                CTX,
                format!("omega must lie in (0,1], got {}", self.omega),
            ));
        }
        if self.max_coupling == 0 || self.max_picard == 0 || self.linear_max_iter == 0 {
            return Err(ValidationError::new(CTX, "iteration limits must be positive"));
        }
        Ok(())
    }
}

/// Fields at one time level. `w` holds `u^λ`, the conserved form of `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationState {
    pub t: f64,
    pub u: ScalarField,
    pub w: ScalarField,
    pub v: ScalarField,
}

impl SimulationState {
    /// Builds a state from initial densities, clamping both to `>= 0` when
    /// `λ < 1`.
    pub fn new(u0: ScalarField, v0: ScalarField, lambda: f64) -> Self {
        let (u, v) = if discrete::clamps_negative(lambda) {
            (u0.map(|x| x.max(0.0)), v0.map(|x| x.max(0.0)))
        } else {
            (u0, v0)
        };
        let w = u.map(|x| pow_signed(x, lambda));
        Self { t: 0.0, u, w, v }
    }

    pub fn matches(&self, grid: &StructuredGrid) -> bool {
        self.u.matches(grid) && self.w.matches(grid) && self.v.matches(grid)
    }
}

/// Source terms added to the right-hand sides, used to manufacture exact
/// solutions.
pub trait Forcing {
    /// Cell-center sources `(S_u, S_v)` at time `t`.
    fn cell_sources(&self, grid: &StructuredGrid, t: f64) -> (Vec<f64>, Vec<f64>);
    /// Extra outward flux of `u` on each boundary face (indexed like
    /// [`StructuredGrid::boundary_faces`]) at time `t`; only Robin faces are
    /// read.
    fn boundary_flux(&self, grid: &StructuredGrid, t: f64) -> Vec<f64>;
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly() -> ForchheimerPolynomial {
        ForchheimerPolynomial::new(vec![1.0, 1.0], vec![0.0, 1.0]).unwrap()
    }

    #[test]
    fn alpha_defaults_to_lower_end() {
        let p = ModelParameters::new(0.8, 1.0, poly(), CouplingLaw::disabled(), None, 1.0).unwrap();
        assert!((p.alpha() - 1.8).abs() < 1e-15);
        assert!(ModelParameters::new(0.8, 1.0, poly(), CouplingLaw::disabled(), Some(1.5), 1.0).is_err());
        assert!(ModelParameters::new(0.8, 1.0, poly(), CouplingLaw::disabled(), Some(2.1), 1.0).is_err());
        assert!(ModelParameters::new(1.2, 1.0, poly(), CouplingLaw::disabled(), None, 1.0).is_err());
        assert!(ModelParameters::new(0.8, 0.0, poly(), CouplingLaw::disabled(), None, 1.0).is_err());
    }

    #[test]
    fn admissibility_flags_small_a() {
        // λ = 0.4 gives δ = 0.6 > a = 0.5.
        let p = ModelParameters::new(0.4, 1.0, poly(), CouplingLaw::disabled(), None, 1.0).unwrap();
        assert_eq!(p.admissibility().len(), 1);
        assert!(p.check_admissibility(false).is_ok());
        assert!(p.check_admissibility(true).is_err());
        let ok = ModelParameters::new(0.8, 1.0, poly(), CouplingLaw::new(1.0, 0.5).unwrap(), None, 1.0).unwrap();
        assert!(ok.admissibility().is_empty());
    }

    #[test]
    fn stepper_validation() {
        assert!(StepperConfig::default().validate().is_ok());
        let bad = StepperConfig {
            omega: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = StepperConfig {
            dt: -1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
