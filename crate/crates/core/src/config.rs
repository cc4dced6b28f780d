//! TOML run configuration.
//!
//! ```toml
//! [model]
//! lambda = 0.8
//! K2 = 1.0
//! g_coeffs = [1.0, 1.0]
//! g_exps = [0.0, 1.0]
//! c_hat = 1.0
//! sigma = 0.5
//! phi = 1.0
//!
//! [grid]
//! nx = 64
//! ny = 64
//!
//! [stepper]
//! dt = 0.01
//! T = 1.0
//! ```
//!
//! Every section and key other than those shown is optional.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::constitutive::{CouplingLaw, ForchheimerPolynomial};
use crate::error::{Error, Result, ValidationError};
use crate::grid::{EdgeTags, GridSpec, PhiSchedule};
use crate::solver::initial::InitialField;
use crate::solver::mms::{LadderLevel, Manufactured, ManufacturedField};
use crate::solver::{CouplingMode, ModelParameters, StepperConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub model: ModelSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub stepper: StepperSection,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default)]
    pub io: IoSection,
    #[serde(default)]
    pub energy: EnergySection,
    #[serde(default)]
    pub mms: MmsSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub lambda: f64,
    #[serde(rename = "K2", alias = "k2", default = "one")]
    pub k2: f64,
    #[serde(default = "default_g_coeffs")]
    pub g_coeffs: Vec<f64>,
    #[serde(default = "default_g_exps")]
    pub g_exps: Vec<f64>,
    #[serde(default = "one")]
    pub c_hat: f64,
    #[serde(default = "half")]
    pub sigma: f64,
    /// Robin coefficient on exit faces.
    #[serde(default = "one")]
    pub phi: f64,
    /// Energy exponent; defaults to `2 − δ`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            lambda: 0.8,
            k2: 1.0,
            g_coeffs: default_g_coeffs(),
            g_exps: default_g_exps(),
            c_hat: 1.0,
            sigma: 0.5,
            phi: 1.0,
            alpha: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "default_n")]
    pub nx: usize,
    #[serde(default = "default_n")]
    pub ny: usize,
    #[serde(default = "one")]
    pub lx: f64,
    #[serde(default = "one")]
    pub ly: f64,
    #[serde(default)]
    pub edges: EdgeTags,
    #[serde(default)]
    pub phi_schedule: PhiSchedule,
    #[serde(default)]
    pub conservation_mode: bool,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            nx: default_n(),
            ny: default_n(),
            lx: 1.0,
            ly: 1.0,
            edges: EdgeTags::default(),
            phi_schedule: PhiSchedule::Constant,
            conservation_mode: false,
        }
    }
}

/// Final time plus the fields of [`StepperConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StepperSection {
    #[serde(rename = "T")]
    pub t_final: f64,
    pub dt: f64,
    pub tol_c: f64,
    pub tol_p: f64,
    pub max_coupling: usize,
    pub max_picard: usize,
    pub omega: f64,
    pub coupling: CouplingMode,
    pub linear_rtol: f64,
    pub linear_max_iter: usize,
    pub eps_floor: f64,
    pub z_floor: f64,
    pub max_halvings: u32,
}

impl StepperSection {
    pub fn numerics(&self) -> StepperConfig {
        StepperConfig {
            dt: self.dt,
            tol_c: self.tol_c,
            tol_p: self.tol_p,
            max_coupling: self.max_coupling,
            max_picard: self.max_picard,
            omega: self.omega,
            coupling: self.coupling,
            linear_rtol: self.linear_rtol,
            linear_max_iter: self.linear_max_iter,
            eps_floor: self.eps_floor,
            z_floor: self.z_floor,
            max_halvings: self.max_halvings,
        }
    }

    pub fn from_numerics(t_final: f64, c: &StepperConfig) -> Self {
        Self {
            t_final,
            dt: c.dt,
            tol_c: c.tol_c,
            tol_p: c.tol_p,
            max_coupling: c.max_coupling,
            max_picard: c.max_picard,
            omega: c.omega,
            coupling: c.coupling,
            linear_rtol: c.linear_rtol,
            linear_max_iter: c.linear_max_iter,
            eps_floor: c.eps_floor,
            z_floor: c.z_floor,
            max_halvings: c.max_halvings,
        }
    }
}

impl Default for StepperSection {
    fn default() -> Self {
        Self::from_numerics(1.0, &StepperConfig::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    #[serde(default = "default_u0")]
    pub u: InitialField,
    #[serde(default = "default_v0")]
    pub v: InitialField,
}

impl Default for InitialSection {
    fn default() -> Self {
        Self {
            u: default_u0(),
            v: default_v0(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IoSection {
    #[serde(default = "default_out_dir")]
    pub out_dir: String,
    /// Snapshot cadence in steps; 0 writes only the initial and final state.
    #[serde(default = "default_snapshot_every")]
    pub snapshot_every: usize,
}

impl Default for IoSection {
    fn default() -> Self {
        Self {
            out_dir: default_out_dir(),
            snapshot_every: default_snapshot_every(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergySection {
    /// Largest gradient magnitude sampled when estimating the bounds of `K₁`.
    #[serde(default = "default_xi_max")]
    pub xi_max: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Weight of the gradient term in the trace probe.
    #[serde(default = "one")]
    pub trace_eps: f64,
    /// Number of log-spaced points per constitutive property check.
    #[serde(default = "default_suite_points")]
    pub suite_points: usize,
}

impl Default for EnergySection {
    fn default() -> Self {
        Self {
            xi_max: default_xi_max(),
            samples: default_samples(),
            trace_eps: 1.0,
            suite_points: default_suite_points(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MmsSection {
    #[serde(default = "default_exact")]
    pub exact: Manufactured,
    /// Final time of every ladder run.
    #[serde(rename = "T", default = "default_mms_t")]
    pub t_final: f64,
    #[serde(default = "default_space_ladder")]
    pub space: Vec<LadderLevel>,
    #[serde(default = "default_time_ladder")]
    pub time: Vec<LadderLevel>,
    /// Observed orders below these thresholds fail the `mms` command.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_space_order: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_time_order: Option<f64>,
}

impl Default for MmsSection {
    fn default() -> Self {
        Self {
            exact: default_exact(),
            t_final: default_mms_t(),
            space: default_space_ladder(),
            time: default_time_ladder(),
            min_space_order: None,
            min_time_order: None,
        }
    }
}

fn one() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn default_n() -> usize {
    64
}
fn default_g_coeffs() -> Vec<f64> {
    vec![1.0, 1.0]
}
fn default_g_exps() -> Vec<f64> {
    vec![0.0, 1.0]
}
fn default_u0() -> InitialField {
    InitialField::Gaussian {
        amplitude: 1.0,
        center: [0.5, 0.5],
        width: 0.1,
        background: 0.1,
    }
}
fn default_v0() -> InitialField {
    InitialField::Constant { value: 0.5 }
}
fn default_out_dir() -> String {
    "forchflow-out".into()
}
fn default_snapshot_every() -> usize {
    10
}
fn default_xi_max() -> f64 {
    1e4
}
fn default_samples() -> usize {
    400
}
fn default_suite_points() -> usize {
    1000
}
fn default_exact() -> Manufactured {
    Manufactured {
        u: ManufacturedField {
            mean: 2.0,
            amplitude: 0.5,
            decay: 4.0,
            kx: 1.0,
            ky: 1.0,
        },
        v: ManufacturedField {
            mean: 1.0,
            amplitude: 0.3,
            decay: 3.0,
            kx: 1.0,
            ky: 0.0,
        },
    }
}
fn default_mms_t() -> f64 {
    0.25
}
fn default_space_ladder() -> Vec<LadderLevel> {
    [8, 16, 32]
        .iter()
        .map(|&n| LadderLevel {
            nx: n,
            ny: n,
            dt: 0.5 / (n * n) as f64,
        })
        .collect()
}
fn default_time_ladder() -> Vec<LadderLevel> {
    [0.05, 0.025, 0.0125]
        .iter()
        .map(|&dt| LadderLevel { nx: 64, ny: 64, dt })
        .collect()
}

/// Validated objects built from a [`Config`].
#[derive(Debug, Clone)]
pub struct Resolved {
    pub params: ModelParameters,
    pub grid: GridSpec,
    pub stepper: StepperConfig,
}

impl Config {
    /// Parses TOML text; `origin` names the source in error messages.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("{origin}: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// The fully resolved configuration as TOML, defaults included.
    pub fn dump(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }

    pub fn polynomial(&self) -> Result<ForchheimerPolynomial> {
        Ok(ForchheimerPolynomial::new(
            self.model.g_coeffs.clone(),
            self.model.g_exps.clone(),
        )?)
    }

    /// Validates every section. Violated solvability hypotheses are logged,
    /// or rejected when `strict`.
    pub fn resolve(&self, strict: bool) -> Result<Resolved> {
        let m = &self.model;
        let poly = self.polynomial()?;
        let coupling = CouplingLaw::new(m.c_hat, m.sigma)?;
        let params = ModelParameters::new(m.lambda, m.k2, poly, coupling, m.alpha, self.stepper.t_final)?;
        params.check_admissibility(strict)?;
        if !(m.phi >= 0.0) || !m.phi.is_finite() {
            return Err(ValidationError::new("model", format!("phi must be finite and >= 0, got {}", m.phi)).into());
        }
        let g = &self.grid;
        let grid = GridSpec {
            nx: g.nx,
            ny: g.ny,
            lx: g.lx,
            ly: g.ly,
            edges: g.edges,
            phi: m.phi,
            phi_schedule: g.phi_schedule,
            conservation_mode: g.conservation_mode,
        };
        crate::grid::StructuredGrid::new(&grid)?;
        let stepper = self.stepper.numerics();
        stepper.validate()?;
        self.initial.u.validate()?;
        self.initial.v.validate()?;
        let e = &self.energy;
        if !(e.xi_max > 0.0) || e.samples < 2 || !(e.trace_eps > 0.0) || e.suite_points < 2 {
            return Err(ValidationError::new(
                "energy",
                "xi_max and trace_eps must be positive, samples and suite_points at least 2",
            )
            .into());
        }
        if self.io.out_dir.is_empty() {
            return Err(ValidationError::new("io", "out_dir must not be empty").into());
        }
        Ok(Resolved { params, grid, stepper })
    }
}
