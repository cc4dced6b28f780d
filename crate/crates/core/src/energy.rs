//! Energy functionals of discrete trajectories and the a priori bounds they
//! must satisfy.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constitutive::{pow_nonneg, KBounds, PotentialTable};
use crate::error::NumericError;
use crate::grid::{BoundaryTag, FaceSelection, ScalarField, StructuredGrid};
use crate::solver::{face_gradients, ModelParameters, SimulationState};

/// Relative slack of the growth-bound comparison.
pub const GRONWALL_SLACK: f64 = 1e-9;

/// Every explicit constant of the energy estimates, plus the inputs they
/// were computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsLedger {
    pub lambda: f64,
    pub delta: f64,
    pub a: f64,
    pub alpha: f64,
    pub sigma: f64,
    pub c_hat: f64,
    pub k2: f64,
    /// `|Ω|`.
    pub area: f64,
    pub t_final: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    /// `min{λ/α, 1/2}`.
    pub c_tilde: f64,
    pub c_tilde_inv: f64,
    /// Infinite when `c5 = 0`.
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
    pub c6: f64,
    pub mu0: f64,
    pub alpha_star: f64,
    pub theta: f64,
    pub mu1: f64,
    pub mu2: f64,
    /// `α + μ₁`.
    pub beta: f64,
    /// Whether `θ ∈ (0,1)`.
    pub theta_in_range: bool,
    /// Violated hypotheses, empty when the estimates apply.
    pub violations: Vec<String>,
}

impl ConstantsLedger {
    pub fn hypotheses_hold(&self) -> bool {
        self.violations.is_empty()
    }

    /// Exponent `α/(α−λ−1)` of the boundary-rate term, when defined.
    pub fn phi_rate_exponent(&self) -> Option<f64> {
        let d = self.alpha - self.lambda - 1.0;
        (d > 0.0).then(|| self.alpha / d)
    }
}

/// Evaluates the constants for `params` on a domain of area `area`.
pub fn compute_constants(params: &ModelParameters, bounds: &KBounds, area: f64) -> ConstantsLedger {
    let lambda = params.lambda;
    let delta = params.delta();
    let a = params.exponent_a();
    let alpha = params.alpha();
    let sigma = params.coupling.sigma();
    let c_hat = params.coupling.c_hat();
    let k2 = params.k2;
    let t = params.t_final;
    let d3 = bounds.d3;

    let c_tilde = (lambda / alpha).min(0.5);
    let c_tilde_inv = 1.0 / c_tilde;
    let c2 = (lambda / alpha).min(d3 * (alpha - lambda));
    let c3 = (2.5 * c_tilde_inv * c_hat * area).max(2.0 * c_tilde_inv * c_hat);
    let c4 = (alpha - lambda).min(k2);
    let growth = (c3 * t).exp();
    let c5 = 5.0 * t * c_hat * area / (2.0 * c4) + 2.0 * t * c_hat * growth / c4;
    let c6 = 2.0 * c_hat * growth / c2;
    let c1 = if c5 > 0.0 {
        (d3 * (alpha - lambda) + c_hat) * area / c5
    } else {
        f64::INFINITY
    };

    let mu0 = (a - delta) / (1.0 - a);
    let alpha_star = 2.0 * (a - delta) / (2.0 - a);
    let theta = 1.0 / ((1.0 - a) * (alpha / alpha_star - 1.0));
    let theta_in_range = theta > 0.0 && theta < 1.0;
    let mu1 = mu0 * (1.0 + theta * (1.0 - a)) / (1.0 - theta);
    let mu2 = 1.0 / (1.0 - a) + theta * (2.0 - a) / ((1.0 - theta) * (1.0 - a));

    let mut violations = Vec::new();
    if !(a > 0.0 && a < 1.0) {
        violations.push(format!("0 < a < 1 (a = {a})"));
    }
    if !(a > delta) {
        violations.push(format!("a > delta (a = {a}, delta = {delta})"));
    }
    if !(alpha >= 2.0 - delta - 1e-15 && alpha <= 2.0) {
        violations.push(format!("2 - delta <= alpha <= 2 (alpha = {alpha})"));
    }
    if params.coupling.is_active() && sigma > alpha / 2.0 {
        violations.push(format!("sigma <= alpha/2 (sigma = {sigma})"));
    }
    if !theta_in_range {
        violations.push(format!("0 < theta < 1 (theta = {theta})"));
    }
    if !(c2 > 0.0) {
        violations.push(format!("C2 > 0 (C2 = {c2})"));
    }
    if !(c4 > 0.0) {
        violations.push(format!("C4 > 0 (C4 = {c4})"));
    }

    ConstantsLedger {
        lambda,
        delta,
        a,
        alpha,
        sigma,
        c_hat,
        k2,
        area,
        t_final: t,
        d1: bounds.d1,
        d2: bounds.d2,
        d3,
        c_tilde,
        c_tilde_inv,
        c1,
        c2,
        c3,
        c4,
        c5,
        c6,
        mu0,
        alpha_star,
        theta,
        mu1,
        mu2,
        beta: alpha + mu1,
        theta_in_range,
        violations,
    }
}

/// The functionals of one state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Functionals {
    /// `∫|u|^α`.
    pub int_u_alpha: f64,
    /// `∫v²`.
    pub int_v_sq: f64,
    /// `∫|∇u|^{2−a}|u|^{α+δ−2}`.
    pub int_grad_u_weighted: f64,
    /// `∫|∇v|²`.
    pub int_grad_v_sq: f64,
    /// `∫H(|∇u|)`.
    pub int_potential: f64,
}

impl Functionals {
    /// `V = 1 + ∫|u|^α + ∫v²`.
    pub fn v(&self) -> f64 {
        1.0 + self.int_u_alpha + self.int_v_sq
    }

    /// `Λ = ((λ+1)/2)∫H(|∇u|) + ∫|u|^α`.
    pub fn lambda_fn(&self, lambda: f64) -> f64 {
        0.5 * (lambda + 1.0) * self.int_potential + self.int_u_alpha
    }
}

/// Midpoint-rule evaluation of the functionals; gradients are cell averages
/// of the face-normal differences.
pub fn evaluate_functionals(
    grid: &StructuredGrid,
    params: &ModelParameters,
    potential: &PotentialTable,
    state: &SimulationState,
) -> Result<Functionals, NumericError> {
    let alpha = params.alpha();
    let a = params.exponent_a();
    let weight_exp = alpha + params.delta() - 2.0;
    let gu = grid.cell_gradients(&face_gradients(grid, params, &state.u, state.t));
    let gv = grid.cell_gradients(&grid.face_gradients(&state.v, |_, _| 0.0));
    let area = grid.cell_area();
    let mut f = Functionals::default();
    for c in 0..grid.cell_count() {
        let u = state.u.values[c].abs();
        let v = state.v.values[c];
        let xi = gu[c][0].hypot(gu[c][1]);
        f.int_u_alpha += pow_nonneg(u, alpha);
        f.int_v_sq += v * v;
        f.int_grad_u_weighted += pow_nonneg(xi, 2.0 - a) * pow_nonneg(u, weight_exp.max(0.0));
        f.int_grad_v_sq += gv[c][0] * gv[c][0] + gv[c][1] * gv[c][1];
        f.int_potential += potential.eval(xi)?;
    }
    f.int_u_alpha *= area;
    f.int_v_sq *= area;
    f.int_grad_u_weighted *= area;
    f.int_grad_v_sq *= area;
    f.int_potential *= area;
    Ok(f)
}

/// Largest relative violation of `K₁(ξ)ξ² <= H(ξ) <= 2K₁(ξ)ξ²` over the cell
/// gradient magnitudes of `state`; zero when the sandwich holds everywhere.
pub fn sandwich_spot_check(
    grid: &StructuredGrid,
    params: &ModelParameters,
    potential: &PotentialTable,
    state: &SimulationState,
) -> Result<f64, NumericError> {
    let gu = grid.cell_gradients(&face_gradients(grid, params, &state.u, state.t));
    let mut worst: f64 = 0.0;
    for g in gu {
        let xi = g[0].hypot(g[1]);
        if xi == 0.0 {
            continue;
        }
        let lower = params.poly.eval_k1(xi)? * xi * xi;
        let h = potential.eval(xi)?;
        worst = worst.max((lower - h) / lower).max((h - 2.0 * lower) / lower);
    }
    Ok(worst)
}

/// One row of the energy ledger.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LedgerRow {
    pub t: f64,
    pub int_u_alpha: f64,
    pub int_v_sq: f64,
    pub int_grad_u_weighted: f64,
    pub int_grad_v_sq: f64,
    pub v: f64,
    pub lambda: f64,
    /// `V(0)·e^{C₃t}`.
    pub v_bound: f64,
    pub coupling_iters: usize,
}

pub const LEDGER_HEADER: &str =
    "t,int_u_alpha,int_v_sq,int_grad_u_weighted,int_grad_v_sq,V,Lambda,V_bound,coupling_iters";

impl LedgerRow {
    /// CSV line in shortest round-trip float formatting.
    pub fn to_csv(&self) -> String {
        format!(
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{}",
            self.t,
            self.int_u_alpha,
            self.int_v_sq,
            self.int_grad_u_weighted,
            self.int_grad_v_sq,
            self.v,
            self.lambda,
            self.v_bound,
            self.coupling_iters
        )
    }

    pub fn from_csv(line: &str) -> Result<Self, String> {
        let parts: Vec<&str> = line.trim().split(',').collect();
        if parts.len() != 9 {
            return Err(format!("expected 9 columns, found {}", parts.len()));
        }
        let f = |k: usize| -> Result<f64, String> {
            parts[k]
                .trim()
                .parse::<f64>()
                .map_err(|e| format!("column {}: {e}", k + 1))
        };
        Ok(Self {
            t: f(0)?,
            int_u_alpha: f(1)?,
            int_v_sq: f(2)?,
            int_grad_u_weighted: f(3)?,
            int_grad_v_sq: f(4)?,
            v: f(5)?,
            lambda: f(6)?,
            v_bound: f(7)?,
            coupling_iters: parts[8]
                .trim()
                .parse()
                .map_err(|e| format!("column 9: {e}"))?,
        })
    }
}

/// Time series of the energy functionals.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EnergyLedger {
    pub rows: Vec<LedgerRow>,
}

impl EnergyLedger {
    /// Appends a row; the bound is anchored at the first row's `V`.
    pub fn push(&mut self, t: f64, f: &Functionals, lambda: f64, c3: f64, coupling_iters: usize) {
        let v = f.v();
        let v0 = self.rows.first().map_or(v, |r| r.v);
        self.rows.push(LedgerRow {
            t,
            int_u_alpha: f.int_u_alpha,
            int_v_sq: f.int_v_sq,
            int_grad_u_weighted: f.int_grad_u_weighted,
            int_grad_v_sq: f.int_grad_v_sq,
            v,
            lambda: f.lambda_fn(lambda),
            v_bound: v0 * (c3 * t).exp(),
            coupling_iters,
        });
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(64 * (self.rows.len() + 1));
        s.push_str(LEDGER_HEADER);
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.to_csv());
            s.push('\n');
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self, String> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == LEDGER_HEADER => {}
            Some(h) => return Err(format!("unexpected header {h:?}")),
            None => return Err("empty ledger".into()),
        }
        let rows = lines
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| LedgerRow::from_csv(l).map_err(|e| format!("line {}: {e}", i + 2)))
            .collect::<Result<_, _>>()?;
        Ok(Self { rows })
    }

    /// All entries finite and nonnegative, `V >= 1`.
    pub fn well_formed(&self) -> bool {
        self.rows.iter().all(|r| {
            let vals = [
                r.t,
                r.int_u_alpha,
                r.int_v_sq,
                r.int_grad_u_weighted,
                r.int_grad_v_sq,
                r.v,
                r.lambda,
                r.v_bound,
            ];
            vals.iter().all(|x| x.is_finite() && *x >= 0.0) && r.v >= 1.0
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GronwallReport {
    pub passed: bool,
    /// `min_t (V(0)e^{C₃t}(1+slack) − V(t)) / (V(0)e^{C₃t})`.
    pub worst_margin: f64,
    /// Time of the first violation.
    pub first_violation: Option<f64>,
    /// `max_k log(V(t_{k+1})/V(t_k))/(t_{k+1} − t_k)`.
    pub empirical_rate: f64,
    pub c3: f64,
}

/// Checks `V(t) <= V(0)e^{C₃t}` at every row of the ledger.
pub fn gronwall_check(ledger: &EnergyLedger, c3: f64) -> GronwallReport {
    let mut worst = f64::INFINITY;
    let mut first_violation = None;
    let mut rate = f64::NEG_INFINITY;
    if let Some(first) = ledger.rows.first() {
        let (t0, v0) = (first.t, first.v);
        for r in &ledger.rows {
            let bound = v0 * (c3 * (r.t - t0)).exp();
            let margin = (bound * (1.0 + GRONWALL_SLACK) - r.v) / bound;
            worst = worst.min(margin);
            if !(margin >= 0.0) && first_violation.is_none() {
                first_violation = Some(r.t);
            }
        }
        for w in ledger.rows.windows(2) {
            let dt = w[1].t - w[0].t;
            if dt > 0.0 {
                rate = rate.max((w[1].v / w[0].v).ln() / dt);
            }
        }
    }
    GronwallReport {
        passed: first_violation.is_none() && worst.is_finite() || ledger.rows.is_empty(),
        worst_margin: worst,
        first_violation,
        empirical_rate: rate,
        c3,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CheckStatus {
    Pass,
    Fail,
    /// The estimate's hypotheses do not hold, so there is nothing to check.
    NotApplicable(String),
}

impl CheckStatus {
    pub fn is_failure(&self) -> bool {
        matches!(self, CheckStatus::Fail)
    }

    pub fn label(&self) -> &'static str {
        match self {
            CheckStatus::Pass => "pass",
            CheckStatus::Fail => "fail",
            CheckStatus::NotApplicable(_) => "n/a",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratedGradientReport {
    pub status: CheckStatus,
    /// Trapezoid integral of `∫|∇u|^{2−a}|u|^{α+δ−2} + ∫|∇v|²` over time.
    pub lhs: f64,
    /// `C₅ + C₆(T·‖u₀‖_α^α + T·‖v₀‖₂²)`.
    pub rhs: f64,
    /// `(rhs − lhs)/rhs`.
    pub margin: f64,
}

/// Compares the time-integrated gradient functionals with their bound.
///
/// The initial-data norms enter as space-time norms over `(0, T)` of the
/// time-independent data, i.e. multiplied by `T`.
pub fn integrated_gradient_check(ledger: &EnergyLedger, constants: &ConstantsLedger) -> IntegratedGradientReport {
    let mut lhs = 0.0;
    for w in ledger.rows.windows(2) {
        let g0 = w[0].int_grad_u_weighted + w[0].int_grad_v_sq;
        let g1 = w[1].int_grad_u_weighted + w[1].int_grad_v_sq;
        lhs += 0.5 * (w[1].t - w[0].t) * (g0 + g1);
    }
    let (t0, t1) = match (ledger.rows.first(), ledger.rows.last()) {
        (Some(f), Some(l)) => (f.t, l.t),
        _ => (0.0, 0.0),
    };
    let span = t1 - t0;
    let data = ledger.rows.first().map_or(0.0, |r| r.int_u_alpha + r.int_v_sq);
    let rhs = constants.c5 + constants.c6 * span * data;
    let margin = if rhs > 0.0 { (rhs - lhs) / rhs } else if lhs == 0.0 { 0.0 } else { f64::NEG_INFINITY };
    let status = if lhs == 0.0 {
        CheckStatus::Pass
    } else if !constants.hypotheses_hold() {
        CheckStatus::NotApplicable(constants.violations.join("; "))
    } else if constants.c_hat == 0.0 {
        CheckStatus::NotApplicable("the bound degenerates to zero without coupling (c_hat = 0)".into())
    } else if lhs <= rhs {
        CheckStatus::Pass
    } else {
        CheckStatus::Fail
    };
    IntegratedGradientReport {
        status,
        lhs,
        rhs,
        margin,
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TraceProbeError {
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("the exit boundary is empty")]
    NoExit,
}

/// The terms of the trace inequality for one field.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceProbeReport {
    /// `∫_{exit}|u|^α dσ`.
    pub lhs: f64,
    /// `2ε∫|u|^{α+δ−2}|∇u|^{2−a}`.
    pub gradient_term: f64,
    /// `‖u‖_α^α`.
    pub norm_term: f64,
    /// `ε^{−1/(1−a)}‖u‖_α^{α+μ₀}`.
    pub mu0_term: f64,
    /// `ε^{−μ₂}‖u‖_α^{α+μ₁}`.
    pub mu1_term: f64,
    /// Smallest `C >= 0` for which the inequality holds.
    pub minimal_c: f64,
}

/// Finds the smallest constant in the trace inequality for the given field.
///
/// Gradients are taken from `u` alone (centered differences, one-sided at the
/// boundary), without boundary data.
pub fn trace_probe(
    grid: &StructuredGrid,
    constants: &ConstantsLedger,
    u: &ScalarField,
    eps: f64,
) -> Result<TraceProbeReport, TraceProbeError> {
    let (a, delta, alpha) = (constants.a, constants.delta, constants.alpha);
    if !(a > delta) {
        return Err(TraceProbeError::Hypothesis(format!("a > delta (a = {a}, delta = {delta})")));
    }
    if !(alpha >= 2.0 - delta - 1e-15 && alpha <= 2.0) {
        return Err(TraceProbeError::Hypothesis(format!("2 - delta <= alpha <= 2 (alpha = {alpha})")));
    }
    if !constants.theta_in_range {
        return Err(TraceProbeError::Hypothesis(format!("0 < theta < 1 (theta = {})", constants.theta)));
    }
    if !(eps > 0.0) {
        return Err(TraceProbeError::Hypothesis(format!("eps > 0 (eps = {eps})")));
    }
    let edge = grid.boundary_integral(
        |f| pow_nonneg(u.values[f.cell].abs(), alpha),
        FaceSelection::Tagged(BoundaryTag::Robin),
    );
    if edge.empty {
        return Err(TraceProbeError::NoExit);
    }
    let grads = free_cell_gradients(grid, u);
    let weight_exp = (alpha + delta - 2.0).max(0.0);
    let mut grad_int = 0.0;
    let mut norm_int = 0.0;
    for (c, g) in grads.iter().enumerate() {
        let x = u.values[c].abs();
        grad_int += pow_nonneg(g[0].hypot(g[1]), 2.0 - a) * pow_nonneg(x, weight_exp);
        norm_int += pow_nonneg(x, alpha);
    }
    grad_int *= grid.cell_area();
    norm_int *= grid.cell_area();
    let norm = norm_int.powf(1.0 / alpha);
    let gradient_term = 2.0 * eps * grad_int;
    let norm_term = norm_int;
    let mu0_term = eps.powf(-1.0 / (1.0 - a)) * norm.powf(alpha + constants.mu0);
    let mu1_term = eps.powf(-constants.mu2) * norm.powf(alpha + constants.mu1);
    let c_terms = norm_term + mu0_term + mu1_term;
    let need = edge.value - gradient_term;
    let minimal_c = if need <= 0.0 {
        0.0
    } else if c_terms > 0.0 {
        need / c_terms
    } else {
        f64::INFINITY
    };
    Ok(TraceProbeReport {
        lhs: edge.value,
        gradient_term,
        norm_term,
        mu0_term,
        mu1_term,
        minimal_c,
    })
}

fn free_cell_gradients(grid: &StructuredGrid, u: &ScalarField) -> Vec<[f64; 2]> {
    let (nx, ny) = (grid.nx(), grid.ny());
    let v = &u.values;
    let d = |lo: usize, hi: usize, span: f64| (v[hi] - v[lo]) / span;
    (0..nx * ny)
        .map(|c| {
            let (i, j) = (c % nx, c / nx);
            let gx = match (i > 0, i + 1 < nx) {
                (true, true) => d(c - 1, c + 1, 2.0 * grid.dx()),
                (false, _) => d(c, c + 1, grid.dx()),
                (_, false) => d(c - 1, c, grid.dx()),
            };
            let gy = match (j > 0, j + 1 < ny) {
                (true, true) => d(c - nx, c + nx, 2.0 * grid.dy()),
                (false, _) => d(c, c + nx, grid.dy()),
                (_, false) => d(c - nx, c, grid.dy()),
            };
            [gx, gy]
        })
        .collect()
}
